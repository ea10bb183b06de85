#pragma once

// File formats and dataset plumbing:
//   * PGM P5 rasters (8-bit, or 16-bit big-endian when maxval > 255)
//   * CEDF float rasters: "CEDF", u32 height, u32 width, u32 channels (LE),
//     then height*width*channels little-endian f32 values in tensor order
//   * JSON dataset manifests and run configurations
//   * deterministic synthetic organ-like datasets

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ced/benchmark.hpp"
#include "ced/geometry.hpp"
#include "ced/losses.hpp"
#include "ced/network.hpp"
#include "ced/tensor.hpp"

namespace ced {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ImageFormat { Pgm8, Pgm16, Cedf };

/// Dispatches on the magic bytes: "P5" (PGM, scaled to [0, 1]) or "CEDF".
Tensor load_image(const std::filesystem::path& path);
Tensor read_image(std::istream& in, const std::string& name = "<stream>");

Tensor read_pgm(std::istream& in, const std::string& name = "<stream>");
Tensor read_cedf(std::istream& in, const std::string& name = "<stream>");
void write_pgm(const Tensor& t, std::ostream& out, int maxval);
void write_cedf(const Tensor& t, std::ostream& out);

/// Single-channel map with values in [0, 1]. PGM output is quantised with
/// round-half-up to the chosen maxval; out-of-range values are an error.
void save_edge_map(const Tensor& t, const std::filesystem::path& path, ImageFormat format);

/// Any non-zero sample is on.
BinaryMap load_binary_map(const std::filesystem::path& path);
void save_binary_map(const BinaryMap& b, const std::filesystem::path& path);

enum class Split { Train, Val, Test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestRecord {
    std::string id;
    std::filesystem::path image_path;
    std::optional<std::filesystem::path> gt_mask_path;
    std::optional<std::filesystem::path> gt_boundary_path;
    std::optional<Spacing> spacing;
    Split split = Split::Train;
};

struct DatasetManifest {
    std::string name = "dataset";
    std::vector<ManifestRecord> records;

    std::vector<const ManifestRecord*> split(Split s) const;
};

/// Relative paths are resolved against the manifest's directory. Rejects
/// duplicate ids, missing files and records without exactly one of
/// gt_mask / gt_boundary, naming the offending record.
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Paths are written relative to the manifest directory when possible.
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// Ground-truth boundary of a record: the mask's inner boundary, or the
/// stored boundary raster.
BinaryMap load_ground_truth(const ManifestRecord& r);

struct TrainConfig {
    double lr = 1e-3;
    double momentum = 0.9;
    int steps = 200;
    std::uint64_t seed = 0;
    double clip_norm = 100.0;  // global gradient-norm cap; 0 disables
};

struct RunConfig {
    ModelConfig model;
    LossWeights loss;
    double bin_threshold = 0.5;
    TrainConfig train;
    EvalConfig eval;
};

/// Parses the JSON run configuration. Missing keys keep their defaults;
/// invalid values raise ConfigError carrying "file:line: message".
RunConfig parse_run_config(const std::string& text, const std::string& name = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& cfg);

struct SynthOptions {
    int n_images = 4;
    int size = 64;
    std::uint64_t seed = 0;
    int size_multiple = 4;  // images must be divisible by this (2^(L-1))
    double noise_sigma = 0.04;
    /// Fraction of records tagged val and test; the rest are train.
    double val_fraction = 0.0;
    double test_fraction = 0.0;
};

/// Renders anti-aliased ellipses and smooth blobs over intensity gradients with
/// additive Gaussian noise. Writes <id>.pgm, <id>_mask.pgm and manifest.json to
/// `out_dir` and returns the manifest. Deterministic given the options.
DatasetManifest synth_dataset(const SynthOptions& opt, const std::filesystem::path& out_dir);

/// In-memory rendering used by synth_dataset: (image, mask) for one seed.
std::pair<Tensor, BinaryMap> render_synthetic(int size, std::uint64_t seed, double noise_sigma);

}  // namespace ced
