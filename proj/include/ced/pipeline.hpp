#pragma once

// Training, inference and evaluation over a dataset manifest.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ced/benchmark.hpp"
#include "ced/geometry.hpp"
#include "ced/io.hpp"
#include "ced/losses.hpp"
#include "ced/network.hpp"

namespace ced {

struct TrainSample {
    std::string id;
    Tensor image;
    GroundTruth gt;
};

/// Loads every record of `split` (all records when `split` is empty). Images
/// whose boundary map is all-off or all-on make the balanced loss vanish; they
/// are skipped with a warning on `warn`. Throws when an image does not fit the
/// model (channels, or size not a multiple of 2^(L-1)).
std::vector<TrainSample> load_samples(const DatasetManifest& m, std::optional<Split> split, const ModelConfig& cfg,
                                      std::ostream* warn = nullptr);

struct TrainLogRow {
    int step = 0;
    std::string image_id;
    double loss = 0.0;
    std::vector<double> terms;
    double grad_norm = 0.0;
    bool clipped = false;
};

struct TrainResult {
    Model model;
    std::vector<TrainLogRow> log;
};

/// Per-image SGD with momentum for cfg.train.steps steps. Images are visited
/// in a fresh permutation each epoch, drawn from the training seed; the model
/// is He-initialised from the same seed. Gradients whose global L2 norm
/// exceeds cfg.train.clip_norm are rescaled to that norm (0 disables).
/// Writes one CSV row per step to `log_csv` when given.
TrainResult train(const RunConfig& cfg, const std::vector<TrainSample>& samples, std::ostream* log_csv = nullptr);

void write_train_log_header(std::ostream& out, std::size_t terms);
void write_train_log_row(std::ostream& out, const TrainLogRow& row);

/// Final probability map for an image of any size: edge-replicates up to the
/// next multiple of 2^(L-1), runs the model and crops back.
Tensor predict(const Model& model, const Tensor& image);

enum class PostProcess { None, Nms, Thin };

/// Nms: nms_edges. Thin: probabilities kept only on thin(prob >= threshold).
Tensor postprocess(const Tensor& prob, PostProcess mode, double threshold);

/// Writes <out_dir>/<id>.<ext> for every record; returns the paths written.
std::vector<std::filesystem::path> predict_dataset(const Model& model, const DatasetManifest& m,
                                                   const std::filesystem::path& out_dir, PostProcess mode,
                                                   double threshold, ImageFormat format);

/// <out_dir>/<id>.pgm holding boundary_from_mask for every mask record.
std::vector<std::filesystem::path> extract_boundaries(const DatasetManifest& m, const std::filesystem::path& out_dir);

struct EvalItem {
    std::string id;
    Tensor prob;
    BinaryMap gt;
    std::optional<Spacing> spacing;
};

/// Prediction raster for `id` in `pred_dir`: <id>.cedf if present, else <id>.pgm.
std::filesystem::path find_prediction(const std::filesystem::path& pred_dir, const std::string& id);

std::vector<EvalItem> load_eval_items(const DatasetManifest& m, const std::filesystem::path& pred_dir,
                                      std::optional<Split> split);

struct SummaryRow {
    Tolerance tolerance;
    bool thinned = false;
    std::size_t images = 0;
    DatasetSummary summary;
};

struct EvalReport {
    std::string dataset;
    std::vector<double> thresholds;
    std::vector<SummaryRow> rows;  // raw rows first, then thinned
    CrispnessProfile crispness_raw;
    std::optional<CrispnessProfile> crispness_thinned;
    double dt_metric = 0.0;           // mean distance_transform_metric of the raw maps
    std::size_t dt_empty_predictions = 0;

    const SummaryRow* find(const Tolerance& t, bool thinned) const;
};

/// Full benchmark: raw and (when cfg.apply_thinning) thinned predictions at
/// every pixel tolerance, and at every mm tolerance over the items that carry
/// a spacing. Throws std::logic_error if a crispness profile is not monotone.
EvalReport evaluate(const std::vector<EvalItem>& items, const EvalConfig& cfg, const std::string& dataset,
                    double bin_threshold);

struct AblationVariant {
    std::string name;
    UpsampleKind upsample = UpsampleKind::SubPixel;
    LocKind loc_kind = LocKind::None;
    double lambda_loc = 0.0;
};

struct AblationRun {
    std::uint64_t seed = 0;
    double ods_2px = 0.0;
    double ods_1px = 0.0;
    double dt_metric = 0.0;
    double final_loss = 0.0;  // mean training loss over the last epoch's steps
};

/// Scores are means over the runs, one run per training seed.
struct AblationRow {
    AblationVariant variant;
    double ods_2px = 0.0;
    double ods_1px = 0.0;
    double delta = 0.0;  // ods_2px minus the baseline's
    double dt_metric = 0.0;
    double final_loss = 0.0;
    std::vector<AblationRun> runs;
};

struct AblationResult {
    std::string baseline;
    std::vector<AblationRow> rows;

    const AblationRow& row(const std::string& name) const;
};

/// Bilinear (baseline), transposed and sub-pixel refinement with identical
/// budgets, plus sub-pixel with the distance-transform loss. The DT weight is
/// the config's lambda_loc when loc_kind is distance_transform, otherwise
/// `default_dt_lambda`.
std::vector<AblationVariant> ablation_variants(const RunConfig& cfg, double default_dt_lambda);

/// Trains every variant on the train split and scores ODS at 2 px and 1 px
/// (raw maps) and the DT metric on the test split. With replicates > 1 each
/// variant is trained at seeds train.seed .. train.seed + replicates - 1 and
/// the scores are averaged. Writes a checkpoint and a training log per run
/// plus ablation.csv, ablation_runs.csv and ablation.md to `out_dir`.
AblationResult run_ablation(const RunConfig& cfg, const DatasetManifest& m, const std::filesystem::path& out_dir,
                            std::ostream* progress = nullptr, double default_dt_lambda = 0.1, int replicates = 1);

}  // namespace ced
