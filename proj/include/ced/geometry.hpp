#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ced/tensor.hpp"

namespace ced {

/// Byte raster of {0, 1} values, row-major.
class BinaryMap {
public:
    BinaryMap() = default;
    BinaryMap(int height, int width);
    BinaryMap(int height, int width, std::vector<std::uint8_t> bits);

    int height() const { return h_; }
    int width() const { return w_; }
    std::size_t size() const { return bits_.size(); }

    bool get(int y, int x) const { return bits_[static_cast<std::size_t>(y) * w_ + x] != 0; }
    void set(int y, int x, bool v) { bits_[static_cast<std::size_t>(y) * w_ + x] = v ? 1 : 0; }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    bool in_bounds(int y, int x) const { return y >= 0 && y < h_ && x >= 0 && x < w_; }

    std::size_t count() const;
    bool any() const { return count() > 0; }
    const std::vector<std::uint8_t>& bits() const { return bits_; }

    /// Pixels with value >= threshold are on.
    static BinaryMap threshold(const Tensor& t, float threshold);
    Tensor to_tensor() const;

    bool operator==(const BinaryMap&) const = default;

private:
    int h_ = 0;
    int w_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Physical pixel size in millimetres along rows (y) and columns (x).
struct Spacing {
    double row_mm = 1.0;
    double col_mm = 1.0;
    bool operator==(const Spacing&) const = default;
};

/// Per-pixel Euclidean distance to the nearest source pixel. Distances are in
/// pixels, or in millimetres when the field was built with a spacing.
struct DistanceField {
    int height = 0;
    int width = 0;
    std::vector<double> squared;  // exact squared distances
    std::optional<Spacing> spacing;

    double at(int y, int x) const;
    double squared_at(int y, int x) const { return squared[static_cast<std::size_t>(y) * width + x]; }
    std::vector<double> values() const;
};

/// Inner boundary: on-pixels with at least one 4-neighbour that is off or
/// outside the image.
BinaryMap boundary_from_mask(const BinaryMap& mask);

/// Exact Euclidean distance transform (two separable lower-envelope passes over
/// squared distances). Throws std::invalid_argument when `src` has no on-pixels.
DistanceField euclidean_dt(const BinaryMap& src, std::optional<Spacing> anisotropy = std::nullopt);

/// Zhang-Suen thinning iterated to convergence.
BinaryMap thin(const BinaryMap& b);

/// Skeleton of a boundary map; identical to thin().
BinaryMap skeletonize(const BinaryMap& g);

/// Non-maximum suppression of a single-channel probability map along the Sobel
/// gradient direction with bilinear neighbour sampling. Pixels whose gradient
/// magnitude is below 1e-6 have no direction and are kept.
Tensor nms_edges(const Tensor& prob);

/// Level 0 is `g`; level k+1 is the 2x2 block maximum of level k.
std::vector<BinaryMap> maxpool_pyramid(const BinaryMap& g, int levels);

/// Morphological dilation with a (2r+1)x(2r+1) square.
BinaryMap dilate(const BinaryMap& b, int radius);

}  // namespace ced
