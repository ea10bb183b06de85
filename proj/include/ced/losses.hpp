#pragma once

// Training objective: class-balanced cross-entropy on every supervised output
// plus an optional localisation term on the final full-resolution output.

#include <optional>
#include <string>
#include <vector>

#include "ced/geometry.hpp"
#include "ced/tensor.hpp"

namespace ced {

enum class LocKind { None, DistanceTransform, SkeletonDice };

std::string to_string(LocKind k);
LocKind loc_kind_from_string(const std::string& s);

struct LossWeights {
    std::vector<double> alpha;  // one per supervised output, final output last
    double lambda_loc = 0.0;
    LocKind loc_kind = LocKind::None;

    /// Throws std::invalid_argument unless alpha has `outputs` entries, all
    /// non-negative with at least one positive, and lambda_loc >= 0.
    void validate(std::size_t outputs) const;
};

/// Ground-truth boundary with lazily derived rasters. Not safe to share across
/// threads while the caches are being filled.
class GroundTruth {
public:
    explicit GroundTruth(BinaryMap boundary) : boundary_(std::move(boundary)) {}

    const BinaryMap& boundary() const { return boundary_; }
    int height() const { return boundary_.height(); }
    int width() const { return boundary_.width(); }

    /// Per-pixel distance to the boundary, row-major. When the boundary is
    /// empty every entry is the image diagonal.
    const std::vector<double>& distance() const;
    const BinaryMap& skeleton() const;
    /// Max-pooled copy of the boundary at 1 / 2^level resolution.
    const BinaryMap& level(int level) const;

private:
    BinaryMap boundary_;
    mutable std::optional<std::vector<double>> dt_;
    mutable std::optional<BinaryMap> skeleton_;
    mutable std::vector<BinaryMap> pyramid_;
};

template <typename T>
struct LossResult {
    double loss = 0.0;
    BasicTensor<T> grad;
};

/// Sum over pixels of -[w+ G log P + w- (1 - G) log(1 - P)] with
/// w+ = (|Omega| - N+) / |Omega| and w- = 1 - w+, evaluated from logits
/// (P = sigmoid(logits)). The gradient is with respect to the logits.
template <typename T>
LossResult<T> balanced_bce(const BasicTensor<T>& logits, const BinaryMap& g);

/// Class weights (w+, w-) of balanced_bce for a given boundary map.
std::pair<double, double> balanced_weights(const BinaryMap& g);

struct DtMetric {
    double value = 0.0;
    bool empty_prediction = false;
};

/// Mean over pixels of |D_G - D_P| where D_P is the distance transform of P
/// binarised at `bin_threshold`. An empty binarisation uses the image diagonal
/// for D_P and sets `empty_prediction`.
DtMetric distance_transform_metric(const Tensor& prob, const GroundTruth& g, double bin_threshold);

/// Expected distance-to-boundary of the predicted mass,
/// sum(P * D_G) / max(1, sum(P)). The gradient is with respect to P.
template <typename T>
LossResult<T> distance_transform_training_loss(const BasicTensor<T>& prob, const GroundTruth& g);

/// 1 - (2 sum(P S) + eps) / (sum(P^2) + sum(S) + eps) with eps = 1. The
/// gradient is with respect to P.
template <typename T>
LossResult<T> skeleton_dice_loss(const BasicTensor<T>& prob, const BinaryMap& skeleton);

template <typename T>
struct TotalLoss {
    double loss = 0.0;
    std::vector<double> terms;               // alpha-weighted edge losses, then the weighted loc term
    std::vector<BasicTensor<T>> grads;       // d loss / d logits, one per output
};

/// Weighted sum of balanced_bce over all outputs (each against the pyramid
/// level at its resolution) plus lambda_loc times the localisation loss on
/// the last output, which must be at full resolution.
template <typename T>
TotalLoss<T> total_loss(const std::vector<BasicTensor<T>>& logits, const GroundTruth& g, const LossWeights& w);

}  // namespace ced
