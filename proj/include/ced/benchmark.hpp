#pragma once

// Tolerance-based boundary benchmarking: one-to-one pixel matching within a
// radius (pixels, or millimetres through the image spacing), precision/recall
// over a threshold grid, and the dataset-level ODS / OIS / AP summaries.

#include <optional>
#include <string>
#include <vector>

#include "ced/geometry.hpp"
#include "ced/tensor.hpp"

namespace ced {

enum class ToleranceKind { Pixel, Millimetre };

struct Tolerance {
    ToleranceKind kind = ToleranceKind::Pixel;
    double value = 1.0;

    bool operator==(const Tolerance&) const = default;
    /// "4px", "0.5mm"
    std::string label() const;
    std::string kind_name() const { return kind == ToleranceKind::Pixel ? "px" : "mm"; }
};

struct EvalConfig {
    int thresholds = 33;
    std::vector<double> tol_px{4.0, 2.0, 1.0};
    std::vector<double> tol_mm{1.0, 0.5};
    bool apply_thinning = true;

    /// K evenly spaced values k / (K + 1), k = 1..K; endpoints excluded.
    std::vector<double> threshold_values() const;
    std::vector<Tolerance> tolerances() const;
    /// Throws std::invalid_argument on K < 2 or non-positive tolerances.
    void validate() const;
};

struct MatchCounts {
    long tp_pred = 0;
    long fp = 0;
    long tp_gt = 0;
    long fn = 0;

    MatchCounts& operator+=(const MatchCounts& o) {
        tp_pred += o.tp_pred;
        fp += o.fp;
        tp_gt += o.tp_gt;
        fn += o.fn;
        return *this;
    }
    bool operator==(const MatchCounts&) const = default;

    // 0/0 is reported as 0 for both ratios.
    double precision() const;
    double recall() const;
    double f_measure() const;
};

struct PRPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
};

/// F = 2PR / (P + R), and 0 when P + R = 0.
double f_measure(double precision, double recall);
PRPoint make_point(double threshold, const MatchCounts& c);

/// Decides whether a pixel offset is within tolerance. With a spacing the
/// distance is sqrt((dy*row_mm)^2 + (dx*col_mm)^2) compared against a mm radius.
struct AdmissibilityRule {
    double tolerance = 1.0;
    std::optional<Spacing> spacing;

    double distance(int dy, int dx) const;
    bool admits(int dy, int dx) const;
    /// Largest |dy| / |dx| that can possibly be admitted.
    int radius_rows() const;
    int radius_cols() const;
};

AdmissibilityRule px_rule(double tol_px);
/// Millimetre tolerance evaluated in mm space; no scalar pixel conversion.
AdmissibilityRule mm_to_px(double tol_mm, const Spacing& spacing);

/// Maximum-cardinality one-to-one matching (Hopcroft-Karp) between the
/// on-pixels of `pred` and `gt`, where a pair is admissible iff the rule admits
/// their offset.
MatchCounts match_boundaries(const BinaryMap& pred, const BinaryMap& gt, const AdmissibilityRule& rule);
MatchCounts match_boundaries(const BinaryMap& pred, const BinaryMap& gt, double tol,
                             std::optional<Spacing> spacing = std::nullopt);

struct ToleranceCurve {
    Tolerance tolerance;
    std::vector<MatchCounts> counts;  // one per threshold
    std::vector<PRPoint> points;
};

/// Per-image evaluation: for every threshold binarise (prob >= t), optionally
/// thin, and match against `gt` at every configured tolerance. Millimetre
/// tolerances are evaluated only when `spacing` is present.
std::vector<ToleranceCurve> pr_curve(const Tensor& prob, const BinaryMap& gt, const EvalConfig& cfg,
                                     std::optional<Spacing> spacing, bool thinned);

struct DatasetSummary {
    double ods = 0.0;
    double ods_threshold = 0.0;
    double ois = 0.0;
    double ap = 0.0;
    std::vector<PRPoint> pooled;  // one per threshold
};

/// `per_image[i][k]` holds image i's counts at threshold k.
/// ODS: best F over thresholds of pooled counts. OIS: mean of per-image best F.
/// AP: trapezoidal area under the pooled curve after making precision
/// non-increasing in recall; a (recall 0) anchor carries the first
/// interpolated precision so a perfect curve integrates to 1.
DatasetSummary dataset_summary(const std::vector<std::vector<MatchCounts>>& per_image,
                               const std::vector<double>& thresholds);

/// Area under a PR curve using the convention of dataset_summary.
double average_precision(std::vector<PRPoint> points);

struct CrispnessRow {
    Tolerance tolerance;
    double ods = 0.0;
};

struct CrispnessProfile {
    std::vector<CrispnessRow> pixel;       // tolerance descending
    std::vector<CrispnessRow> millimetre;  // tolerance descending
};

/// Groups (tolerance, ODS) pairs by kind and sorts each by shrinking
/// tolerance. Throws std::logic_error if ODS increases as tolerance shrinks.
CrispnessProfile crispness_profile(const std::vector<CrispnessRow>& rows);

}  // namespace ced
