#pragma once

// Finite-difference suites over every differentiable op, the losses and the
// assembled model. All checks run in double precision.

#include <cstdint>
#include <string>
#include <vector>

#include "ced/losses.hpp"
#include "ced/network.hpp"
#include "ced/tensor.hpp"

namespace ced {

struct GradcheckCase {
    std::string name;
    GradCheckResult result;
    double tolerance = 1e-3;
    bool passed() const { return result.max_relative_error < tolerance && result.checked > 0; }
};

/// Per-op checks (conv, transposed conv, pixel shuffle, bilinear upsampling,
/// ReLU away from its kink, fused BCE, the localisation losses and one full
/// refinement stage) at eps 1e-3 against tolerance 1e-3.
std::vector<GradcheckCase> op_gradcheck_suite(std::uint64_t seed);

struct FullModelCheckOptions {
    int size = 16;
    std::vector<int> channels{4, 6, 8};
    int width = 4;  // k_u = k_c = k_m = k_o
    UpsampleKind upsample = UpsampleKind::SubPixel;
    double lambda_loc = 0.5;
    LocKind loc_kind = LocKind::DistanceTransform;
    double eps = 1e-5;
    double tolerance = 2e-3;
    /// Coordinates whose one-sided differences disagree by more than this are
    /// treated as straddling a ReLU kink and skipped.
    double kink_tolerance = 2e-3;
    /// The case fails when more than this fraction of coordinates is skipped.
    double max_skipped_fraction = 0.02;
};

/// Total loss of a He-initialised toy model on a synthetic image, checked over
/// every parameter. Biases are drawn from U(-0.1, 0.1) instead of zero: with
/// zero biases, pixels whose receptive field is all zero sit exactly on the
/// ReLU kink and the central difference is meaningless there.
GradcheckCase full_model_gradcheck(std::uint64_t seed, const FullModelCheckOptions& opt = {});

}  // namespace ced
