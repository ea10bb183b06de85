#pragma once

// Encoder plus backward refinement pathway. Refinement stages run from the
// deepest scale to the shallowest; each one fuses the top-down map U with the
// same-scale encoder feature C and doubles the resolution:
//
//   U~ = relu(conv_u(U)), C~ = relu(conv_c(C))
//   M  = relu(conv_merge([U~, C~]))
//   U' = relu(pixel_shuffle(conv_up(M), r))
//
// Side heads (1x1 -> 1 channel + sigmoid) read the post-ReLU U at each
// supervised scale; the final head reads the full-resolution U_1.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ced/tensor.hpp"

namespace ced {

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// How a refinement stage doubles its resolution. SubPixel is the method's
/// upsampler; the other two exist for the ablation.
enum class UpsampleKind : std::uint32_t { SubPixel = 0, Bilinear = 1, Transposed = 2 };

std::string to_string(UpsampleKind k);
UpsampleKind upsample_kind_from_string(const std::string& s);

struct ModelConfig {
    int in_channels = 1;
    std::vector<int> channels{8, 16, 32};  // K_l per encoder stage; L = channels.size()
    int k_u = 16;                           // caps on the bottleneck widths
    int k_c = 16;
    int k_m = 16;
    int k_o = 16;
    int proj_kernel = 1;
    int up_kernel = 3;
    int r = 2;
    UpsampleKind upsample = UpsampleKind::SubPixel;
    std::vector<bool> supervised{true, true, true};  // side head on U_l, index l - 1

    int levels() const { return static_cast<int>(channels.size()); }
    /// Side heads plus the final head.
    std::size_t num_outputs() const;
    /// Input H and W must be multiples of this.
    int size_multiple() const { return 1 << (levels() - 1); }
    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct BasicEncoderStage {
    BasicConvParams<T> conv_a;  // 3x3, stride 1
    BasicConvParams<T> conv_b;  // 3x3, stride 2 (stride 1 on the first stage)
    bool operator==(const BasicEncoderStage&) const = default;
};

template <typename T>
struct BasicRefinementStage {
    int level = 0;  // scale l of the inputs U_l, C_l
    int r = 2;
    UpsampleKind upsample = UpsampleKind::SubPixel;
    BasicConvParams<T> conv_u;
    BasicConvParams<T> conv_c;
    BasicConvParams<T> conv_merge;
    BasicConvParams<T> conv_up;
    bool operator==(const BasicRefinementStage&) const = default;
};

template <typename T>
struct BasicModel {
    ModelConfig config;
    std::vector<BasicEncoderStage<T>> encoder;     // l = 1..L
    std::vector<BasicRefinementStage<T>> stages;   // l = L..2
    std::vector<BasicConvParams<T>> heads;         // supervised scales, deepest first
    std::vector<int> head_levels;
    BasicConvParams<T> final_head;

    /// All-zero parameters with the shapes implied by `cfg`.
    static BasicModel build(const ModelConfig& cfg);

    /// Every ConvParams in declaration order, with a stable name.
    std::vector<std::pair<std::string, BasicConvParams<T>*>> parameters();
    std::vector<std::pair<std::string, const BasicConvParams<T>*>> parameters() const;
    std::size_t parameter_count() const;

    /// Flat copy of all weights then biases of each ConvParams, in declaration order.
    std::vector<T> flatten() const;
    void unflatten(std::span<const T> values);

    template <typename U>
    BasicModel<U> cast() const;

    bool operator==(const BasicModel&) const = default;
};

using Model = BasicModel<float>;
using ModelD = BasicModel<double>;

template <typename T>
struct EncoderTrace {
    BasicTensor<T> input, pre_a, a, pre_b;
};

template <typename T>
struct StageTrace {
    BasicTensor<T> u, c;                 // inputs
    BasicTensor<T> pre_u, pre_c;         // projections before ReLU
    BasicTensor<T> merged_in;            // [U~, C~]
    BasicTensor<T> pre_m, m;             // merge conv before / after ReLU
    BasicTensor<T> up;                   // conv_up output (or upsampled M for Bilinear)
    BasicTensor<T> pre_out;              // resolution-doubled map before ReLU
};

/// Cached activations from ced_forward needed by ced_backward.
template <typename T>
struct ForwardTrace {
    std::vector<EncoderTrace<T>> encoder;
    std::vector<BasicTensor<T>> features;  // C_1..C_L
    std::vector<StageTrace<T>> stages;
    std::vector<BasicTensor<T>> tops;      // U_L..U_1
    std::vector<BasicTensor<T>> logits;    // side heads then final
};

template <typename T>
struct ForwardResult {
    std::vector<BasicTensor<T>> side_outputs;  // probabilities, deepest first
    BasicTensor<T> final;                      // full-resolution probability
    ForwardTrace<T> trace;
};

/// C_1..C_L; C_l has (H, W) / 2^(l-1) spatial size and K_l channels.
template <typename T>
std::vector<BasicTensor<T>> encoder_forward(const BasicTensor<T>& image, const BasicModel<T>& model,
                                            std::vector<EncoderTrace<T>>* trace = nullptr);

/// One refinement stage: U_l, C_l -> U_{l-1} at twice the resolution.
template <typename T>
BasicTensor<T> refine_forward(const BasicTensor<T>& u, const BasicTensor<T>& c,
                              const BasicRefinementStage<T>& stage, StageTrace<T>* trace = nullptr);

template <typename T>
struct StageGrads {
    BasicTensor<T> u, c;
    BasicRefinementStage<T> params;
};

template <typename T>
StageGrads<T> refine_backward(const StageTrace<T>& trace, const BasicRefinementStage<T>& stage,
                              const BasicTensor<T>& grad_out);

template <typename T>
ForwardResult<T> ced_forward(const BasicTensor<T>& image, const BasicModel<T>& model);

/// Reverse-mode pass. `logit_grads` holds d loss / d logits for every output
/// of ced_forward (side heads deepest first, then the final head). Returns a
/// model-shaped container of parameter gradients.
template <typename T>
BasicModel<T> ced_backward(const BasicModel<T>& model, const ForwardTrace<T>& trace,
                           const std::vector<BasicTensor<T>>& logit_grads);

/// Weights ~ Normal(0, sqrt(2 / fan_in)), biases zero. Normals come from
/// std::mt19937_64(seed) through the Box-Muller transform (one cosine sample
/// per pair of 53-bit uniforms), visiting parameters in declaration order.
template <typename T>
void he_init(BasicModel<T>& model, std::uint64_t seed);

/// v <- momentum * v + g; p <- p - lr * v. Throws TrainingError naming the
/// first non-finite gradient entry, before any parameter is modified.
template <typename T>
void sgd_momentum_step(BasicModel<T>& params, const BasicModel<T>& grads, double lr, double momentum,
                       BasicModel<T>& velocity);

/// Binary checkpoint (all integers u32 little-endian, floats IEEE-754 f32 LE):
///   "CED1"
///   L, K_1..K_L, r, mask bits (bit l-1 set when U_l is supervised),
///   in_channels, k_u, k_c, k_m, k_o, proj_kernel, up_kernel, upsample kind
///   parameter count N, then N floats in declaration order.
void save_checkpoint(const Model& model, std::ostream& out);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(std::istream& in);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace ced
