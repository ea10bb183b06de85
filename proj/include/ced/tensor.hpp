#pragma once

// Dense H x W x C tensors and the differentiable kernels the network is built
// from. Every op is a pure function with a fixed summation order, so repeated
// calls on identical inputs give bit-identical results.
//
// Production code uses 32-bit floats (`Tensor`). The same kernels are
// instantiated for double (`TensorD`) so finite-difference checks are not
// swamped by single-precision rounding.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ced {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Shape {
    int height = 0;
    int width = 0;
    int channels = 0;

    bool operator==(const Shape&) const = default;
    std::size_t size() const {
        return static_cast<std::size_t>(height) * width * channels;
    }
    std::string str() const;
};

/// Row-major (y, x, c) tensor; flat index = (y * width + x) * channels + c.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    BasicTensor(int height, int width, int channels, T fill = T(0));
    explicit BasicTensor(Shape shape, T fill = T(0))
        : BasicTensor(shape.height, shape.width, shape.channels, fill) {}
    BasicTensor(int height, int width, int channels, std::vector<T> data);

    int height() const { return h_; }
    int width() const { return w_; }
    int channels() const { return c_; }
    Shape shape() const { return {h_, w_, c_}; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * w_ + x) * c_ + c;
    }
    T& at(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
    T at(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }
    T* ptr(int y, int x, int c = 0) { return data_.data() + index(y, x, c); }
    const T* ptr(int y, int x, int c = 0) const { return data_.data() + index(y, x, c); }
    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    bool operator==(const BasicTensor& o) const = default;

    template <typename U>
    BasicTensor<U> cast() const {
        return BasicTensor<U>(h_, w_, c_, std::vector<U>(data_.begin(), data_.end()));
    }

private:
    int h_ = 0;
    int w_ = 0;
    int c_ = 0;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

/// Convolution weights: kernel laid out (kh, kw, c_in, c_out), c_out fastest.
template <typename T>
struct BasicConvParams {
    int kh = 1;
    int kw = 1;
    int c_in = 1;
    int c_out = 1;
    int stride = 1;
    int padding = 0;
    std::vector<T> kernel;
    std::vector<T> bias;

    BasicConvParams() : kernel(1, T(0)), bias(1, T(0)) {}
    /// Zero-initialised parameters; throws ShapeError on even kernels, empty
    /// channels, non-positive stride or negative padding.
    BasicConvParams(int kh, int kw, int c_in, int c_out, int stride, int padding);

    /// Stride 1 with padding (k - 1) / 2, which keeps the spatial size.
    static BasicConvParams same(int k, int c_in, int c_out) {
        return BasicConvParams(k, k, c_in, c_out, 1, (k - 1) / 2);
    }

    /// Geometry for conv_transpose2d_*; even kernels are allowed here.
    static BasicConvParams transposed(int k, int c_in, int c_out, int stride, int padding) {
        if (k < 1 || c_in < 1 || c_out < 1 || stride < 1 || padding < 0) {
            throw ShapeError("invalid transposed convolution geometry");
        }
        BasicConvParams p;
        p.kh = p.kw = k;
        p.c_in = c_in;
        p.c_out = c_out;
        p.stride = stride;
        p.padding = padding;
        p.kernel.assign(static_cast<std::size_t>(k) * k * c_in * c_out, T(0));
        p.bias.assign(static_cast<std::size_t>(c_out), T(0));
        return p;
    }

    std::size_t weight_index(int ky, int kx, int ci, int co) const {
        return ((static_cast<std::size_t>(ky) * kw + kx) * c_in + ci) * c_out + co;
    }
    int fan_in() const { return kh * kw * c_in; }
    Shape output_shape(Shape input) const;
    bool operator==(const BasicConvParams&) const = default;

    template <typename U>
    BasicConvParams<U> cast() const {
        BasicConvParams<U> out;
        out.kh = kh;
        out.kw = kw;
        out.c_in = c_in;
        out.c_out = c_out;
        out.stride = stride;
        out.padding = padding;
        out.kernel.assign(kernel.begin(), kernel.end());
        out.bias.assign(bias.begin(), bias.end());
        return out;
    }
};

using ConvParams = BasicConvParams<float>;
using ConvParamsD = BasicConvParams<double>;

template <typename T>
struct ConvGrads {
    BasicTensor<T> input;
    std::vector<T> kernel;
    std::vector<T> bias;
};

/// Cross-correlation with zero padding plus bias. Each output accumulates over
/// (ky, kx, c_in) in ascending order.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicConvParams<T>& params);
template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvParams<T>& params,
                             const BasicTensor<T>& grad_out);

/// Fractionally strided convolution, the adjoint of conv2d_forward with the same
/// geometry: out(y*s - p + ky, x*s - p + kx, co) += in(y, x, ci) * w(ky, kx, ci, co).
/// Output size per axis is (n - 1) * stride - 2 * padding + k.
template <typename T>
BasicTensor<T> conv_transpose2d_forward(const BasicTensor<T>& input, const BasicConvParams<T>& params);
template <typename T>
ConvGrads<T> conv_transpose2d_backward(const BasicTensor<T>& input, const BasicConvParams<T>& params,
                                       const BasicTensor<T>& grad_out);
Shape conv_transpose_output_shape(Shape input, int kh, int kw, int stride, int padding);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& t);
/// Passes grad_out where input > 0; zero elsewhere (subgradient 0 at 0).
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

/// Numerically stable logistic function. Results are kept inside the open
/// interval (0, 1): saturated logits map to the nearest representable interior value.
template <typename T>
T sigmoid(T x);
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& t);

/// out(y*r + dy, x*r + dx, c) = in(y, x, c*r*r + dy*r + dx)
template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& t, int r);
template <typename T>
BasicTensor<T> pixel_shuffle_inverse(const BasicTensor<T>& t, int r);
/// Adjoint of pixel_shuffle; the shuffle is a permutation, so this is its inverse.
template <typename T>
BasicTensor<T> pixel_shuffle_backward(const BasicTensor<T>& grad_out, int r);

/// Fixed 2x bilinear upsampling with half-pixel centres and clamped borders.
template <typename T>
BasicTensor<T> upsample_bilinear2x(const BasicTensor<T>& t);
template <typename T>
BasicTensor<T> upsample_bilinear2x_backward(const BasicTensor<T>& grad_out, Shape input_shape);

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);
/// Splits into channels [0, first) and [first, C).
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& t, int first);

// Finite-difference checking

/// Scalar objective over a flat parameter vector. Returns the value and, when
/// `grad` is non-null, writes the analytic gradient into it.
using ScalarObjective = std::function<double(std::span<const double> x, std::vector<double>* grad)>;

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // coordinates rejected by the kink test
};

/// Central-difference comparison of the analytic gradient of `f` at `point`.
/// The relative error of a coordinate is |a - n| / max(|a|, |n|, 1e-8); the
/// maximum over checked coordinates is returned. Coordinates for which `mask`
/// returns false are skipped. `max_coords` > 0 checks an evenly strided subset.
///
/// With `kink_tolerance` > 0 a coordinate is skipped when its numeric
/// derivative is unstable: the forward and backward one-sided differences, or
/// the central differences at eps and eps / 2, disagree by more than that
/// relative amount. Either happens when [x - eps, x + eps] straddles a ReLU
/// kink, or when the derivative is so small that rounding in f dominates.
GradCheckResult grad_check(const ScalarObjective& f, std::span<const double> point, double eps,
                           const std::function<bool(std::size_t)>& mask = {},
                           std::size_t max_coords = 0, double kink_tolerance = 0.0);

}  // namespace ced
