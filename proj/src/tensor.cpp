#include "ced/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ced {

std::string Shape::str() const {
    std::ostringstream os;
    os << height << "x" << width << "x" << channels;
    return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(int height, int width, int channels, T fill)
    : h_(height), w_(width), c_(channels) {
    if (height < 1 || width < 1 || channels < 1) {
        throw ShapeError("tensor dimensions must be >= 1, got " + Shape{height, width, channels}.str());
    }
    data_.assign(shape().size(), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(int height, int width, int channels, std::vector<T> data)
    : h_(height), w_(width), c_(channels), data_(std::move(data)) {
    if (height < 1 || width < 1 || channels < 1) {
        throw ShapeError("tensor dimensions must be >= 1, got " + Shape{height, width, channels}.str());
    }
    if (data_.size() != shape().size()) {
        throw ShapeError("tensor " + shape().str() + " needs " + std::to_string(shape().size()) +
                         " values, got " + std::to_string(data_.size()));
    }
}

template <typename T>
BasicConvParams<T>::BasicConvParams(int kh_, int kw_, int c_in_, int c_out_, int stride_, int padding_)
    : kh(kh_), kw(kw_), c_in(c_in_), c_out(c_out_), stride(stride_), padding(padding_) {
    if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0) {
        throw ShapeError("kernel size must be odd, got " + std::to_string(kh) + "x" + std::to_string(kw));
    }
    if (c_in < 1 || c_out < 1) throw ShapeError("convolution channels must be >= 1");
    if (stride < 1) throw ShapeError("stride must be positive");
    if (padding < 0) throw ShapeError("padding must be non-negative");
    kernel.assign(static_cast<std::size_t>(kh) * kw * c_in * c_out, T(0));
    bias.assign(static_cast<std::size_t>(c_out), T(0));
}

template <typename T>
Shape BasicConvParams<T>::output_shape(Shape input) const {
    const int oh = (input.height + 2 * padding - kh) / stride + 1;
    const int ow = (input.width + 2 * padding - kw) / stride + 1;
    if (input.height + 2 * padding < kh || input.width + 2 * padding < kw || oh < 1 || ow < 1) {
        throw ShapeError("input " + input.str() + " too small for " + std::to_string(kh) + "x" +
                         std::to_string(kw) + " kernel with padding " + std::to_string(padding));
    }
    return {oh, ow, c_out};
}

namespace {

template <typename T>
void check_conv_input(const BasicTensor<T>& input, const BasicConvParams<T>& p) {
    if (input.channels() != p.c_in) {
        throw ShapeError("convolution expects " + std::to_string(p.c_in) + " input channels, input is " +
                         input.shape().str());
    }
    if (p.kernel.size() != static_cast<std::size_t>(p.kh) * p.kw * p.c_in * p.c_out ||
        p.bias.size() != static_cast<std::size_t>(p.c_out)) {
        throw ShapeError("convolution parameter arrays do not match declared kernel shape");
    }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicConvParams<T>& p) {
    check_conv_input(input, p);
    const Shape os = p.output_shape(input.shape());
    BasicTensor<T> out(os);
    const int H = input.height(), W = input.width(), C = p.c_in, K = p.c_out;
    const T* in = input.data().data();
    const T* wt = p.kernel.data();
    std::vector<T> acc(static_cast<std::size_t>(K));
    for (int oy = 0; oy < os.height; ++oy) {
        for (int ox = 0; ox < os.width; ++ox) {
            std::fill(acc.begin(), acc.end(), T(0));
            for (int ky = 0; ky < p.kh; ++ky) {
                const int iy = oy * p.stride - p.padding + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < p.kw; ++kx) {
                    const int ix = ox * p.stride - p.padding + kx;
                    if (ix < 0 || ix >= W) continue;
                    const T* src = in + (static_cast<std::size_t>(iy) * W + ix) * C;
                    const T* wk = wt + p.weight_index(ky, kx, 0, 0);
                    for (int ci = 0; ci < C; ++ci) {
                        const T v = src[ci];
                        if (v == T(0)) continue;
                        const T* wrow = wk + static_cast<std::size_t>(ci) * K;
                        for (int co = 0; co < K; ++co) acc[co] += v * wrow[co];
                    }
                }
            }
            T* dst = out.ptr(oy, ox, 0);
            for (int co = 0; co < K; ++co) dst[co] = acc[co] + p.bias[co];
        }
    }
    return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvParams<T>& p,
                             const BasicTensor<T>& grad_out) {
    check_conv_input(input, p);
    const Shape os = p.output_shape(input.shape());
    if (grad_out.shape() != os) {
        throw ShapeError("conv2d_backward: grad_out is " + grad_out.shape().str() + ", expected " + os.str());
    }
    ConvGrads<T> g{BasicTensor<T>(input.shape()), std::vector<T>(p.kernel.size(), T(0)),
                   std::vector<T>(p.bias.size(), T(0))};
    const int H = input.height(), W = input.width(), C = p.c_in, K = p.c_out;
    const T* in = input.data().data();
    T* gin = g.input.data().data();
    for (int oy = 0; oy < os.height; ++oy) {
        for (int ox = 0; ox < os.width; ++ox) {
            const T* go = grad_out.ptr(oy, ox, 0);
            for (int co = 0; co < K; ++co) g.bias[co] += go[co];
            for (int ky = 0; ky < p.kh; ++ky) {
                const int iy = oy * p.stride - p.padding + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < p.kw; ++kx) {
                    const int ix = ox * p.stride - p.padding + kx;
                    if (ix < 0 || ix >= W) continue;
                    const std::size_t base = (static_cast<std::size_t>(iy) * W + ix) * C;
                    const std::size_t widx = p.weight_index(ky, kx, 0, 0);
                    for (int ci = 0; ci < C; ++ci) {
                        const T v = in[base + ci];
                        const T* wrow = p.kernel.data() + widx + static_cast<std::size_t>(ci) * K;
                        T* gk = g.kernel.data() + widx + static_cast<std::size_t>(ci) * K;
                        T s = T(0);
                        for (int co = 0; co < K; ++co) {
                            gk[co] += v * go[co];
                            s += wrow[co] * go[co];
                        }
                        gin[base + ci] += s;
                    }
                }
            }
        }
    }
    return g;
}

Shape conv_transpose_output_shape(Shape input, int kh, int kw, int stride, int padding) {
    const int oh = (input.height - 1) * stride - 2 * padding + kh;
    const int ow = (input.width - 1) * stride - 2 * padding + kw;
    if (oh < 1 || ow < 1) throw ShapeError("transposed convolution output would be empty for " + input.str());
    return {oh, ow, 0};
}

namespace {

// Transposed convolutions accept even kernels (4x4 stride 2 is the usual 2x
// upsampler), so they bypass the odd-size check in the constructor.
template <typename T>
void check_transpose_params(const BasicTensor<T>& input, const BasicConvParams<T>& p) {
    if (p.kh < 1 || p.kw < 1 || p.stride < 1 || p.padding < 0) {
        throw ShapeError("invalid transposed convolution geometry");
    }
    check_conv_input(input, p);
}

}  // namespace

template <typename T>
BasicTensor<T> conv_transpose2d_forward(const BasicTensor<T>& input, const BasicConvParams<T>& p) {
    check_transpose_params(input, p);
    Shape os = conv_transpose_output_shape(input.shape(), p.kh, p.kw, p.stride, p.padding);
    os.channels = p.c_out;
    BasicTensor<T> out(os);
    const int C = p.c_in, K = p.c_out;
    for (int y = 0; y < input.height(); ++y) {
        for (int x = 0; x < input.width(); ++x) {
            const T* src = input.ptr(y, x, 0);
            for (int ky = 0; ky < p.kh; ++ky) {
                const int oy = y * p.stride - p.padding + ky;
                if (oy < 0 || oy >= os.height) continue;
                for (int kx = 0; kx < p.kw; ++kx) {
                    const int ox = x * p.stride - p.padding + kx;
                    if (ox < 0 || ox >= os.width) continue;
                    T* dst = out.ptr(oy, ox, 0);
                    const T* wk = p.kernel.data() + p.weight_index(ky, kx, 0, 0);
                    for (int ci = 0; ci < C; ++ci) {
                        const T v = src[ci];
                        if (v == T(0)) continue;
                        const T* wrow = wk + static_cast<std::size_t>(ci) * K;
                        for (int co = 0; co < K; ++co) dst[co] += v * wrow[co];
                    }
                }
            }
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.bias[i % K];
    return out;
}

template <typename T>
ConvGrads<T> conv_transpose2d_backward(const BasicTensor<T>& input, const BasicConvParams<T>& p,
                                       const BasicTensor<T>& grad_out) {
    check_transpose_params(input, p);
    Shape os = conv_transpose_output_shape(input.shape(), p.kh, p.kw, p.stride, p.padding);
    os.channels = p.c_out;
    if (grad_out.shape() != os) {
        throw ShapeError("conv_transpose2d_backward: grad_out is " + grad_out.shape().str() + ", expected " +
                         os.str());
    }
    ConvGrads<T> g{BasicTensor<T>(input.shape()), std::vector<T>(p.kernel.size(), T(0)),
                   std::vector<T>(p.bias.size(), T(0))};
    const int C = p.c_in, K = p.c_out;
    for (std::size_t i = 0; i < grad_out.size(); ++i) g.bias[i % K] += grad_out[i];
    for (int y = 0; y < input.height(); ++y) {
        for (int x = 0; x < input.width(); ++x) {
            const T* src = input.ptr(y, x, 0);
            T* gin = g.input.ptr(y, x, 0);
            for (int ky = 0; ky < p.kh; ++ky) {
                const int oy = y * p.stride - p.padding + ky;
                if (oy < 0 || oy >= os.height) continue;
                for (int kx = 0; kx < p.kw; ++kx) {
                    const int ox = x * p.stride - p.padding + kx;
                    if (ox < 0 || ox >= os.width) continue;
                    const T* go = grad_out.ptr(oy, ox, 0);
                    const std::size_t widx = p.weight_index(ky, kx, 0, 0);
                    for (int ci = 0; ci < C; ++ci) {
                        const T v = src[ci];
                        const T* wrow = p.kernel.data() + widx + static_cast<std::size_t>(ci) * K;
                        T* gk = g.kernel.data() + widx + static_cast<std::size_t>(ci) * K;
                        T s = T(0);
                        for (int co = 0; co < K; ++co) {
                            gk[co] += v * go[co];
                            s += wrow[co] * go[co];
                        }
                        gin[ci] += s;
                    }
                }
            }
        }
    }
    return g;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& t) {
    BasicTensor<T> out = t;
    for (auto& v : out.data()) v = v > T(0) ? v : T(0);
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
    if (input.shape() != grad_out.shape()) {
        throw ShapeError("relu_backward: input " + input.shape().str() + " vs grad " + grad_out.shape().str());
    }
    BasicTensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(input[i] > T(0))) g[i] = T(0);
    }
    return g;
}

template <typename T>
T sigmoid(T x) {
    static constexpr T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
    static constexpr T lo = std::numeric_limits<T>::denorm_min();
    T s;
    if (x >= T(0)) {
        s = T(1) / (T(1) + std::exp(-x));
    } else {
        const T e = std::exp(x);
        s = e / (T(1) + e);
    }
    return std::clamp(s, lo, hi);
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& t) {
    BasicTensor<T> out = t;
    for (auto& v : out.data()) v = sigmoid(v);
    return out;
}

template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& t, int r) {
    if (r < 1) throw ShapeError("pixel_shuffle factor must be >= 1");
    const int rr = r * r;
    if (t.channels() % rr != 0) {
        throw ShapeError("pixel_shuffle: channels of " + t.shape().str() + " not divisible by r^2 = " +
                         std::to_string(rr));
    }
    const int oc = t.channels() / rr;
    BasicTensor<T> out(t.height() * r, t.width() * r, oc);
    for (int y = 0; y < t.height(); ++y)
        for (int x = 0; x < t.width(); ++x)
            for (int c = 0; c < oc; ++c)
                for (int dy = 0; dy < r; ++dy)
                    for (int dx = 0; dx < r; ++dx)
                        out.at(y * r + dy, x * r + dx, c) = t.at(y, x, c * rr + dy * r + dx);
    return out;
}

template <typename T>
BasicTensor<T> pixel_shuffle_inverse(const BasicTensor<T>& t, int r) {
    if (r < 1) throw ShapeError("pixel_shuffle factor must be >= 1");
    if (t.height() % r != 0 || t.width() % r != 0) {
        throw ShapeError("pixel_shuffle_inverse: spatial dims of " + t.shape().str() + " not divisible by " +
                         std::to_string(r));
    }
    const int rr = r * r;
    BasicTensor<T> out(t.height() / r, t.width() / r, t.channels() * rr);
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x)
            for (int c = 0; c < t.channels(); ++c)
                for (int dy = 0; dy < r; ++dy)
                    for (int dx = 0; dx < r; ++dx)
                        out.at(y, x, c * rr + dy * r + dx) = t.at(y * r + dy, x * r + dx, c);
    return out;
}

template <typename T>
BasicTensor<T> pixel_shuffle_backward(const BasicTensor<T>& grad_out, int r) {
    return pixel_shuffle_inverse(grad_out, r);
}

namespace {

// Source taps for output index o of a 2x half-pixel upsample over n samples.
struct Taps {
    int i0, i1;
    double w0, w1;
};

Taps bilinear_taps(int o, int n) {
    const int i = o / 2;
    Taps t{};
    if (o % 2 == 0) {
        t = {i - 1, i, 0.25, 0.75};
    } else {
        t = {i, i + 1, 0.75, 0.25};
    }
    t.i0 = std::clamp(t.i0, 0, n - 1);
    t.i1 = std::clamp(t.i1, 0, n - 1);
    return t;
}

}  // namespace

template <typename T>
BasicTensor<T> upsample_bilinear2x(const BasicTensor<T>& t) {
    BasicTensor<T> out(t.height() * 2, t.width() * 2, t.channels());
    const int C = t.channels();
    for (int oy = 0; oy < out.height(); ++oy) {
        const Taps ty = bilinear_taps(oy, t.height());
        for (int ox = 0; ox < out.width(); ++ox) {
            const Taps tx = bilinear_taps(ox, t.width());
            const T w00 = T(ty.w0 * tx.w0), w01 = T(ty.w0 * tx.w1);
            const T w10 = T(ty.w1 * tx.w0), w11 = T(ty.w1 * tx.w1);
            const T* a = t.ptr(ty.i0, tx.i0, 0);
            const T* b = t.ptr(ty.i0, tx.i1, 0);
            const T* c = t.ptr(ty.i1, tx.i0, 0);
            const T* d = t.ptr(ty.i1, tx.i1, 0);
            T* dst = out.ptr(oy, ox, 0);
            for (int ch = 0; ch < C; ++ch) dst[ch] = w00 * a[ch] + w01 * b[ch] + w10 * c[ch] + w11 * d[ch];
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> upsample_bilinear2x_backward(const BasicTensor<T>& grad_out, Shape input_shape) {
    if (grad_out.height() != 2 * input_shape.height || grad_out.width() != 2 * input_shape.width ||
        grad_out.channels() != input_shape.channels) {
        throw ShapeError("upsample_bilinear2x_backward: grad " + grad_out.shape().str() + " vs input " +
                         input_shape.str());
    }
    BasicTensor<T> g(input_shape);
    const int C = input_shape.channels;
    for (int oy = 0; oy < grad_out.height(); ++oy) {
        const Taps ty = bilinear_taps(oy, input_shape.height);
        for (int ox = 0; ox < grad_out.width(); ++ox) {
            const Taps tx = bilinear_taps(ox, input_shape.width);
            const T w00 = T(ty.w0 * tx.w0), w01 = T(ty.w0 * tx.w1);
            const T w10 = T(ty.w1 * tx.w0), w11 = T(ty.w1 * tx.w1);
            const T* src = grad_out.ptr(oy, ox, 0);
            T* a = g.ptr(ty.i0, tx.i0, 0);
            T* b = g.ptr(ty.i0, tx.i1, 0);
            T* c = g.ptr(ty.i1, tx.i0, 0);
            T* d = g.ptr(ty.i1, tx.i1, 0);
            for (int ch = 0; ch < C; ++ch) {
                a[ch] += w00 * src[ch];
                b[ch] += w01 * src[ch];
                c[ch] += w10 * src[ch];
                d[ch] += w11 * src[ch];
            }
        }
    }
    return g;
}

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.height() != b.height() || a.width() != b.width()) {
        throw ShapeError("concat_channels: spatial mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    BasicTensor<T> out(a.height(), a.width(), a.channels() + b.channels());
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            std::copy_n(a.ptr(y, x, 0), a.channels(), out.ptr(y, x, 0));
            std::copy_n(b.ptr(y, x, 0), b.channels(), out.ptr(y, x, a.channels()));
        }
    return out;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>& t, int first) {
    if (first < 1 || first >= t.channels()) {
        throw ShapeError("split_channels: cannot split " + t.shape().str() + " at " + std::to_string(first));
    }
    BasicTensor<T> a(t.height(), t.width(), first);
    BasicTensor<T> b(t.height(), t.width(), t.channels() - first);
    for (int y = 0; y < t.height(); ++y)
        for (int x = 0; x < t.width(); ++x) {
            std::copy_n(t.ptr(y, x, 0), first, a.ptr(y, x, 0));
            std::copy_n(t.ptr(y, x, first), t.channels() - first, b.ptr(y, x, 0));
        }
    return {std::move(a), std::move(b)};
}

GradCheckResult grad_check(const ScalarObjective& f, std::span<const double> point, double eps,
                           const std::function<bool(std::size_t)>& mask, std::size_t max_coords,
                           double kink_tolerance) {
    if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
    std::vector<double> x(point.begin(), point.end());
    std::vector<double> analytic(x.size(), 0.0);
    const double f0 = f(x, &analytic);
    if (analytic.size() != x.size()) throw std::invalid_argument("grad_check: gradient size mismatch");

    const std::size_t n = x.size();
    const std::size_t step = (max_coords > 0 && n > max_coords) ? (n + max_coords - 1) / max_coords : 1;
    GradCheckResult res;
    for (std::size_t i = 0; i < n; i += step) {
        if (mask && !mask(i)) continue;
        const double orig = x[i];
        x[i] = orig + eps;
        const double fp = f(x, nullptr);
        x[i] = orig - eps;
        const double fm = f(x, nullptr);
        x[i] = orig;
        if (kink_tolerance > 0.0) {
            x[i] = orig + 0.5 * eps;
            const double fph = f(x, nullptr);
            x[i] = orig - 0.5 * eps;
            const double fmh = f(x, nullptr);
            x[i] = orig;
            const double fwd = (fp - f0) / eps, bwd = (f0 - fm) / eps;
            const double cen = (fp - fm) / (2.0 * eps), cen_half = (fph - fmh) / eps;
            const double scale = std::max({std::abs(fwd), std::abs(bwd), 1e-8});
            if (std::abs(fwd - bwd) > kink_tolerance * scale || std::abs(cen - cen_half) > kink_tolerance * scale) {
                ++res.skipped;
                continue;
            }
        }
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        const double err = std::abs(a - numeric) / denom;
        ++res.checked;
        if (err > res.max_relative_error) {
            res.max_relative_error = err;
            res.worst_index = i;
        }
    }
    return res;
}

#define CED_INSTANTIATE(T)                                                                                   \
    template class BasicTensor<T>;                                                                          \
    template struct BasicConvParams<T>;                                                                     \
    template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicConvParams<T>&);               \
    template ConvGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicConvParams<T>&,                 \
                                          const BasicTensor<T>&);                                           \
    template BasicTensor<T> conv_transpose2d_forward(const BasicTensor<T>&, const BasicConvParams<T>&);     \
    template ConvGrads<T> conv_transpose2d_backward(const BasicTensor<T>&, const BasicConvParams<T>&,       \
                                                    const BasicTensor<T>&);                                 \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                    \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template T sigmoid(T);                                                                                  \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                 \
    template BasicTensor<T> pixel_shuffle(const BasicTensor<T>&, int);                                      \
    template BasicTensor<T> pixel_shuffle_inverse(const BasicTensor<T>&, int);                              \
    template BasicTensor<T> pixel_shuffle_backward(const BasicTensor<T>&, int);                             \
    template BasicTensor<T> upsample_bilinear2x(const BasicTensor<T>&);                                     \
    template BasicTensor<T> upsample_bilinear2x_backward(const BasicTensor<T>&, Shape);                     \
    template BasicTensor<T> concat_channels(const BasicTensor<T>&, const BasicTensor<T>&);                  \
    template std::pair<BasicTensor<T>, BasicTensor<T>> split_channels(const BasicTensor<T>&, int);

CED_INSTANTIATE(float)
CED_INSTANTIATE(double)

#undef CED_INSTANTIATE

}  // namespace ced
