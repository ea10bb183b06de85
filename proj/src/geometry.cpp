#include "ced/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace ced {

BinaryMap::BinaryMap(int height, int width) : h_(height), w_(width) {
    if (height < 1 || width < 1) throw ShapeError("binary map dimensions must be >= 1");
    bits_.assign(static_cast<std::size_t>(height) * width, 0);
}

BinaryMap::BinaryMap(int height, int width, std::vector<std::uint8_t> bits)
    : h_(height), w_(width), bits_(std::move(bits)) {
    if (height < 1 || width < 1) throw ShapeError("binary map dimensions must be >= 1");
    if (bits_.size() != static_cast<std::size_t>(height) * width) {
        throw ShapeError("binary map " + std::to_string(height) + "x" + std::to_string(width) + " needs " +
                         std::to_string(height * width) + " values, got " + std::to_string(bits_.size()));
    }
    for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMap::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMap BinaryMap::threshold(const Tensor& t, float threshold) {
    if (t.channels() != 1) throw ShapeError("threshold expects a single-channel map, got " + t.shape().str());
    BinaryMap b(t.height(), t.width());
    for (std::size_t i = 0; i < t.size(); ++i) b.bits_[i] = t[i] >= threshold ? 1 : 0;
    return b;
}

Tensor BinaryMap::to_tensor() const {
    Tensor t(h_, w_, 1);
    for (std::size_t i = 0; i < bits_.size(); ++i) t[i] = bits_[i] ? 1.0f : 0.0f;
    return t;
}

double DistanceField::at(int y, int x) const { return std::sqrt(squared_at(y, x)); }

std::vector<double> DistanceField::values() const {
    std::vector<double> v(squared.size());
    std::transform(squared.begin(), squared.end(), v.begin(), [](double s) { return std::sqrt(s); });
    return v;
}

BinaryMap boundary_from_mask(const BinaryMap& mask) {
    BinaryMap out(mask.height(), mask.width());
    static constexpr std::array<std::array<int, 2>, 4> kN4{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.get(y, x)) continue;
            for (const auto& [dy, dx] : kN4) {
                const int ny = y + dy, nx = x + dx;
                if (!mask.in_bounds(ny, nx) || !mask.get(ny, nx)) {
                    out.set(y, x, true);
                    break;
                }
            }
        }
    }
    return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// d[p] = min_q f[q] + w (p - q)^2 over the finite entries of f (lower envelope
// of parabolas). Entries stay infinite when f has no finite entry.
void lower_envelope_1d(const double* f, double* d, int n, std::ptrdiff_t stride, double w,
                       std::vector<int>& v, std::vector<double>& z) {
    int k = -1;
    for (int q = 0; q < n; ++q) {
        const double fq = f[q * stride];
        if (fq == kInf) continue;
        while (k >= 0) {
            const int p = v[k];
            const double fp = f[p * stride];
            const double s = ((fq + w * q * q) - (fp + w * p * p)) / (2.0 * w * (q - p));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = k == 0 ? -kInf : [&] {
            const int p = v[k - 1];
            const double fp = f[p * stride];
            return ((fq + w * q * q) - (fp + w * p * p)) / (2.0 * w * (q - p));
        }();
        z[k + 1] = kInf;
    }
    if (k < 0) {
        for (int p = 0; p < n; ++p) d[p * stride] = kInf;
        return;
    }
    int j = 0;
    for (int p = 0; p < n; ++p) {
        while (z[j + 1] < p) ++j;
        const int q = v[j];
        const double dq = p - q;
        d[p * stride] = f[q * stride] + w * dq * dq;
    }
}

}  // namespace

DistanceField euclidean_dt(const BinaryMap& src, std::optional<Spacing> anisotropy) {
    if (!src.any()) throw std::invalid_argument("euclidean_dt: source map has no on-pixels");
    const double wy = anisotropy ? anisotropy->row_mm * anisotropy->row_mm : 1.0;
    const double wx = anisotropy ? anisotropy->col_mm * anisotropy->col_mm : 1.0;
    if (anisotropy && !(anisotropy->row_mm > 0.0 && anisotropy->col_mm > 0.0)) {
        throw std::invalid_argument("euclidean_dt: spacing must be positive");
    }
    const int H = src.height(), W = src.width();
    std::vector<double> f(static_cast<std::size_t>(H) * W);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = src[i] ? 0.0 : kInf;

    std::vector<double> tmp(f.size());
    const int n = std::max(H, W);
    std::vector<int> v(static_cast<std::size_t>(n));
    std::vector<double> z(static_cast<std::size_t>(n) + 1);
    for (int x = 0; x < W; ++x) lower_envelope_1d(f.data() + x, tmp.data() + x, H, W, wy, v, z);
    for (int y = 0; y < H; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * W;
        lower_envelope_1d(tmp.data() + row, f.data() + row, W, 1, wx, v, z);
    }
    return DistanceField{H, W, std::move(f), anisotropy};
}

namespace {

// Neighbours P2..P9, clockwise from north.
std::array<int, 8> neighbours(const BinaryMap& b, int y, int x) {
    static constexpr std::array<std::array<int, 2>, 8> kOff{
        {{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};
    std::array<int, 8> p{};
    for (int i = 0; i < 8; ++i) {
        const int ny = y + kOff[i][0], nx = x + kOff[i][1];
        p[i] = b.in_bounds(ny, nx) && b.get(ny, nx) ? 1 : 0;
    }
    return p;
}

// 8-connected component labels; -1 for background.
std::vector<int> label_components(const BinaryMap& b, int& count) {
    std::vector<int> label(b.size(), -1);
    std::vector<std::pair<int, int>> stack;
    count = 0;
    for (int y = 0; y < b.height(); ++y) {
        for (int x = 0; x < b.width(); ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * b.width() + x;
            if (!b[i] || label[i] >= 0) continue;
            label[i] = count;
            stack.emplace_back(y, x);
            while (!stack.empty()) {
                auto [cy, cx] = stack.back();
                stack.pop_back();
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int ny = cy + dy, nx = cx + dx;
                        if (!b.in_bounds(ny, nx) || !b.get(ny, nx)) continue;
                        const std::size_t j = static_cast<std::size_t>(ny) * b.width() + nx;
                        if (label[j] >= 0) continue;
                        label[j] = count;
                        stack.emplace_back(ny, nx);
                    }
            }
            ++count;
        }
    }
    return label;
}

bool zhang_suen_pass(BinaryMap& img, bool first) {
    std::vector<std::pair<int, int>> kill;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (!img.get(y, x)) continue;
            const auto p = neighbours(img, y, x);
            int b = 0, a = 0;
            for (int i = 0; i < 8; ++i) {
                b += p[i];
                if (p[i] == 0 && p[(i + 1) % 8] == 1) ++a;
            }
            if (b < 2 || b > 6 || a != 1) continue;
            // p[0]=P2 (N), p[2]=P4 (E), p[4]=P6 (S), p[6]=P8 (W)
            const bool c1 = first ? (p[0] * p[2] * p[4] == 0) : (p[0] * p[2] * p[6] == 0);
            const bool c2 = first ? (p[2] * p[4] * p[6] == 0) : (p[0] * p[4] * p[6] == 0);
            if (c1 && c2) kill.emplace_back(y, x);
        }
    }
    if (kill.empty()) return false;

    // Parallel deletion can erase a whole 2x2 block; keep one pixel of any
    // component that would vanish so every component survives.
    int ncomp = 0;
    const auto label = label_components(img, ncomp);
    std::vector<int> remaining(static_cast<std::size_t>(ncomp), 0);
    std::vector<std::uint8_t> doomed(img.size(), 0);
    for (auto [y, x] : kill) doomed[static_cast<std::size_t>(y) * img.width() + x] = 1;
    for (std::size_t i = 0; i < img.size(); ++i)
        if (img[i] && !doomed[i]) ++remaining[label[i]];
    std::vector<std::uint8_t> rescued(static_cast<std::size_t>(ncomp), 0);
    bool changed = false;
    for (auto [y, x] : kill) {
        const int c = label[static_cast<std::size_t>(y) * img.width() + x];
        if (remaining[c] == 0 && !rescued[c]) {
            rescued[c] = 1;
            continue;
        }
        img.set(y, x, false);
        changed = true;
    }
    return changed;
}

}  // namespace

BinaryMap thin(const BinaryMap& b) {
    BinaryMap img = b;
    for (;;) {
        const bool a = zhang_suen_pass(img, true);
        const bool c = zhang_suen_pass(img, false);
        if (!a && !c) break;
    }
    return img;
}

BinaryMap skeletonize(const BinaryMap& g) { return thin(g); }

namespace {

double sample_clamped(const Tensor& t, double y, double x) {
    const int H = t.height(), W = t.width();
    y = std::clamp(y, 0.0, static_cast<double>(H - 1));
    x = std::clamp(x, 0.0, static_cast<double>(W - 1));
    const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
    const double fy = y - y0, fx = x - x0;
    return (1 - fy) * ((1 - fx) * t.at(y0, x0) + fx * t.at(y0, x1)) +
           fy * ((1 - fx) * t.at(y1, x0) + fx * t.at(y1, x1));
}

}  // namespace

Tensor nms_edges(const Tensor& prob) {
    if (prob.channels() != 1) throw ShapeError("nms_edges expects a single-channel map, got " + prob.shape().str());
    const int H = prob.height(), W = prob.width();
    auto px = [&](int y, int x) -> double {
        return prob.at(std::clamp(y, 0, H - 1), std::clamp(x, 0, W - 1));
    };
    Tensor out(H, W, 1);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double v = prob.at(y, x);
            if (v <= 0.0) continue;
            const double gx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                              (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
            const double gy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                              (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
            const double mag = std::hypot(gx, gy);
            if (mag < 1e-6) {
                out.at(y, x) = prob.at(y, x);
                continue;
            }
            const double dy = gy / mag, dx = gx / mag;
            const double n1 = sample_clamped(prob, y + dy, x + dx);
            const double n2 = sample_clamped(prob, y - dy, x - dx);
            if (v >= n1 && v >= n2) out.at(y, x) = prob.at(y, x);
        }
    }
    return out;
}

std::vector<BinaryMap> maxpool_pyramid(const BinaryMap& g, int levels) {
    if (levels < 1) throw ShapeError("maxpool_pyramid needs at least one level");
    const int f = 1 << (levels - 1);
    if (g.height() % f != 0 || g.width() % f != 0) {
        throw ShapeError("maxpool_pyramid: " + std::to_string(g.height()) + "x" + std::to_string(g.width()) +
                         " not divisible by " + std::to_string(f));
    }
    std::vector<BinaryMap> out{g};
    for (int l = 1; l < levels; ++l) {
        const BinaryMap& prev = out.back();
        BinaryMap next(prev.height() / 2, prev.width() / 2);
        for (int y = 0; y < next.height(); ++y)
            for (int x = 0; x < next.width(); ++x)
                next.set(y, x,
                         prev.get(2 * y, 2 * x) || prev.get(2 * y, 2 * x + 1) || prev.get(2 * y + 1, 2 * x) ||
                             prev.get(2 * y + 1, 2 * x + 1));
        out.push_back(std::move(next));
    }
    return out;
}

BinaryMap dilate(const BinaryMap& b, int radius) {
    BinaryMap out(b.height(), b.width());
    for (int y = 0; y < b.height(); ++y)
        for (int x = 0; x < b.width(); ++x) {
            if (!b.get(y, x)) continue;
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx)
                    if (b.in_bounds(y + dy, x + dx)) out.set(y + dy, x + dx, true);
        }
    return out;
}

}  // namespace ced
