#include "ced/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ced {

std::string to_string(LocKind k) {
    switch (k) {
        case LocKind::None: return "none";
        case LocKind::DistanceTransform: return "distance_transform";
        case LocKind::SkeletonDice: return "skeleton_dice";
    }
    return "none";
}

LocKind loc_kind_from_string(const std::string& s) {
    if (s == "none") return LocKind::None;
    if (s == "distance_transform") return LocKind::DistanceTransform;
    if (s == "skeleton_dice") return LocKind::SkeletonDice;
    throw std::invalid_argument("unknown loc_kind '" + s + "' (expected none, distance_transform, skeleton_dice)");
}

void LossWeights::validate(std::size_t outputs) const {
    if (alpha.size() != outputs) {
        throw std::invalid_argument("loss: alpha has " + std::to_string(alpha.size()) + " entries, model emits " +
                                    std::to_string(outputs) + " supervised outputs");
    }
    bool positive = false;
    for (double a : alpha) {
        if (!(a >= 0.0)) throw std::invalid_argument("loss: alpha entries must be >= 0");
        positive = positive || a > 0.0;
    }
    if (!positive) throw std::invalid_argument("loss: at least one alpha entry must be > 0");
    if (!(lambda_loc >= 0.0)) throw std::invalid_argument("loss: lambda_loc must be >= 0");
}

const std::vector<double>& GroundTruth::distance() const {
    if (!dt_) {
        if (boundary_.any()) {
            dt_ = euclidean_dt(boundary_).values();
        } else {
            const double diag = std::hypot(static_cast<double>(height()), static_cast<double>(width()));
            dt_ = std::vector<double>(boundary_.size(), diag);
        }
    }
    return *dt_;
}

const BinaryMap& GroundTruth::skeleton() const {
    if (!skeleton_) skeleton_ = skeletonize(boundary_);
    return *skeleton_;
}

const BinaryMap& GroundTruth::level(int level) const {
    if (level < 0) throw std::invalid_argument("ground truth level must be >= 0");
    if (pyramid_.empty()) pyramid_.push_back(boundary_);
    while (static_cast<int>(pyramid_.size()) <= level) {
        const BinaryMap& prev = pyramid_.back();
        if (prev.height() % 2 != 0 || prev.width() % 2 != 0) {
            throw ShapeError("ground truth " + std::to_string(height()) + "x" + std::to_string(width()) +
                             " cannot be pooled to level " + std::to_string(level));
        }
        pyramid_.push_back(maxpool_pyramid(prev, 2)[1]);
    }
    return pyramid_[static_cast<std::size_t>(level)];
}

std::pair<double, double> balanced_weights(const BinaryMap& g) {
    const double omega = static_cast<double>(g.size());
    const double n_pos = static_cast<double>(g.count());
    const double w_pos = (omega - n_pos) / omega;
    return {w_pos, 1.0 - w_pos};
}

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

template <typename T>
void check_single_channel(const BasicTensor<T>& t, int h, int w, const char* what) {
    if (t.channels() != 1 || t.height() != h || t.width() != w) {
        throw ShapeError(std::string(what) + ": prediction " + t.shape().str() + " does not match target " +
                         std::to_string(h) + "x" + std::to_string(w) + "x1");
    }
}

}  // namespace

template <typename T>
LossResult<T> balanced_bce(const BasicTensor<T>& logits, const BinaryMap& g) {
    check_single_channel(logits, g.height(), g.width(), "balanced_bce");
    const auto [w_pos, w_neg] = balanced_weights(g);
    LossResult<T> r{0.0, BasicTensor<T>(logits.shape())};
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = static_cast<double>(logits[i]);
        if (!std::isfinite(z)) throw std::invalid_argument("balanced_bce: non-finite prediction");
        const double p = sigmoid(z);
        if (g[i]) {
            r.loss += w_pos * softplus(-z);
            r.grad[i] = static_cast<T>(w_pos * (p - 1.0));
        } else {
            r.loss += w_neg * softplus(z);
            r.grad[i] = static_cast<T>(w_neg * p);
        }
    }
    return r;
}

DtMetric distance_transform_metric(const Tensor& prob, const GroundTruth& g, double bin_threshold) {
    if (!(bin_threshold > 0.0 && bin_threshold < 1.0)) {
        throw std::invalid_argument("distance_transform_metric: bin_threshold must lie in (0, 1)");
    }
    check_single_channel(prob, g.height(), g.width(), "distance_transform_metric");
    const BinaryMap pred = BinaryMap::threshold(prob, static_cast<float>(bin_threshold));
    const auto& dg = g.distance();
    DtMetric m;
    std::vector<double> dp;
    if (pred.any()) {
        dp = euclidean_dt(pred).values();
    } else {
        m.empty_prediction = true;
        dp.assign(pred.size(), std::hypot(static_cast<double>(g.height()), static_cast<double>(g.width())));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < dp.size(); ++i) sum += std::abs(dg[i] - dp[i]);
    m.value = sum / static_cast<double>(dp.size());
    return m;
}

template <typename T>
LossResult<T> distance_transform_training_loss(const BasicTensor<T>& prob, const GroundTruth& g) {
    check_single_channel(prob, g.height(), g.width(), "distance_transform_training_loss");
    const auto& d = g.distance();
    double mass = 0.0, weighted = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
        mass += prob[i];
        weighted += prob[i] * d[i];
    }
    LossResult<T> r{0.0, BasicTensor<T>(prob.shape())};
    if (mass > 1.0) {
        r.loss = weighted / mass;
        for (std::size_t i = 0; i < prob.size(); ++i) r.grad[i] = static_cast<T>((d[i] - r.loss) / mass);
    } else {
        r.loss = weighted;
        for (std::size_t i = 0; i < prob.size(); ++i) r.grad[i] = static_cast<T>(d[i]);
    }
    return r;
}

template <typename T>
LossResult<T> skeleton_dice_loss(const BasicTensor<T>& prob, const BinaryMap& skeleton) {
    check_single_channel(prob, skeleton.height(), skeleton.width(), "skeleton_dice_loss");
    constexpr double eps = 1.0;
    double inter = 0.0, p2 = 0.0, s = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
        const double p = prob[i];
        const double t = skeleton[i] ? 1.0 : 0.0;
        inter += p * t;
        p2 += p * p;
        s += t;
    }
    const double num = 2.0 * inter + eps;
    const double den = p2 + s + eps;
    LossResult<T> r{1.0 - num / den, BasicTensor<T>(prob.shape())};
    for (std::size_t i = 0; i < prob.size(); ++i) {
        const double t = skeleton[i] ? 1.0 : 0.0;
        r.grad[i] = static_cast<T>(-(2.0 * t * den - num * 2.0 * prob[i]) / (den * den));
    }
    return r;
}

template <typename T>
TotalLoss<T> total_loss(const std::vector<BasicTensor<T>>& logits, const GroundTruth& g, const LossWeights& w) {
    w.validate(logits.size());
    TotalLoss<T> out;
    for (std::size_t s = 0; s < logits.size(); ++s) {
        const auto& z = logits[s];
        if (z.height() < 1 || g.height() % z.height() != 0 || g.width() % z.width() != 0 ||
            g.height() / z.height() != g.width() / z.width()) {
            throw ShapeError("total_loss: output " + z.shape().str() + " is not a power-of-two reduction of " +
                             std::to_string(g.height()) + "x" + std::to_string(g.width()));
        }
        int level = 0;
        for (int f = g.height() / z.height(); f > 1; f /= 2) {
            if (f % 2 != 0) throw ShapeError("total_loss: output scale is not a power of two");
            ++level;
        }
        BasicTensor<T> grad(z.shape());
        if (w.alpha[s] > 0.0) {
            auto bce = balanced_bce(z, g.level(level));
            out.loss += w.alpha[s] * bce.loss;
            out.terms.push_back(w.alpha[s] * bce.loss);
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = static_cast<T>(w.alpha[s] * bce.grad[i]);
        } else {
            out.terms.push_back(0.0);
        }
        out.grads.push_back(std::move(grad));
    }

    if (w.lambda_loc > 0.0 && w.loc_kind != LocKind::None) {
        const auto& z = logits.back();
        if (z.height() != g.height() || z.width() != g.width()) {
            throw ShapeError("total_loss: localisation term needs a full-resolution final output");
        }
        const BasicTensor<T> p = sigmoid(z);
        LossResult<T> loc = w.loc_kind == LocKind::DistanceTransform ? distance_transform_training_loss(p, g)
                                                                      : skeleton_dice_loss(p, g.skeleton());
        out.loss += w.lambda_loc * loc.loss;
        out.terms.push_back(w.lambda_loc * loc.loss);
        auto& grad = out.grads.back();
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const double pi = p[i];
            grad[i] += static_cast<T>(w.lambda_loc * loc.grad[i] * pi * (1.0 - pi));
        }
    } else {
        out.terms.push_back(0.0);
    }
    return out;
}

#define CED_INSTANTIATE(T)                                                                                  \
    template LossResult<T> balanced_bce(const BasicTensor<T>&, const BinaryMap&);                          \
    template LossResult<T> distance_transform_training_loss(const BasicTensor<T>&, const GroundTruth&);    \
    template LossResult<T> skeleton_dice_loss(const BasicTensor<T>&, const BinaryMap&);                    \
    template TotalLoss<T> total_loss(const std::vector<BasicTensor<T>>&, const GroundTruth&, const LossWeights&);

CED_INSTANTIATE(float)
CED_INSTANTIATE(double)

#undef CED_INSTANTIATE

}  // namespace ced
