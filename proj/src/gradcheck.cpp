#include "ced/gradcheck.hpp"

#include <cmath>

#include "ced/geometry.hpp"
#include "ced/io.hpp"
#include "ced/losses.hpp"
#include "ced/random.hpp"

namespace ced {

namespace {

TensorD random_tensor(Rng& rng, int h, int w, int c, double lo = -1.0, double hi = 1.0) {
    TensorD t(h, w, c);
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

void randomize(ConvParamsD& p, Rng& rng) {
    for (auto& v : p.kernel) v = rng.uniform(-1.0, 1.0);
    for (auto& v : p.bias) v = rng.uniform(-1.0, 1.0);
}

BinaryMap random_map(Rng& rng, int h, int w, double p) {
    BinaryMap b(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) b.set(y, x, rng.uniform() < p);
    if (!b.any()) b.set(h / 2, w / 2, true);
    return b;
}

double dot(const TensorD& a, const TensorD& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> concat(std::initializer_list<std::span<const double>> parts) {
    std::vector<double> out;
    for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

// Objective <w, op(x, params)> over the concatenation of input and parameters.
GradcheckCase conv_case(const std::string& name, Rng& rng, TensorD x, ConvParamsD p, bool transposed) {
    randomize(p, rng);
    Shape out_shape = p.output_shape(x.shape());
    if (transposed) {
        out_shape = conv_transpose_output_shape(x.shape(), p.kh, p.kw, p.stride, p.padding);
        out_shape.channels = p.c_out;
    }
    const TensorD w = random_tensor(rng, out_shape.height, out_shape.width, out_shape.channels);
    const std::size_t nx = x.size(), nk = p.kernel.size();
    ScalarObjective f = [&](std::span<const double> v, std::vector<double>* g) {
        TensorD xi = x;
        ConvParamsD pi = p;
        std::copy_n(v.begin(), nx, xi.data().begin());
        std::copy_n(v.begin() + nx, nk, pi.kernel.begin());
        std::copy(v.begin() + nx + nk, v.end(), pi.bias.begin());
        const TensorD y = transposed ? conv_transpose2d_forward(xi, pi) : conv2d_forward(xi, pi);
        if (g) {
            const auto cg = transposed ? conv_transpose2d_backward(xi, pi, w) : conv2d_backward(xi, pi, w);
            *g = concat({cg.input.data(), cg.kernel, cg.bias});
        }
        return dot(y, w);
    };
    const auto point = concat({x.data(), p.kernel, p.bias});
    return {name, grad_check(f, point, 1e-3), 1e-3};
}

template <typename Fwd, typename Bwd>
GradcheckCase unary_case(const std::string& name, const TensorD& x, Shape out_shape, Rng& rng, Fwd fwd, Bwd bwd,
                         const std::function<bool(std::size_t)>& mask = {}) {
    const TensorD w = random_tensor(rng, out_shape.height, out_shape.width, out_shape.channels);
    ScalarObjective f = [&](std::span<const double> v, std::vector<double>* g) {
        TensorD xi = x;
        std::copy(v.begin(), v.end(), xi.data().begin());
        if (g) {
            const TensorD gi = bwd(xi, w);
            g->assign(gi.data().begin(), gi.data().end());
        }
        return dot(fwd(xi), w);
    };
    const std::vector<double> point(x.data().begin(), x.data().end());
    return {name, grad_check(f, point, 1e-3, mask), 1e-3};
}

template <typename Loss>
GradcheckCase loss_case(const std::string& name, const TensorD& x, Loss loss) {
    ScalarObjective f = [&](std::span<const double> v, std::vector<double>* g) {
        TensorD xi = x;
        std::copy(v.begin(), v.end(), xi.data().begin());
        auto r = loss(xi);
        if (g) g->assign(r.grad.data().begin(), r.grad.data().end());
        return r.loss;
    };
    const std::vector<double> point(x.data().begin(), x.data().end());
    return {name, grad_check(f, point, 1e-3), 1e-3};
}

}  // namespace

std::vector<GradcheckCase> op_gradcheck_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradcheckCase> out;

    out.push_back(conv_case("conv2d 3x3", rng, random_tensor(rng, 5, 5, 2), ConvParamsD::same(3, 2, 3), false));
    out.push_back(conv_case("conv2d 3x3 stride 2", rng, random_tensor(rng, 6, 6, 2),
                            ConvParamsD(3, 3, 2, 3, 2, 1), false));
    out.push_back(conv_case("conv2d 1x1", rng, random_tensor(rng, 4, 4, 3), ConvParamsD::same(1, 3, 2), false));
    out.push_back(conv_case("conv_transpose2d 4x4 stride 2", rng, random_tensor(rng, 3, 3, 2),
                            ConvParamsD::transposed(4, 2, 3, 2, 1), true));

    {
        const TensorD x = random_tensor(rng, 3, 3, 8);
        out.push_back(unary_case(
            "pixel_shuffle", x, {6, 6, 2}, rng, [](const TensorD& t) { return pixel_shuffle(t, 2); },
            [](const TensorD&, const TensorD& g) { return pixel_shuffle_backward(g, 2); }));
    }
    {
        const TensorD x = random_tensor(rng, 3, 4, 2);
        out.push_back(unary_case(
            "upsample_bilinear2x", x, {6, 8, 2}, rng, [](const TensorD& t) { return upsample_bilinear2x(t); },
            [&](const TensorD&, const TensorD& g) { return upsample_bilinear2x_backward(g, x.shape()); }));
    }
    {
        const TensorD x = random_tensor(rng, 4, 4, 3);
        out.push_back(unary_case(
            "relu", x, x.shape(), rng, [](const TensorD& t) { return relu(t); },
            [](const TensorD& xi, const TensorD& g) { return relu_backward(xi, g); },
            [&](std::size_t i) { return std::abs(x[i]) > 1e-2; }));
    }

    const BinaryMap g = random_map(rng, 6, 7, 0.3);
    const GroundTruth gt(g);
    out.push_back(loss_case("balanced_bce (logits)", random_tensor(rng, 6, 7, 1, -3.0, 3.0),
                            [&](const TensorD& z) { return balanced_bce(z, g); }));
    out.push_back(loss_case("distance_transform_training_loss", random_tensor(rng, 6, 7, 1, 0.05, 0.95),
                            [&](const TensorD& p) { return distance_transform_training_loss(p, gt); }));
    out.push_back(loss_case("skeleton_dice_loss", random_tensor(rng, 6, 7, 1, 0.05, 0.95),
                            [&](const TensorD& p) { return skeleton_dice_loss(p, gt.skeleton()); }));

    for (UpsampleKind kind : {UpsampleKind::SubPixel, UpsampleKind::Bilinear, UpsampleKind::Transposed}) {
        ModelConfig cfg;
        cfg.channels = {3, 4};
        cfg.supervised = {true, true};
        cfg.k_u = cfg.k_c = cfg.k_m = cfg.k_o = 3;
        cfg.upsample = kind;
        ModelD m = ModelD::build(cfg);
        auto stage = m.stages.at(0);
        for (auto* p : {&stage.conv_u, &stage.conv_c, &stage.conv_merge, &stage.conv_up}) randomize(*p, rng);
        const TensorD u = random_tensor(rng, 3, 3, 4, 0.0, 1.0), c = random_tensor(rng, 3, 3, 4, 0.0, 1.0);
        const Shape out_shape = refine_forward(u, c, stage).shape();
        const TensorD w = random_tensor(rng, out_shape.height, out_shape.width, out_shape.channels);
        auto params = [](auto& s) {
            return std::vector<decltype(&s.conv_u)>{&s.conv_u, &s.conv_c, &s.conv_merge, &s.conv_up};
        };
        ScalarObjective f = [&](std::span<const double> v, std::vector<double>* grad) {
            TensorD ui = u, ci = c;
            auto si = stage;
            auto it = v.begin();
            std::copy_n(it, u.size(), ui.data().begin());
            it += static_cast<std::ptrdiff_t>(u.size());
            std::copy_n(it, c.size(), ci.data().begin());
            it += static_cast<std::ptrdiff_t>(c.size());
            for (auto* p : params(si)) {
                std::copy_n(it, p->kernel.size(), p->kernel.begin());
                it += static_cast<std::ptrdiff_t>(p->kernel.size());
                std::copy_n(it, p->bias.size(), p->bias.begin());
                it += static_cast<std::ptrdiff_t>(p->bias.size());
            }
            StageTrace<double> tr;
            const TensorD y = refine_forward(ui, ci, si, &tr);
            if (grad) {
                auto sg = refine_backward(tr, si, w);
                *grad = concat({sg.u.data(), sg.c.data()});
                for (auto* p : params(sg.params)) {
                    grad->insert(grad->end(), p->kernel.begin(), p->kernel.end());
                    grad->insert(grad->end(), p->bias.begin(), p->bias.end());
                }
            }
            return dot(y, w);
        };
        std::vector<double> point = concat({u.data(), c.data()});
        for (auto* p : params(stage)) {
            point.insert(point.end(), p->kernel.begin(), p->kernel.end());
            point.insert(point.end(), p->bias.begin(), p->bias.end());
        }
        // A piecewise-linear map: a small step rarely crosses a ReLU kink, and
        // the kink test drops the coordinates where it does.
        out.push_back({"refinement stage (" + to_string(kind) + ")", grad_check(f, point, 1e-5, {}, 0, 1e-2), 1e-3});
    }
    return out;
}

GradcheckCase full_model_gradcheck(std::uint64_t seed, const FullModelCheckOptions& opt) {
    ModelConfig cfg;
    cfg.channels = opt.channels;
    cfg.supervised.assign(opt.channels.size(), true);
    cfg.k_u = cfg.k_c = cfg.k_m = cfg.k_o = opt.width;
    cfg.upsample = opt.upsample;
    cfg.validate();

    Model init = Model::build(cfg);
    he_init(init, seed);
    ModelD model = init.cast<double>();
    Rng rng(seed ^ 0x5bd1e995ULL);
    for (auto& [name, p] : model.parameters())
        for (auto& b : p->bias) b = rng.uniform(-0.1, 0.1);

    auto [image, mask] = render_synthetic(opt.size, seed, 0.04);
    const TensorD x = image.cast<double>();
    const GroundTruth gt(boundary_from_mask(mask));
    LossWeights w;
    w.alpha.assign(cfg.num_outputs(), 1.0);
    w.lambda_loc = opt.lambda_loc;
    w.loc_kind = opt.loc_kind;

    ScalarObjective f = [&](std::span<const double> v, std::vector<double>* grad) {
        ModelD m = model;
        m.unflatten(v);
        const auto fr = ced_forward(x, m);
        auto tl = total_loss(fr.trace.logits, gt, w);
        if (grad) *grad = ced_backward(m, fr.trace, tl.grads).flatten();
        return tl.loss;
    };
    const auto point = model.flatten();
    GradcheckCase c;
    c.name = "full model (" + to_string(opt.upsample) + ", " + to_string(opt.loc_kind) + ", seed " +
             std::to_string(seed) + ")";
    c.tolerance = opt.tolerance;
    c.result = grad_check(f, point, opt.eps, {}, 0, opt.kink_tolerance);
    const double total = static_cast<double>(c.result.checked + c.result.skipped);
    if (static_cast<double>(c.result.skipped) > opt.max_skipped_fraction * total) {
        c.result.checked = 0;  // too few usable coordinates: report as a failure
    }
    return c;
}

}  // namespace ced
