#include "ced/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "ced/random.hpp"

namespace ced {

std::string to_string(UpsampleKind k) {
    switch (k) {
        case UpsampleKind::SubPixel: return "subpixel";
        case UpsampleKind::Bilinear: return "bilinear";
        case UpsampleKind::Transposed: return "transposed";
    }
    return "subpixel";
}

UpsampleKind upsample_kind_from_string(const std::string& s) {
    if (s == "subpixel") return UpsampleKind::SubPixel;
    if (s == "bilinear") return UpsampleKind::Bilinear;
    if (s == "transposed") return UpsampleKind::Transposed;
    throw std::invalid_argument("unknown upsample kind '" + s + "' (expected subpixel, bilinear, transposed)");
}

std::size_t ModelConfig::num_outputs() const {
    std::size_t n = 1;
    for (bool s : supervised) n += s ? 1 : 0;
    return n;
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("model: " + m); };
    if (levels() < 2) fail("at least two encoder stages are required");
    if (levels() > 8) fail("at most eight encoder stages are supported");
    if (in_channels < 1) fail("in_channels must be >= 1");
    for (int k : channels)
        if (k < 1) fail("encoder channel widths must be >= 1");
    if (k_u < 1 || k_c < 1 || k_m < 1 || k_o < 1) fail("bottleneck widths must be >= 1");
    if (proj_kernel < 1 || proj_kernel % 2 == 0) fail("proj_kernel must be odd");
    if (up_kernel < 1 || up_kernel % 2 == 0) fail("up_kernel must be odd");
    if (r != 2) fail("upsampling factor r must be 2 (each encoder stage halves the resolution)");
    if (supervised.size() != channels.size()) fail("supervised mask needs one entry per encoder stage");
}

namespace {

template <typename T>
BasicConvParams<T> upsampler(const ModelConfig& cfg) {
    switch (cfg.upsample) {
        case UpsampleKind::SubPixel:
            return BasicConvParams<T>::same(cfg.up_kernel, cfg.k_m, cfg.k_o * cfg.r * cfg.r);
        case UpsampleKind::Bilinear:
            return BasicConvParams<T>::same(cfg.up_kernel, cfg.k_m, cfg.k_o);
        case UpsampleKind::Transposed:
            return BasicConvParams<T>::transposed(2 * cfg.r, cfg.k_m, cfg.k_o, cfg.r, cfg.r / 2);
    }
    throw std::invalid_argument("unknown upsample kind");
}

// Channel count of U_l.
int top_channels(const ModelConfig& cfg, int level) {
    return level == cfg.levels() ? cfg.channels.back() : cfg.k_o;
}

}  // namespace

template <typename T>
BasicModel<T> BasicModel<T>::build(const ModelConfig& cfg) {
    cfg.validate();
    BasicModel<T> m;
    m.config = cfg;
    const int L = cfg.levels();
    int prev = cfg.in_channels;
    for (int l = 1; l <= L; ++l) {
        const int k = cfg.channels[l - 1];
        BasicEncoderStage<T> e;
        e.conv_a = BasicConvParams<T>::same(3, prev, k);
        e.conv_b = BasicConvParams<T>(3, 3, k, k, l == 1 ? 1 : 2, 1);
        m.encoder.push_back(std::move(e));
        prev = k;
    }
    for (int l = L; l >= 2; --l) {
        BasicRefinementStage<T> s;
        s.level = l;
        s.r = cfg.r;
        s.upsample = cfg.upsample;
        const int ku_in = top_channels(cfg, l);
        const int kc_in = cfg.channels[l - 1];
        const int ku = std::min(cfg.k_u, ku_in);
        const int kc = std::min(cfg.k_c, kc_in);
        s.conv_u = BasicConvParams<T>::same(cfg.proj_kernel, ku_in, ku);
        s.conv_c = BasicConvParams<T>::same(cfg.proj_kernel, kc_in, kc);
        s.conv_merge = BasicConvParams<T>::same(3, ku + kc, cfg.k_m);
        s.conv_up = upsampler<T>(cfg);
        m.stages.push_back(std::move(s));
    }
    for (int l = L; l >= 1; --l) {
        if (!cfg.supervised[l - 1]) continue;
        m.heads.push_back(BasicConvParams<T>::same(1, top_channels(cfg, l), 1));
        m.head_levels.push_back(l);
    }
    m.final_head = BasicConvParams<T>::same(1, top_channels(cfg, 1), 1);
    return m;
}

template <typename T>
std::vector<std::pair<std::string, BasicConvParams<T>*>> BasicModel<T>::parameters() {
    std::vector<std::pair<std::string, BasicConvParams<T>*>> out;
    for (std::size_t i = 0; i < encoder.size(); ++i) {
        const std::string p = "encoder[" + std::to_string(i) + "].";
        out.emplace_back(p + "conv_a", &encoder[i].conv_a);
        out.emplace_back(p + "conv_b", &encoder[i].conv_b);
    }
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string p = "stages[" + std::to_string(i) + "].";
        out.emplace_back(p + "conv_u", &stages[i].conv_u);
        out.emplace_back(p + "conv_c", &stages[i].conv_c);
        out.emplace_back(p + "conv_merge", &stages[i].conv_merge);
        out.emplace_back(p + "conv_up", &stages[i].conv_up);
    }
    for (std::size_t i = 0; i < heads.size(); ++i) out.emplace_back("heads[" + std::to_string(i) + "]", &heads[i]);
    out.emplace_back("final_head", &final_head);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, const BasicConvParams<T>*>> BasicModel<T>::parameters() const {
    auto mut = const_cast<BasicModel<T>*>(this)->parameters();
    std::vector<std::pair<std::string, const BasicConvParams<T>*>> out;
    out.reserve(mut.size());
    for (auto& [n, p] : mut) out.emplace_back(std::move(n), p);
    return out;
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : parameters()) n += p->kernel.size() + p->bias.size();
    return n;
}

template <typename T>
std::vector<T> BasicModel<T>::flatten() const {
    std::vector<T> out;
    out.reserve(parameter_count());
    for (const auto& [name, p] : parameters()) {
        out.insert(out.end(), p->kernel.begin(), p->kernel.end());
        out.insert(out.end(), p->bias.begin(), p->bias.end());
    }
    return out;
}

template <typename T>
void BasicModel<T>::unflatten(std::span<const T> values) {
    if (values.size() != parameter_count()) {
        throw std::invalid_argument("unflatten: expected " + std::to_string(parameter_count()) + " values, got " +
                                    std::to_string(values.size()));
    }
    std::size_t off = 0;
    for (auto& [name, p] : parameters()) {
        std::copy_n(values.begin() + off, p->kernel.size(), p->kernel.begin());
        off += p->kernel.size();
        std::copy_n(values.begin() + off, p->bias.size(), p->bias.begin());
        off += p->bias.size();
    }
}

template <typename T>
template <typename U>
BasicModel<U> BasicModel<T>::cast() const {
    BasicModel<U> m = BasicModel<U>::build(config);
    const auto src = flatten();
    std::vector<U> conv(src.begin(), src.end());
    m.unflatten(conv);
    return m;
}

template <typename T>
std::vector<BasicTensor<T>> encoder_forward(const BasicTensor<T>& image, const BasicModel<T>& model,
                                            std::vector<EncoderTrace<T>>* trace) {
    const auto& cfg = model.config;
    const int mult = cfg.size_multiple();
    if (image.height() % mult != 0 || image.width() % mult != 0) {
        throw ShapeError("encoder: input " + image.shape().str() + " must have height and width divisible by " +
                         std::to_string(mult));
    }
    if (image.channels() != cfg.in_channels) {
        throw ShapeError("encoder: input " + image.shape().str() + " but model expects " +
                         std::to_string(cfg.in_channels) + " channels");
    }
    std::vector<BasicTensor<T>> features;
    features.reserve(model.encoder.size());
    const BasicTensor<T>* x = &image;
    for (const auto& stage : model.encoder) {
        EncoderTrace<T> t;
        t.pre_a = conv2d_forward(*x, stage.conv_a);
        t.a = relu(t.pre_a);
        t.pre_b = conv2d_forward(t.a, stage.conv_b);
        features.push_back(relu(t.pre_b));
        if (trace) {
            t.input = *x;
            trace->push_back(std::move(t));
        }
        x = &features.back();
    }
    return features;
}

template <typename T>
BasicTensor<T> refine_forward(const BasicTensor<T>& u, const BasicTensor<T>& c, const BasicRefinementStage<T>& s,
                              StageTrace<T>* trace) {
    if (u.height() != c.height() || u.width() != c.width()) {
        throw ShapeError("refine: top-down input " + u.shape().str() + " and lateral input " + c.shape().str() +
                         " differ in spatial size");
    }
    StageTrace<T> t;
    t.pre_u = conv2d_forward(u, s.conv_u);
    t.pre_c = conv2d_forward(c, s.conv_c);
    t.merged_in = concat_channels(relu(t.pre_u), relu(t.pre_c));
    t.pre_m = conv2d_forward(t.merged_in, s.conv_merge);
    t.m = relu(t.pre_m);
    switch (s.upsample) {
        case UpsampleKind::SubPixel:
            t.up = conv2d_forward(t.m, s.conv_up);
            t.pre_out = pixel_shuffle(t.up, s.r);
            break;
        case UpsampleKind::Bilinear:
            t.up = conv2d_forward(t.m, s.conv_up);
            t.pre_out = upsample_bilinear2x(t.up);
            break;
        case UpsampleKind::Transposed:
            t.pre_out = conv_transpose2d_forward(t.m, s.conv_up);
            break;
    }
    BasicTensor<T> out = relu(t.pre_out);
    if (trace) {
        t.u = u;
        t.c = c;
        *trace = std::move(t);
    }
    return out;
}

namespace {

template <typename T>
void accumulate(BasicTensor<T>& into, const BasicTensor<T>& g) {
    if (into.empty()) {
        into = g;
        return;
    }
    if (into.shape() != g.shape()) throw ShapeError("gradient accumulation shape mismatch");
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

template <typename T>
void store(BasicConvParams<T>& into, const ConvGrads<T>& g) {
    into.kernel = g.kernel;
    into.bias = g.bias;
}

}  // namespace

template <typename T>
StageGrads<T> refine_backward(const StageTrace<T>& t, const BasicRefinementStage<T>& s,
                              const BasicTensor<T>& grad_out) {
    StageGrads<T> g;
    g.params = s;
    BasicTensor<T> g_pre_out = relu_backward(t.pre_out, grad_out);
    BasicTensor<T> g_m;
    switch (s.upsample) {
        case UpsampleKind::SubPixel: {
            const auto g_up = pixel_shuffle_backward(g_pre_out, s.r);
            auto cg = conv2d_backward(t.m, s.conv_up, g_up);
            store(g.params.conv_up, cg);
            g_m = std::move(cg.input);
            break;
        }
        case UpsampleKind::Bilinear: {
            const auto g_up = upsample_bilinear2x_backward(g_pre_out, t.up.shape());
            auto cg = conv2d_backward(t.m, s.conv_up, g_up);
            store(g.params.conv_up, cg);
            g_m = std::move(cg.input);
            break;
        }
        case UpsampleKind::Transposed: {
            auto cg = conv_transpose2d_backward(t.m, s.conv_up, g_pre_out);
            store(g.params.conv_up, cg);
            g_m = std::move(cg.input);
            break;
        }
    }
    const auto g_pre_m = relu_backward(t.pre_m, g_m);
    auto mg = conv2d_backward(t.merged_in, s.conv_merge, g_pre_m);
    store(g.params.conv_merge, mg);
    auto [g_ut, g_ct] = split_channels(mg.input, s.conv_u.c_out);
    auto ug = conv2d_backward(t.u, s.conv_u, relu_backward(t.pre_u, g_ut));
    auto cg = conv2d_backward(t.c, s.conv_c, relu_backward(t.pre_c, g_ct));
    store(g.params.conv_u, ug);
    store(g.params.conv_c, cg);
    g.u = std::move(ug.input);
    g.c = std::move(cg.input);
    return g;
}

template <typename T>
ForwardResult<T> ced_forward(const BasicTensor<T>& image, const BasicModel<T>& model) {
    ForwardResult<T> r;
    auto& tr = r.trace;
    tr.features = encoder_forward(image, model, &tr.encoder);
    const int L = model.config.levels();
    tr.tops.push_back(tr.features.back());  // U_L = C_L
    for (const auto& s : model.stages) {
        StageTrace<T> st;
        BasicTensor<T> next = refine_forward(tr.tops.back(), tr.features[s.level - 1], s, &st);
        tr.stages.push_back(std::move(st));
        tr.tops.push_back(std::move(next));
    }
    for (std::size_t h = 0; h < model.heads.size(); ++h) {
        const auto& u = tr.tops[L - model.head_levels[h]];
        tr.logits.push_back(conv2d_forward(u, model.heads[h]));
        r.side_outputs.push_back(sigmoid(tr.logits.back()));
    }
    tr.logits.push_back(conv2d_forward(tr.tops.back(), model.final_head));
    r.final = sigmoid(tr.logits.back());
    return r;
}

template <typename T>
BasicModel<T> ced_backward(const BasicModel<T>& model, const ForwardTrace<T>& trace,
                           const std::vector<BasicTensor<T>>& logit_grads) {
    if (logit_grads.size() != trace.logits.size()) {
        throw ShapeError("ced_backward: expected " + std::to_string(trace.logits.size()) + " output gradients, got " +
                         std::to_string(logit_grads.size()));
    }
    for (std::size_t i = 0; i < logit_grads.size(); ++i) {
        if (logit_grads[i].shape() != trace.logits[i].shape()) {
            throw ShapeError("ced_backward: gradient " + std::to_string(i) + " is " + logit_grads[i].shape().str() +
                             ", output is " + trace.logits[i].shape().str());
        }
    }
    const int L = model.config.levels();
    BasicModel<T> grads = BasicModel<T>::build(model.config);
    std::vector<BasicTensor<T>> g_top(static_cast<std::size_t>(L));   // index L - l
    std::vector<BasicTensor<T>> g_feat(static_cast<std::size_t>(L));  // index l - 1

    for (std::size_t h = 0; h < model.heads.size(); ++h) {
        const int idx = L - model.head_levels[h];
        auto hg = conv2d_backward(trace.tops[idx], model.heads[h], logit_grads[h]);
        store(grads.heads[h], hg);
        accumulate(g_top[idx], hg.input);
    }
    {
        auto fg = conv2d_backward(trace.tops.back(), model.final_head, logit_grads.back());
        store(grads.final_head, fg);
        accumulate(g_top[L - 1], fg.input);
    }
    // Stage i consumes U_{L-i} and produces U_{L-i-1}; walk shallowest first.
    for (int i = static_cast<int>(model.stages.size()) - 1; i >= 0; --i) {
        const auto& s = model.stages[i];
        auto& g_out = g_top[i + 1];
        if (g_out.empty()) g_out = BasicTensor<T>(trace.tops[i + 1].shape());
        auto sg = refine_backward(trace.stages[i], s, g_out);
        grads.stages[i].conv_u.kernel = std::move(sg.params.conv_u.kernel);
        grads.stages[i].conv_u.bias = std::move(sg.params.conv_u.bias);
        grads.stages[i].conv_c.kernel = std::move(sg.params.conv_c.kernel);
        grads.stages[i].conv_c.bias = std::move(sg.params.conv_c.bias);
        grads.stages[i].conv_merge.kernel = std::move(sg.params.conv_merge.kernel);
        grads.stages[i].conv_merge.bias = std::move(sg.params.conv_merge.bias);
        grads.stages[i].conv_up.kernel = std::move(sg.params.conv_up.kernel);
        grads.stages[i].conv_up.bias = std::move(sg.params.conv_up.bias);
        accumulate(g_top[i], sg.u);
        accumulate(g_feat[s.level - 1], sg.c);
    }
    if (!g_top[0].empty()) accumulate(g_feat[L - 1], g_top[0]);

    for (int l = L; l >= 1; --l) {
        auto& gf = g_feat[l - 1];
        if (gf.empty()) gf = BasicTensor<T>(trace.features[l - 1].shape());
        const auto& et = trace.encoder[l - 1];
        const auto& stage = model.encoder[l - 1];
        auto bg = conv2d_backward(et.a, stage.conv_b, relu_backward(et.pre_b, gf));
        store(grads.encoder[l - 1].conv_b, bg);
        auto ag = conv2d_backward(et.input, stage.conv_a, relu_backward(et.pre_a, bg.input));
        store(grads.encoder[l - 1].conv_a, ag);
        if (l > 1) accumulate(g_feat[l - 2], ag.input);
    }
    return grads;
}

namespace {

template <typename T>
void fill_normal(BasicConvParams<T>& p, double fan_in, Rng& rng) {
    const double sd = std::sqrt(2.0 / fan_in);
    for (auto& w : p.kernel) w = static_cast<T>(sd * rng.normal());
    std::fill(p.bias.begin(), p.bias.end(), T(0));
}

}  // namespace

template <typename T>
void he_init(BasicModel<T>& model, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& [name, p] : model.parameters()) {
        double fan_in = p->fan_in();
        // A transposed kernel reaches each output from (k / stride)^2 taps per input channel.
        if (model.config.upsample == UpsampleKind::Transposed && name.ends_with("conv_up")) {
            fan_in /= static_cast<double>(p->stride) * p->stride;
        }
        fill_normal(*p, fan_in, rng);
    }
}

template <typename T>
void sgd_momentum_step(BasicModel<T>& params, const BasicModel<T>& grads, double lr, double momentum,
                       BasicModel<T>& velocity) {
    if (!(lr > 0.0)) throw std::invalid_argument("sgd: learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
    auto p = params.parameters();
    const auto g = grads.parameters();
    auto v = velocity.parameters();
    if (p.size() != g.size() || p.size() != v.size()) throw std::invalid_argument("sgd: model layouts differ");
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < g[i].second->kernel.size(); ++j)
            if (!std::isfinite(g[i].second->kernel[j]))
                throw TrainingError("non-finite gradient in " + g[i].first + ".kernel[" + std::to_string(j) + "]");
        for (std::size_t j = 0; j < g[i].second->bias.size(); ++j)
            if (!std::isfinite(g[i].second->bias[j]))
                throw TrainingError("non-finite gradient in " + g[i].first + ".bias[" + std::to_string(j) + "]");
    }
    auto update = [&](std::vector<T>& pv, const std::vector<T>& gv, std::vector<T>& vv) {
        for (std::size_t j = 0; j < pv.size(); ++j) {
            vv[j] = static_cast<T>(momentum * vv[j] + gv[j]);
            pv[j] = static_cast<T>(pv[j] - lr * vv[j]);
        }
    };
    for (std::size_t i = 0; i < p.size(); ++i) {
        update(p[i].second->kernel, g[i].second->kernel, v[i].second->kernel);
        update(p[i].second->bias, g[i].second->bias, v[i].second->bias);
    }
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("checkpoint truncated");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const Model& model, std::ostream& out) {
    const auto& c = model.config;
    out.write("CED1", 4);
    put_u32(out, static_cast<std::uint32_t>(c.levels()));
    for (int k : c.channels) put_u32(out, static_cast<std::uint32_t>(k));
    put_u32(out, static_cast<std::uint32_t>(c.r));
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < c.supervised.size(); ++i)
        if (c.supervised[i]) mask |= 1u << i;
    put_u32(out, mask);
    for (int v : {c.in_channels, c.k_u, c.k_c, c.k_m, c.k_o, c.proj_kernel, c.up_kernel})
        put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(c.upsample));
    const auto flat = model.flatten();
    put_u32(out, static_cast<std::uint32_t>(flat.size()));
    for (float f : flat) put_u32(out, std::bit_cast<std::uint32_t>(f));
    if (!out) throw CheckpointError("failed to write checkpoint");
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
    save_checkpoint(model, out);
}

Model load_checkpoint(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "CED1", 4) != 0) throw CheckpointError("not a CED1 checkpoint");
    ModelConfig c;
    const std::uint32_t L = get_u32(in);
    if (L < 2 || L > 8) throw CheckpointError("checkpoint has invalid stage count " + std::to_string(L));
    c.channels.clear();
    for (std::uint32_t i = 0; i < L; ++i) c.channels.push_back(static_cast<int>(get_u32(in)));
    c.r = static_cast<int>(get_u32(in));
    const std::uint32_t mask = get_u32(in);
    c.supervised.assign(L, false);
    for (std::uint32_t i = 0; i < L; ++i) c.supervised[i] = (mask >> i) & 1u;
    for (int* v : {&c.in_channels, &c.k_u, &c.k_c, &c.k_m, &c.k_o, &c.proj_kernel, &c.up_kernel})
        *v = static_cast<int>(get_u32(in));
    const std::uint32_t kind = get_u32(in);
    if (kind > 2) throw CheckpointError("checkpoint has unknown upsample kind " + std::to_string(kind));
    c.upsample = static_cast<UpsampleKind>(kind);
    Model m;
    try {
        m = Model::build(c);
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
    }
    const std::uint32_t n = get_u32(in);
    if (n != m.parameter_count()) {
        throw CheckpointError("checkpoint holds " + std::to_string(n) + " parameters, config implies " +
                              std::to_string(m.parameter_count()));
    }
    std::vector<float> flat(n);
    for (auto& f : flat) f = std::bit_cast<float>(get_u32(in));
    m.unflatten(flat);
    return m;
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    return load_checkpoint(in);
}

#define CED_INSTANTIATE(T)                                                                                     \
    template struct BasicModel<T>;                                                                            \
    template std::vector<BasicTensor<T>> encoder_forward(const BasicTensor<T>&, const BasicModel<T>&,         \
                                                         std::vector<EncoderTrace<T>>*);                      \
    template BasicTensor<T> refine_forward(const BasicTensor<T>&, const BasicTensor<T>&,                      \
                                           const BasicRefinementStage<T>&, StageTrace<T>*);                   \
    template StageGrads<T> refine_backward(const StageTrace<T>&, const BasicRefinementStage<T>&,              \
                                           const BasicTensor<T>&);                                            \
    template ForwardResult<T> ced_forward(const BasicTensor<T>&, const BasicModel<T>&);                       \
    template BasicModel<T> ced_backward(const BasicModel<T>&, const ForwardTrace<T>&,                         \
                                        const std::vector<BasicTensor<T>>&);                                  \
    template void he_init(BasicModel<T>&, std::uint64_t);                                                    \
    template void sgd_momentum_step(BasicModel<T>&, const BasicModel<T>&, double, double, BasicModel<T>&);

CED_INSTANTIATE(float)
CED_INSTANTIATE(double)

#undef CED_INSTANTIATE

template BasicModel<double> BasicModel<float>::cast<double>() const;
template BasicModel<float> BasicModel<double>::cast<float>() const;

}  // namespace ced
