#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "ced/network.hpp"
#include "oracles.hpp"

using namespace ced;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.channels = {4, 6, 8};
    c.k_u = c.k_c = c.k_m = c.k_o = 4;
    return c;
}

template <typename T>
void fill(BasicModel<T>& m, T v) {
    for (auto& [name, p] : m.parameters()) {
        for (auto& x : p->kernel) x = v;
        for (auto& x : p->bias) x = v;
    }
}

}  // namespace

TEST_CASE("forward shapes follow the scale pyramid") {
    for (UpsampleKind up : {UpsampleKind::SubPixel, UpsampleKind::Bilinear, UpsampleKind::Transposed}) {
        ModelConfig cfg = small_config();
        cfg.upsample = up;
        Model m = Model::build(cfg);
        he_init(m, 3);
        Rng rng(1);
        const Tensor img = oracle::random_tensor<float>(rng, 16, 24, 1, 0, 1);
        const auto feats = encoder_forward(img, m);
        REQUIRE(feats.size() == 3);
        CHECK(feats[0].shape() == Shape{16, 24, 4});
        CHECK(feats[1].shape() == Shape{8, 12, 6});
        CHECK(feats[2].shape() == Shape{4, 6, 8});
        const auto r = ced_forward(img, m);
        CHECK(r.final.shape() == Shape{16, 24, 1});
        REQUIRE(r.side_outputs.size() == 3);
        CHECK(r.side_outputs[0].shape() == Shape{4, 6, 1});
        CHECK(r.side_outputs[1].shape() == Shape{8, 12, 1});
        CHECK(r.side_outputs[2].shape() == Shape{16, 24, 1});
        for (float v : r.final.data()) {
            CHECK(v > 0.0f);
            CHECK(v < 1.0f);
        }
    }
}

TEST_CASE("input sizes must be divisible by 2^(L-1)") {
    Model m = Model::build(small_config());
    CHECK_THROWS(ced_forward(Tensor(10, 16, 1), m));
    CHECK_THROWS(ced_forward(Tensor(16, 16, 2), m));
}

TEST_CASE("model config validation") {
    ModelConfig c = small_config();
    c.supervised = {true, false};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.channels = {};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    CHECK(upsample_kind_from_string(to_string(UpsampleKind::Transposed)) == UpsampleKind::Transposed);
    CHECK_THROWS(upsample_kind_from_string("nearest"));
}

TEST_CASE("he_init statistics, zero biases, determinism") {
    ModelConfig c;
    c.channels = {64, 64};
    c.supervised = {true, true};
    Model m = Model::build(c);
    he_init(m, 42);
    const auto& k = m.encoder[1].conv_a;
    REQUIRE(k.kh == 3);
    REQUIRE(k.c_in == 64);
    REQUIRE(k.c_out == 64);
    double s = 0, s2 = 0;
    for (float v : k.kernel) {
        s += v;
        s2 += static_cast<double>(v) * v;
    }
    const double n = static_cast<double>(k.kernel.size());
    const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
    CHECK(std::abs(sd / std::sqrt(2.0 / (3 * 3 * 64)) - 1.0) < 0.05);
    for (const auto& [name, p] : m.parameters())
        for (float b : p->bias) CHECK(b == 0.0f);

    Model a = Model::build(small_config()), b = Model::build(small_config()), d = Model::build(small_config());
    he_init(a, 7);
    he_init(b, 7);
    he_init(d, 8);
    CHECK(a == b);
    CHECK_FALSE(a == d);
}

TEST_CASE("sgd with momentum") {
    Model p = Model::build(small_config()), g = Model::build(small_config()), v = Model::build(small_config());
    fill(p, 1.0f);
    fill(g, 0.5f);
    sgd_momentum_step(p, g, 0.5, 0.9, v);
    for (float x : p.flatten()) CHECK(x == 0.75f);
    sgd_momentum_step(p, g, 0.5, 0.9, v);
    // v = 0.9 * 0.5 + 0.5, p = 0.75 - 0.5 * v
    for (float x : p.flatten()) CHECK(x == doctest::Approx(0.275));
    for (float x : v.flatten()) CHECK(x == doctest::Approx(0.95));
}

TEST_CASE("sgd rejects non-finite gradients without touching parameters") {
    Model p = Model::build(small_config()), g = Model::build(small_config()), v = Model::build(small_config());
    fill(p, 1.0f);
    g.stages[0].conv_merge.kernel[3] = std::numeric_limits<float>::quiet_NaN();
    const Model before = p;
    CHECK_THROWS_AS(sgd_momentum_step(p, g, 0.1, 0.9, v), TrainingError);
    CHECK(p == before);
    g.stages[0].conv_merge.kernel[3] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(sgd_momentum_step(p, g, 0.1, 0.9, v), TrainingError);
}

TEST_CASE("zero output gradients give zero parameter gradients") {
    Model m = Model::build(small_config());
    he_init(m, 1);
    Rng rng(2);
    const auto r = ced_forward(oracle::random_tensor<float>(rng, 8, 8, 1, 0, 1), m);
    std::vector<Tensor> zeros;
    for (const auto& l : r.trace.logits) zeros.emplace_back(l.shape());
    const Model grads = ced_backward(m, r.trace, zeros);
    for (float x : grads.flatten()) CHECK(x == 0.0f);
}

TEST_CASE("flatten and unflatten round-trip") {
    Model m = Model::build(small_config());
    he_init(m, 5);
    Model n = Model::build(small_config());
    const auto flat = m.flatten();
    CHECK(flat.size() == m.parameter_count());
    n.unflatten(flat);
    CHECK(n == m);
    CHECK_THROWS(n.unflatten(std::span<const float>(flat.data(), flat.size() - 1)));
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    for (UpsampleKind up : {UpsampleKind::SubPixel, UpsampleKind::Bilinear, UpsampleKind::Transposed}) {
        ModelConfig cfg = small_config();
        cfg.upsample = up;
        cfg.supervised = {true, false, true};
        Model m = Model::build(cfg);
        he_init(m, 11);
        std::stringstream ss;
        save_checkpoint(m, ss);
        const std::string bytes = ss.str();
        CHECK(bytes.substr(0, 4) == "CED1");
        std::istringstream in(bytes);
        const Model back = load_checkpoint(in);
        CHECK(back == m);
        std::stringstream again;
        save_checkpoint(back, again);
        CHECK(again.str() == bytes);
    }
}

TEST_CASE("corrupt checkpoints are rejected") {
    Model m = Model::build(small_config());
    std::stringstream ss;
    save_checkpoint(m, ss);
    std::string bytes = ss.str();
    SUBCASE("bad magic") {
        bytes[0] = 'X';
        std::istringstream in(bytes);
        CHECK_THROWS_AS(load_checkpoint(in), CheckpointError);
    }
    SUBCASE("truncated") {
        std::istringstream in(bytes.substr(0, bytes.size() - 3));
        CHECK_THROWS_AS(load_checkpoint(in), CheckpointError);
    }
    SUBCASE("missing file") { CHECK_THROWS(load_checkpoint(std::filesystem::path("/nonexistent/x.ced"))); }
}
