#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ced/io.hpp"
#include "oracles.hpp"

using namespace ced;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ced_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string config_error(const std::string& text) {
    try {
        parse_run_config(text, "cfg.json");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("8-bit PGM decodes to [0, 1]") {
    std::string bytes = "P5\n4 1\n255\n";
    bytes += std::string{'\x00', '\xff', '\x80', '\x40'};
    std::istringstream in(bytes);
    const Tensor t = read_pgm(in);
    CHECK(t.shape() == Shape{1, 4, 1});
    CHECK(t[0] == 0.0f);
    CHECK(t[1] == 1.0f);
    CHECK(t[2] == doctest::Approx(0.50196).epsilon(1e-4));
    CHECK(t[3] == doctest::Approx(0.25098).epsilon(1e-4));
}

TEST_CASE("16-bit PGM is big-endian") {
    std::string bytes = "P5 2 1 65535\n";
    bytes += std::string{'\x01', '\x00', '\xff', '\xff'};
    std::istringstream in(bytes);
    const Tensor t = read_pgm(in);
    CHECK(t[0] == doctest::Approx(256.0 / 65535.0));
    CHECK(t[1] == 1.0f);
}

TEST_CASE("PGM comments and malformed headers") {
    std::string ok = "P5\n# comment\n1 1\n255\n";
    ok += '\x10';
    std::istringstream in(ok);
    CHECK(read_pgm(in).shape() == Shape{1, 1, 1});
    std::istringstream bad("P2\n1 1\n255\n0");
    CHECK_THROWS_AS(read_pgm(bad), FormatError);
    std::istringstream short_data("P5\n2 2\n255\nab");
    CHECK_THROWS_AS(read_pgm(short_data), FormatError);
}

TEST_CASE("edge map quantisation and range") {
    const fs::path d = scratch("quant");
    save_edge_map(Tensor(1, 3, 1, std::vector<float>{0.5f, 0.0f, 1.0f}), d / "a.pgm", ImageFormat::Pgm8);
    const std::string bytes = read_bytes(d / "a.pgm");
    REQUIRE(bytes.size() >= 3);
    CHECK(static_cast<unsigned char>(bytes[bytes.size() - 3]) == 128);
    CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 0);
    CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 255);
    CHECK_THROWS(save_edge_map(Tensor(1, 1, 1, 1.5f), d / "b.pgm", ImageFormat::Pgm8));
    CHECK_THROWS(save_edge_map(Tensor(1, 1, 1, -0.1f), d / "b.pgm", ImageFormat::Cedf));
    CHECK_THROWS(save_edge_map(Tensor(1, 1, 2, 0.1f), d / "b.pgm", ImageFormat::Cedf));
}

TEST_CASE("CEDF and 16-bit PGM round trips") {
    const fs::path d = scratch("roundtrip");
    Rng rng(3);
    const Tensor t = oracle::random_tensor<float>(rng, 5, 7, 1, 0, 1);
    save_edge_map(t, d / "t.cedf", ImageFormat::Cedf);
    CHECK(load_image(d / "t.cedf") == t);
    save_edge_map(t, d / "t.pgm", ImageFormat::Pgm16);
    const Tensor back = load_image(d / "t.pgm");
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(std::abs(back[i] - t[i]) <= 0.5f / 65535.0f + 1e-7f);
    std::istringstream junk("XXXXabcdefgh");
    CHECK_THROWS_AS(read_image(junk), FormatError);
}

TEST_CASE("binary maps round-trip") {
    const fs::path d = scratch("binmap");
    Rng rng(4);
    const BinaryMap b = oracle::random_map(rng, 6, 9, 0.4);
    save_binary_map(b, d / "b.pgm");
    CHECK(load_binary_map(d / "b.pgm") == b);
}

TEST_CASE("manifest loading") {
    const fs::path d = scratch("manifest");
    save_binary_map(BinaryMap(4, 4), d / "m.pgm");
    save_edge_map(Tensor(4, 4, 1, 0.5f), d / "i.pgm", ImageFormat::Pgm8);

    SUBCASE("relative paths, spacing, split") {
        write_text(d / "ok.json", R"({"records": [
            {"id": "a", "image": "i.pgm", "gt_mask": "m.pgm", "spacing": {"row_mm": 0.5, "col_mm": 0.7}, "split": "test"},
            {"id": "b", "image": "i.pgm", "gt_boundary": "m.pgm"}]})");
        const DatasetManifest m = load_manifest(d / "ok.json");
        REQUIRE(m.records.size() == 2);
        CHECK(m.records[0].image_path == d / "i.pgm");
        CHECK(m.records[0].spacing->row_mm == 0.5);
        CHECK(m.records[0].split == Split::Test);
        CHECK_FALSE(m.records[1].spacing.has_value());
        CHECK(m.split(Split::Train).size() == 1);
        save_manifest(m, d / "again.json");
        const DatasetManifest m2 = load_manifest(d / "again.json");
        CHECK(m2.records[0].image_path == m.records[0].image_path);
    }
    SUBCASE("duplicate id names the record") {
        write_text(d / "dup.json", R"({"records": [
            {"id": "x7", "image": "i.pgm", "gt_mask": "m.pgm"},
            {"id": "x7", "image": "i.pgm", "gt_mask": "m.pgm"}]})");
        try {
            load_manifest(d / "dup.json");
            FAIL("no error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("x7") != std::string::npos);
        }
    }
    SUBCASE("dangling path names the record") {
        write_text(d / "miss.json", R"({"records": [{"id": "lost", "image": "nope.pgm", "gt_mask": "m.pgm"}]})");
        try {
            load_manifest(d / "miss.json");
            FAIL("no error");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("lost") != std::string::npos);
        }
    }
    SUBCASE("both or neither ground truth") {
        write_text(d / "both.json",
                   R"({"records": [{"id": "a", "image": "i.pgm", "gt_mask": "m.pgm", "gt_boundary": "m.pgm"}]})");
        CHECK_THROWS(load_manifest(d / "both.json"));
        write_text(d / "none.json", R"({"records": [{"id": "a", "image": "i.pgm"}]})");
        CHECK_THROWS(load_manifest(d / "none.json"));
    }
}

TEST_CASE("run config parsing") {
    const RunConfig def = parse_run_config("{}");
    CHECK(def.train.seed == 0);
    CHECK(def.eval.thresholds == 33);
    const RunConfig c = parse_run_config(R"({"train": {"lr": 0.01, "steps": 5},
        "loss": {"lambda_loc": 2, "loc_kind": "skeleton_dice"}})");
    CHECK(c.train.lr == 0.01);
    CHECK(c.train.steps == 5);
    CHECK(c.loss.loc_kind == LocKind::SkeletonDice);
    CHECK(parse_run_config(dump_run_config(c)).train.lr == 0.01);

    SUBCASE("errors carry file, line and key") {
        const std::string e = config_error("{\n  \"train\": {\n    \"lr\": -1\n  }\n}");
        CHECK(e.find("cfg.json:3") != std::string::npos);
        CHECK(e.find("train.lr") != std::string::npos);
    }
    SUBCASE("unknown keys are rejected") {
        CHECK(config_error(R"({"train": {"learning_rate": 1}})").find("learning_rate") != std::string::npos);
        CHECK_FALSE(config_error(R"({"extra": {}})").empty());
    }
    SUBCASE("bad values") {
        CHECK_FALSE(config_error(R"({"loss": {"bin_threshold": 1.0}})").empty());
        CHECK_FALSE(config_error(R"({"loss": {"loc_kind": "l2"}})").empty());
        CHECK_FALSE(config_error(R"({"eval": {"thresholds": 1}})").empty());
        CHECK_FALSE(config_error(R"({"train": {"clip_norm": -1}})").empty());
        CHECK_FALSE(config_error("{not json").empty());
    }
}

TEST_CASE("synthetic data is deterministic and well formed") {
    const auto [img, mask] = render_synthetic(64, 9, 0.04);
    const auto [img2, mask2] = render_synthetic(64, 9, 0.04);
    CHECK(img == img2);
    CHECK(mask == mask2);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto [im, m] = render_synthetic(32, seed, 0.04);
        CHECK(m.any());
        CHECK(m.count() < m.size());
        const BinaryMap b = boundary_from_mask(m);
        CHECK(b.any());
        for (float v : im.data()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("synth_dataset writes identical trees for identical options") {
    SynthOptions opt;
    opt.n_images = 3;
    opt.size = 32;
    opt.seed = 7;
    opt.test_fraction = 0.34;
    const fs::path a = scratch("synth_a"), b = scratch("synth_b");
    const DatasetManifest m = synth_dataset(opt, a);
    synth_dataset(opt, b);
    CHECK(m.records.size() == 3);
    CHECK(m.split(Split::Test).size() == 1);
    for (const auto& e : fs::directory_iterator(a)) {
        const std::string name = e.path().filename().string();
        CHECK(read_bytes(e.path()) == read_bytes(b / name));
    }
    opt.size = 30;
    CHECK_THROWS(synth_dataset(opt, scratch("synth_c")));
}
