#include "ced/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ced/random.hpp"

namespace ced {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t read_u32le(std::istream& in, const std::string& name) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(name + ": truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32le(std::ostream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pgm_token(std::istream& in, const std::string& name) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw FormatError(name + ": truncated PGM header");
    return tok;
}

int parse_dim(const std::string& tok, const std::string& name, const char* what, long max) {
    long v = 0;
    try {
        std::size_t used = 0;
        v = std::stol(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
        throw FormatError(name + ": invalid " + what + " '" + tok + "'");
    }
    if (v < 1 || v > max) throw FormatError(name + ": " + what + " " + tok + " out of range");
    return static_cast<int>(v);
}

constexpr long kMaxDim = 1 << 16;

}  // namespace

Tensor read_pgm(std::istream& in, const std::string& name) {
    if (pgm_token(in, name) != "P5") throw FormatError(name + ": not a binary PGM (P5)");
    const int w = parse_dim(pgm_token(in, name), name, "width", kMaxDim);
    const int h = parse_dim(pgm_token(in, name), name, "height", kMaxDim);
    const int maxval = parse_dim(pgm_token(in, name), name, "maxval", 65535);
    // pgm_token consumed exactly one whitespace byte after maxval.
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * bytes);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
        throw FormatError(name + ": truncated PGM payload");
    }
    Tensor t(h, w, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned v = bytes == 2 ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
        if (v > static_cast<unsigned>(maxval)) throw FormatError(name + ": sample exceeds maxval");
        t[i] = static_cast<float>(static_cast<double>(v) / maxval);
    }
    return t;
}

Tensor read_cedf(std::istream& in, const std::string& name) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "CEDF", 4) != 0) throw FormatError(name + ": not a CEDF raster");
    const std::uint32_t h = read_u32le(in, name), w = read_u32le(in, name), c = read_u32le(in, name);
    if (h < 1 || w < 1 || c < 1 || h > kMaxDim || w > kMaxDim || c > 4096 ||
        static_cast<std::uint64_t>(h) * w * c > (std::uint64_t{1} << 30)) {
        throw FormatError(name + ": CEDF dimensions " + std::to_string(h) + "x" + std::to_string(w) + "x" +
                          std::to_string(c) + " out of range");
    }
    Tensor t(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    for (auto& v : t.data()) v = std::bit_cast<float>(read_u32le(in, name));
    return t;
}

Tensor read_image(std::istream& in, const std::string& name) {
    char magic[4] = {};
    in.read(magic, 4);
    const auto got = in.gcount();
    in.clear();
    in.seekg(0);
    if (got >= 2 && magic[0] == 'P' && magic[1] == '5') return read_pgm(in, name);
    if (got == 4 && std::memcmp(magic, "CEDF", 4) == 0) return read_cedf(in, name);
    throw FormatError(name + ": unknown image format");
}

Tensor load_image(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open image " + path.string());
    return read_image(in, path.string());
}

void write_pgm(const Tensor& t, std::ostream& out, int maxval) {
    if (t.channels() != 1) throw ShapeError("PGM output needs a single-channel map, got " + t.shape().str());
    if (maxval != 255 && maxval != 65535) throw std::invalid_argument("PGM maxval must be 255 or 65535");
    std::vector<unsigned char> raw;
    raw.reserve(t.size() * (maxval > 255 ? 2 : 1));
    for (float v : t.data()) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw std::invalid_argument("edge map value " + std::to_string(v) + " outside [0, 1]");
        }
        const auto q = static_cast<unsigned>(std::floor(static_cast<double>(v) * maxval + 0.5));
        if (maxval > 255) {
            raw.push_back(static_cast<unsigned char>(q >> 8));
            raw.push_back(static_cast<unsigned char>(q & 0xff));
        } else {
            raw.push_back(static_cast<unsigned char>(q));
        }
    }
    out << "P5\n" << t.width() << " " << t.height() << "\n" << maxval << "\n";
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

void write_cedf(const Tensor& t, std::ostream& out) {
    out.write("CEDF", 4);
    write_u32le(out, static_cast<std::uint32_t>(t.height()));
    write_u32le(out, static_cast<std::uint32_t>(t.width()));
    write_u32le(out, static_cast<std::uint32_t>(t.channels()));
    for (float v : t.data()) write_u32le(out, std::bit_cast<std::uint32_t>(v));
}

void save_edge_map(const Tensor& t, const fs::path& path, ImageFormat format) {
    if (t.channels() != 1) throw ShapeError("edge map must be single-channel, got " + t.shape().str());
    for (float v : t.data())
        if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("edge map value outside [0, 1]");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    switch (format) {
        case ImageFormat::Pgm8: write_pgm(t, out, 255); break;
        case ImageFormat::Pgm16: write_pgm(t, out, 65535); break;
        case ImageFormat::Cedf: write_cedf(t, out); break;
    }
    if (!out) throw FormatError("failed writing " + path.string());
}

BinaryMap load_binary_map(const fs::path& path) {
    const Tensor t = load_image(path);
    if (t.channels() != 1) throw FormatError(path.string() + ": expected a single-channel raster");
    std::vector<std::uint8_t> bits(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) bits[i] = t[i] != 0.0f ? 1 : 0;
    return BinaryMap(t.height(), t.width(), std::move(bits));
}

void save_binary_map(const BinaryMap& b, const fs::path& path) {
    save_edge_map(b.to_tensor(), path, ImageFormat::Pgm8);
}

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw std::invalid_argument("unknown split '" + s + "' (expected train, val, test)");
}

std::vector<const ManifestRecord*> DatasetManifest::split(Split s) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& r : records)
        if (r.split == s) out.push_back(&r);
    return out;
}

DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open manifest " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

    DatasetManifest m;
    m.name = j.value("name", std::string("dataset"));
    if (!j.contains("records") || !j["records"].is_array()) throw FormatError(path.string() + ": missing records array");
    std::set<std::string> ids;
    std::size_t index = 0;
    for (const auto& jr : j["records"]) {
        const std::string where = path.string() + ": record " + std::to_string(index++);
        try {
            ManifestRecord r;
            r.id = jr.at("id").get<std::string>();
            const std::string who = path.string() + ": record '" + r.id + "'";
            if (!ids.insert(r.id).second) throw FormatError(who + ": duplicate id");
            r.image_path = resolve(jr.at("image").get<std::string>());
            if (jr.contains("gt_mask")) r.gt_mask_path = resolve(jr["gt_mask"].get<std::string>());
            if (jr.contains("gt_boundary")) r.gt_boundary_path = resolve(jr["gt_boundary"].get<std::string>());
            if (r.gt_mask_path.has_value() == r.gt_boundary_path.has_value()) {
                throw FormatError(who + ": needs exactly one of gt_mask or gt_boundary");
            }
            if (jr.contains("spacing")) {
                Spacing s{jr["spacing"].at("row_mm").get<double>(), jr["spacing"].at("col_mm").get<double>()};
                if (!(s.row_mm > 0.0 && s.col_mm > 0.0)) throw FormatError(who + ": spacing must be positive");
                r.spacing = s;
            }
            r.split = split_from_string(jr.value("split", std::string("train")));
            for (const auto& p : {std::optional<fs::path>(r.image_path), r.gt_mask_path, r.gt_boundary_path}) {
                if (p && !fs::exists(*p)) throw FormatError(who + ": file not found: " + p->string());
            }
            m.records.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw FormatError(where + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw FormatError(where + ": " + e.what());
        }
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
    const fs::path base = fs::absolute(path).parent_path();
    auto rel = [&](const fs::path& p) {
        const fs::path r = fs::absolute(p).lexically_relative(base);
        return (r.empty() ? p : r).generic_string();
    };
    json j;
    j["name"] = m.name;
    j["records"] = json::array();
    for (const auto& r : m.records) {
        json jr;
        jr["id"] = r.id;
        jr["image"] = rel(r.image_path);
        if (r.gt_mask_path) jr["gt_mask"] = rel(*r.gt_mask_path);
        if (r.gt_boundary_path) jr["gt_boundary"] = rel(*r.gt_boundary_path);
        if (r.spacing) jr["spacing"] = {{"row_mm", r.spacing->row_mm}, {"col_mm", r.spacing->col_mm}};
        jr["split"] = to_string(r.split);
        j["records"].push_back(std::move(jr));
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

BinaryMap load_ground_truth(const ManifestRecord& r) {
    if (r.gt_mask_path) return boundary_from_mask(load_binary_map(*r.gt_mask_path));
    return load_binary_map(*r.gt_boundary_path);
}

// Run configuration ----------------------------------------------------------

namespace {

int line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of `"key"` inside the `"block"` object, or of the block itself.
int line_of_key(const std::string& text, const std::string& block, const std::string& key) {
    const std::size_t b = text.find("\"" + block + "\"");
    if (b == std::string::npos) return 1;
    if (key.empty()) return line_of_offset(text, b);
    const std::size_t k = text.find("\"" + key + "\"", b);
    return line_of_offset(text, k == std::string::npos ? b : k);
}

class ConfigReader {
public:
    ConfigReader(const std::string& text, std::string name) : text_(text), name_(std::move(name)) {}

    [[noreturn]] void fail(const std::string& block, const std::string& key, const std::string& msg) const {
        throw ConfigError(name_ + ":" + std::to_string(line_of_key(text_, block, key)) + ": " +
                          (key.empty() ? block : block + "." + key) + ": " + msg);
    }

    template <typename T>
    void read(const json& obj, const std::string& block, const std::string& key, T& into) const {
        if (!obj.contains(key)) return;
        try {
            into = obj.at(key).get<T>();
        } catch (const json::exception&) {
            fail(block, key, "has the wrong type");
        }
    }

    void only(const json& obj, const std::string& block, std::initializer_list<const char*> keys) const {
        if (!obj.is_object()) fail(block, "", "must be an object");
        for (const auto& [k, v] : obj.items()) {
            if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
                fail(block, k, "unknown key");
            }
        }
    }

private:
    const std::string& text_;
    std::string name_;
};

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& name) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(name + ":" + std::to_string(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0)) +
                          ": invalid JSON: " + e.what());
    }
    const ConfigReader rd(text, name);
    if (!j.is_object()) throw ConfigError(name + ":1: configuration must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        if (k != "model" && k != "loss" && k != "train" && k != "eval") rd.fail(k, "", "unknown block");
    }

    RunConfig cfg;
    if (j.contains("model")) {
        const json& m = j["model"];
        rd.only(m, "model", {"in_channels", "channels", "k_u", "k_c", "k_m", "k_o", "proj_kernel", "up_kernel", "r",
                             "upsample", "supervised"});
        auto& mc = cfg.model;
        rd.read(m, "model", "in_channels", mc.in_channels);
        rd.read(m, "model", "channels", mc.channels);
        rd.read(m, "model", "k_u", mc.k_u);
        rd.read(m, "model", "k_c", mc.k_c);
        rd.read(m, "model", "k_m", mc.k_m);
        rd.read(m, "model", "k_o", mc.k_o);
        rd.read(m, "model", "proj_kernel", mc.proj_kernel);
        rd.read(m, "model", "up_kernel", mc.up_kernel);
        rd.read(m, "model", "r", mc.r);
        std::string up = to_string(mc.upsample);
        rd.read(m, "model", "upsample", up);
        try {
            mc.upsample = upsample_kind_from_string(up);
        } catch (const std::invalid_argument& e) {
            rd.fail("model", "upsample", e.what());
        }
        if (m.contains("supervised")) {
            rd.read(m, "model", "supervised", mc.supervised);
        } else if (m.contains("channels")) {
            mc.supervised.assign(mc.channels.size(), true);
        }
        try {
            mc.validate();
        } catch (const std::invalid_argument& e) {
            rd.fail("model", "", e.what());
        }
    }

    cfg.loss.alpha.assign(cfg.model.num_outputs(), 1.0);
    if (j.contains("loss")) {
        const json& l = j["loss"];
        rd.only(l, "loss", {"alpha", "lambda_loc", "loc_kind", "bin_threshold"});
        rd.read(l, "loss", "alpha", cfg.loss.alpha);
        rd.read(l, "loss", "lambda_loc", cfg.loss.lambda_loc);
        std::string kind = to_string(cfg.loss.loc_kind);
        rd.read(l, "loss", "loc_kind", kind);
        try {
            cfg.loss.loc_kind = loc_kind_from_string(kind);
        } catch (const std::invalid_argument& e) {
            rd.fail("loss", "loc_kind", e.what());
        }
        rd.read(l, "loss", "bin_threshold", cfg.bin_threshold);
    }
    try {
        cfg.loss.validate(cfg.model.num_outputs());
    } catch (const std::invalid_argument& e) {
        rd.fail("loss", "alpha", e.what());
    }
    if (!(cfg.bin_threshold > 0.0 && cfg.bin_threshold < 1.0)) rd.fail("loss", "bin_threshold", "must lie in (0, 1)");

    if (j.contains("train")) {
        const json& t = j["train"];
        rd.only(t, "train", {"lr", "momentum", "steps", "seed", "clip_norm"});
        rd.read(t, "train", "lr", cfg.train.lr);
        rd.read(t, "train", "momentum", cfg.train.momentum);
        rd.read(t, "train", "steps", cfg.train.steps);
        rd.read(t, "train", "seed", cfg.train.seed);
        rd.read(t, "train", "clip_norm", cfg.train.clip_norm);
    }
    if (!(cfg.train.clip_norm >= 0.0)) rd.fail("train", "clip_norm", "must be >= 0");
    if (!(cfg.train.lr > 0.0)) rd.fail("train", "lr", "must be > 0");
    if (!(cfg.train.momentum >= 0.0 && cfg.train.momentum < 1.0)) rd.fail("train", "momentum", "must lie in [0, 1)");
    if (cfg.train.steps < 0) rd.fail("train", "steps", "must be >= 0");

    if (j.contains("eval")) {
        const json& e = j["eval"];
        rd.only(e, "eval", {"thresholds", "tol_px", "tol_mm", "apply_thinning"});
        rd.read(e, "eval", "thresholds", cfg.eval.thresholds);
        rd.read(e, "eval", "tol_px", cfg.eval.tol_px);
        rd.read(e, "eval", "tol_mm", cfg.eval.tol_mm);
        rd.read(e, "eval", "apply_thinning", cfg.eval.apply_thinning);
    }
    if (cfg.eval.thresholds < 2) rd.fail("eval", "thresholds", "must be >= 2");
    for (double t : cfg.eval.tol_px)
        if (!(t > 0.0)) rd.fail("eval", "tol_px", "tolerances must be > 0");
    for (double t : cfg.eval.tol_mm)
        if (!(t > 0.0)) rd.fail("eval", "tol_mm", "tolerances must be > 0");
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.string());
}

std::string dump_run_config(const RunConfig& cfg) {
    const auto& m = cfg.model;
    json j;
    j["model"] = {{"in_channels", m.in_channels}, {"channels", m.channels},     {"k_u", m.k_u},
                  {"k_c", m.k_c},                 {"k_m", m.k_m},               {"k_o", m.k_o},
                  {"proj_kernel", m.proj_kernel}, {"up_kernel", m.up_kernel},   {"r", m.r},
                  {"upsample", to_string(m.upsample)}, {"supervised", m.supervised}};
    j["loss"] = {{"alpha", cfg.loss.alpha},
                 {"lambda_loc", cfg.loss.lambda_loc},
                 {"loc_kind", to_string(cfg.loss.loc_kind)},
                 {"bin_threshold", cfg.bin_threshold}};
    j["train"] = {{"lr", cfg.train.lr}, {"momentum", cfg.train.momentum}, {"steps", cfg.train.steps},
                  {"seed", cfg.train.seed}, {"clip_norm", cfg.train.clip_norm}};
    j["eval"] = {{"thresholds", cfg.eval.thresholds},
                 {"tol_px", cfg.eval.tol_px},
                 {"tol_mm", cfg.eval.tol_mm},
                 {"apply_thinning", cfg.eval.apply_thinning}};
    return j.dump(2) + "\n";
}

// Synthetic data --------------------------------------------------------------

namespace {

struct Shape2D {
    bool blob = false;
    double cy = 0, cx = 0;
    double a = 0, b = 0, angle = 0;          // ellipse semi-axes and rotation
    double r0 = 0;                            // blob base radius
    std::array<double, 3> amp{}, phase{};     // blob harmonics k = 2, 3, 4

    bool inside(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        if (!blob) {
            const double c = std::cos(angle), s = std::sin(angle);
            const double u = (dx * c + dy * s) / a, v = (-dx * s + dy * c) / b;
            return u * u + v * v <= 1.0;
        }
        const double th = std::atan2(dy, dx);
        double rad = 1.0;
        for (int k = 0; k < 3; ++k) rad += amp[k] * std::cos((k + 2) * th + phase[k]);
        return std::hypot(dy, dx) <= r0 * rad;
    }
};

// Fraction of a pixel covered by the shape, 4x4 supersampled.
double coverage(const Shape2D& s, int y, int x) {
    int hits = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            hits += s.inside(y + (i + 0.5) / 4.0, x + (j + 0.5) / 4.0) ? 1 : 0;
    return hits / 16.0;
}

Shape2D random_shape(Rng& rng, int size, double scale) {
    Shape2D s;
    s.blob = rng.uniform() < 0.5;
    s.cy = rng.uniform(0.3, 0.7) * size;
    s.cx = rng.uniform(0.3, 0.7) * size;
    if (s.blob) {
        s.r0 = rng.uniform(0.15, 0.26) * size * scale;
        for (int k = 0; k < 3; ++k) {
            s.amp[k] = rng.uniform(0.0, 0.12);
            s.phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
    } else {
        s.a = rng.uniform(0.12, 0.3) * size * scale;
        s.b = rng.uniform(0.12, 0.3) * size * scale;
        s.angle = rng.uniform(0.0, std::numbers::pi);
    }
    return s;
}

}  // namespace

std::pair<Tensor, BinaryMap> render_synthetic(int size, std::uint64_t seed, double noise_sigma) {
    Rng rng(seed);
    std::vector<Shape2D> shapes{random_shape(rng, size, 1.0)};
    std::vector<double> cover(static_cast<std::size_t>(size) * size, 0.0);
    auto paint = [&](const Shape2D& s, std::vector<double>& into) {
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) into[static_cast<std::size_t>(y) * size + x] = coverage(s, y, x);
    };
    paint(shapes[0], cover);

    // Optional second, smaller organ kept at least 3 px away from the first.
    if (rng.uniform() < 0.35) {
        for (int attempt = 0; attempt < 10; ++attempt) {
            Shape2D extra = random_shape(rng, size, 0.45);
            extra.cy = rng.uniform(0.15, 0.85) * size;
            extra.cx = rng.uniform(0.15, 0.85) * size;
            std::vector<double> c2(cover.size());
            paint(extra, c2);
            bool clear = true;
            for (int y = 0; y < size && clear; ++y)
                for (int x = 0; x < size && clear; ++x) {
                    if (c2[static_cast<std::size_t>(y) * size + x] == 0.0) continue;
                    for (int dy = -3; dy <= 3 && clear; ++dy)
                        for (int dx = -3; dx <= 3 && clear; ++dx) {
                            const int ny = y + dy, nx = x + dx;
                            if (ny >= 0 && ny < size && nx >= 0 && nx < size &&
                                cover[static_cast<std::size_t>(ny) * size + nx] > 0.0)
                                clear = false;
                        }
                }
            if (clear) {
                for (std::size_t i = 0; i < cover.size(); ++i) cover[i] = std::max(cover[i], c2[i]);
                break;
            }
        }
    }

    const double bg = rng.uniform(0.2, 0.45);
    const double contrast = rng.uniform(0.25, 0.45) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const double fg = std::clamp(bg + contrast, 0.05, 0.95);
    const double bgy = rng.uniform(-0.15, 0.15) / size, bgx = rng.uniform(-0.15, 0.15) / size;
    const double fgy = rng.uniform(-0.1, 0.1) / size, fgx = rng.uniform(-0.1, 0.1) / size;

    Tensor image(size, size, 1);
    std::vector<std::uint8_t> mask(cover.size());
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * size + x;
            const double b = bg + bgy * y + bgx * x;
            const double f = fg + fgy * y + fgx * x;
            const double v = b * (1.0 - cover[i]) + f * cover[i] + noise_sigma * rng.normal();
            image[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
            mask[i] = cover[i] >= 0.5 ? 1 : 0;
        }
    return {std::move(image), BinaryMap(size, size, std::move(mask))};
}

DatasetManifest synth_dataset(const SynthOptions& opt, const fs::path& out_dir) {
    if (opt.n_images < 1) throw std::invalid_argument("synth: n must be >= 1");
    if (opt.size < 8 || opt.size > 4096) throw std::invalid_argument("synth: size must lie in [8, 4096]");
    if (opt.size_multiple < 1 || opt.size % opt.size_multiple != 0) {
        throw std::invalid_argument("synth: size " + std::to_string(opt.size) + " must be divisible by " +
                                    std::to_string(opt.size_multiple));
    }
    if (!(opt.val_fraction >= 0.0 && opt.test_fraction >= 0.0 && opt.val_fraction + opt.test_fraction <= 1.0)) {
        throw std::invalid_argument("synth: split fractions must be non-negative and sum to at most 1");
    }
    fs::create_directories(out_dir);
    Rng seeds(opt.seed);
    const int n_test = static_cast<int>(std::lround(opt.test_fraction * opt.n_images));
    const int n_val = static_cast<int>(std::lround(opt.val_fraction * opt.n_images));
    const int n_train = std::max(0, opt.n_images - n_test - n_val);

    DatasetManifest m;
    m.name = "synth";
    for (int i = 0; i < opt.n_images; ++i) {
        const std::uint64_t s = seeds.next_u64();
        auto [image, mask] = render_synthetic(opt.size, s, opt.noise_sigma);
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "img%05d", i);
        const std::string id = idbuf;
        ManifestRecord r;
        r.id = id;
        r.image_path = out_dir / (id + ".pgm");
        r.gt_mask_path = out_dir / (id + "_mask.pgm");
        r.spacing = Spacing{1.0, 1.0};
        r.split = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
        save_edge_map(image, r.image_path, ImageFormat::Pgm8);
        save_binary_map(mask, *r.gt_mask_path);
        m.records.push_back(std::move(r));
    }
    save_manifest(m, out_dir / "manifest.json");
    return m;
}

}  // namespace ced
