// Acceptance gate: prints one PASS/FAIL line per criterion and exits non-zero
// if any fail. Arguments select criteria by number (default: all).
//
//   ced_acceptance [--cli PATH] [--work DIR] [N ...]

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "ced/gradcheck.hpp"
#include "ced/pipeline.hpp"
#include "ced/report.hpp"
#include "oracles.hpp"

using namespace ced;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string cli_path = CED_CLI_PATH;
fs::path work_dir = fs::temp_directory_path() / "ced_acceptance";

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run_cli(const std::string& args) {
    const std::string cmd = "\"" + cli_path + "\" " + args + " > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) throw std::runtime_error("command failed: ced " + args);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Relative path -> bytes for every regular file under `root`.
std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

fs::path fresh(const std::string& name) {
    const fs::path p = work_dir / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    FullModelCheckOptions opt;
    double worst = 0.0;
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const GradcheckCase c = full_model_gradcheck(seed, opt);
        worst = std::max(worst, c.result.max_relative_error);
        ok = ok && c.passed();
    }
    const double secs = seconds_since(t0);
    ok = ok && worst < 2e-3 && secs < 120.0 && opt.lambda_loc > 0.0 && opt.size == 16;
    std::ostringstream d;
    d << "5 seeds, max rel err " << worst << ", " << secs << " s";
    return {ok, d.str()};
}

Outcome kernel_oracles() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(2024);
    const int n = 200;
    int conv_ok = 0, shuffle_ok = 0, dt_ok = 0, match_ok = 0;
    for (int t = 0; t < n; ++t) {
        const int k = 1 + 2 * static_cast<int>(rng.below(3));
        const int stride = 1 + static_cast<int>(rng.below(2));
        const int cin = 1 + static_cast<int>(rng.below(4)), cout = 1 + static_cast<int>(rng.below(4));
        ConvParams p(k, k, cin, cout, stride, static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
        for (auto& v : p.kernel) v = static_cast<float>(rng.uniform(-1, 1));
        for (auto& v : p.bias) v = static_cast<float>(rng.uniform(-1, 1));
        const Tensor x = oracle::random_tensor<float>(rng, k + static_cast<int>(rng.below(6)),
                                                      k + static_cast<int>(rng.below(6)), cin);
        const Tensor y = conv2d_forward(x, p);
        const TensorD ref = oracle::conv2d(x.cast<double>(), p.cast<double>());
        bool good = y.shape() == ref.shape();
        for (std::size_t i = 0; good && i < y.size(); ++i) good = std::abs(y[i] - ref[i]) <= 1e-5;
        conv_ok += good;

        const int r = 2 + static_cast<int>(rng.below(2));
        const Tensor s = oracle::random_tensor<float>(rng, 1 + static_cast<int>(rng.below(5)),
                                                      1 + static_cast<int>(rng.below(5)),
                                                      r * r * (1 + static_cast<int>(rng.below(3))));
        shuffle_ok += pixel_shuffle(s, r) == oracle::pixel_shuffle(s, r);

        const int h = 1 + static_cast<int>(rng.below(16)), w = 1 + static_cast<int>(rng.below(16));
        BinaryMap src = oracle::random_map(rng, h, w, rng.uniform(0.01, 0.3));
        if (!src.any()) src.set(static_cast<int>(rng.below(h)), static_cast<int>(rng.below(w)), true);
        const std::optional<Spacing> sp =
            t % 2 ? std::optional<Spacing>(Spacing{rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0)}) : std::nullopt;
        const DistanceField d = euclidean_dt(src, sp);
        dt_ok += d.squared == oracle::squared_dt(src, sp);

        const int mh = 3 + static_cast<int>(rng.below(5)), mw = 3 + static_cast<int>(rng.below(5));
        BinaryMap pred(mh, mw), gt(mh, mw);
        for (int i = 0, m = static_cast<int>(rng.below(8)) + 1; i < m; ++i)
            pred.set(static_cast<int>(rng.below(mh)), static_cast<int>(rng.below(mw)), true);
        for (int i = 0, m = static_cast<int>(rng.below(8)) + 1; i < m; ++i)
            gt.set(static_cast<int>(rng.below(mh)), static_cast<int>(rng.below(mw)), true);
        const AdmissibilityRule rule =
            t % 3 == 0 ? mm_to_px(1.0, Spacing{rng.uniform(0.4, 1.2), rng.uniform(0.4, 1.2)})
                       : px_rule(1.0 + static_cast<double>(rng.below(3)));
        match_ok += match_boundaries(pred, gt, rule).tp_pred == oracle::max_matching(pred, gt, rule);
    }
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << "conv " << conv_ok << "/" << n << ", shuffle " << shuffle_ok << "/" << n << ", dt " << dt_ok << "/" << n
      << ", matching " << match_ok << "/" << n << ", " << secs << " s";
    return {conv_ok == n && shuffle_ok == n && dt_ok == n && match_ok == n && secs < 120.0, d.str()};
}

Outcome metric_laws() {
    Rng rng(99);
    const int n = 60;
    int good = 0;
    EvalConfig shift_cfg;
    shift_cfg.tol_mm.clear();
    shift_cfg.tol_px = {1.0, 2.0, 3.0, 4.0};
    const auto thr = shift_cfg.threshold_values();
    for (int t = 0; t < n; ++t) {
        bool ok = true;
        const int h = 8 + static_cast<int>(rng.below(10)), w = 8 + static_cast<int>(rng.below(10));
        const BinaryMap gt = oracle::random_map(rng, h, w, 0.12);
        const BinaryMap pred = oracle::random_map(rng, h, w, 0.12);

        double prev_f = -1.0;
        for (double tol : {0.5, 1.0, 1.5, 2.0, 3.0, 4.0}) {
            const MatchCounts c = match_boundaries(pred, gt, tol);
            ok = ok && c.tp_pred + c.fp == static_cast<long>(pred.count());
            ok = ok && c.tp_gt + c.fn == static_cast<long>(gt.count());
            ok = ok && c.tp_pred == c.tp_gt;
            ok = ok && c.f_measure() >= prev_f;
            prev_f = c.f_measure();
        }

        const BinaryMap th = thin(pred);
        ok = ok && thin(th) == th;

        // A one-pixel-wide vertical curve shifted sideways by `shift` pixels.
        const int shift = 1 + static_cast<int>(rng.below(3));
        BinaryMap line(h, w), moved(h, w);
        int x = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(w - 2 - shift)));
        for (int y = 0; y < h; ++y) {
            line.set(y, x, true);
            moved.set(y, x + shift, true);
            if (y % 3 == 2 && x + shift + 1 < w - 1 && rng.below(2)) ++x;
        }
        for (const auto& curve : pr_curve(moved.to_tensor(), line, shift_cfg, std::nullopt, true)) {
            const auto s = dataset_summary({curve.counts}, thr);
            ok = ok && s.ods == (curve.tolerance.value >= shift ? 1.0 : 0.0);
        }
        good += ok;
    }
    std::ostringstream d;
    d << good << "/" << n << " pairs satisfy every law";
    return {good == n, d.str()};
}

Outcome self_evaluation() {
    const fs::path d = fresh("selfeval");
    run_cli("synth --n 6 --size 64 --seed 3 --out " + q(d / "data"));
    // give half the records an anisotropic spacing so mm tolerances exercise both axes
    DatasetManifest m = load_manifest(d / "data" / "manifest.json");
    for (std::size_t i = 0; i < m.records.size(); i += 2) m.records[i].spacing = Spacing{0.4, 0.7};
    save_manifest(m, d / "data" / "manifest.json");
    run_cli("extract-boundaries --manifest " + q(d / "data" / "manifest.json") + " --out-dir " + q(d / "gt"));
    run_cli("eval --manifest " + q(d / "data" / "manifest.json") + " --pred-dir " + q(d / "gt") +
            " --out-report " + q(d / "rep") + " --split all --self-check");
    const CsvTable t = read_csv(d / "rep" / "summary.csv");
    const std::size_t c_tol = t.column("tolerance"), c_ods = t.column("ODS"), c_ois = t.column("OIS"),
                      c_ap = t.column("AP");
    std::set<std::string> seen;
    bool ok = true;
    for (const auto& row : t.rows) {
        seen.insert(row[c_tol]);
        ok = ok && parse_double(row[c_ods]) == 1.0 && parse_double(row[c_ois]) == 1.0 &&
             parse_double(row[c_ap]) == 1.0;
    }
    ok = ok && seen == std::set<std::string>{"4px", "2px", "1px", "1mm", "0.5mm"};
    std::ostringstream s;
    s << t.rows.size() << " summary rows over " << seen.size() << " tolerances, all 1.0: " << (ok ? "yes" : "no");
    return {ok, s.str()};
}

Outcome training_smoke() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto [img, mask] = render_synthetic(64, 5, 0.04);
    std::vector<TrainSample> s;
    s.push_back({"img", img, GroundTruth(boundary_from_mask(mask))});
    RunConfig cfg = parse_run_config("{}");
    cfg.train.steps = 200;
    cfg.train.seed = 0;
    const TrainResult r = train(cfg, s);

    auto loss_of = [&](const Model& m) {
        const auto fr = ced_forward(s[0].image, m);
        return total_loss(fr.trace.logits, s[0].gt, cfg.loss).loss;
    };
    Model init = Model::build(cfg.model);
    he_init(init, cfg.train.seed);
    const double before = loss_of(init), after = loss_of(r.model);
    const double secs = seconds_since(t0);
    std::ostringstream d;
    d << "loss " << before << " -> " << after << " (" << 100.0 * (1.0 - after / before) << "% lower), " << secs
      << " s";
    return {after <= 0.5 * before && secs < 60.0, d.str()};
}

Outcome ablation_trend() {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path d = fresh("ablation");
    SynthOptions opt;
    opt.n_images = 250;
    opt.size = 64;
    // dataset seed 2: the shared lr and the DT weight were chosen on seed-1 data
    opt.seed = 2;
    opt.test_fraction = 0.2;
    const DatasetManifest m = synth_dataset(opt, d / "data");
    RunConfig cfg = parse_run_config(R"({"train": {"lr": 0.0003, "steps": 3000, "seed": 0}})");
    const AblationResult res = run_ablation(cfg, m, d / "out", &std::cerr, 0.1, 3);
    const AblationRow &a = res.row("bilinear"), &b = res.row("transposed"), &c = res.row("subpixel"),
                      &c_dt = res.row("subpixel+dt");
    const bool up_ok = c.ods_1px >= a.ods_1px && c.ods_1px >= b.ods_1px - 0.005;
    const bool dt_ok = c_dt.ods_1px >= c.ods_1px - 0.005 && c_dt.dt_metric < c.dt_metric;
    std::ostringstream s;
    s << "ODS(1px) bilinear " << a.ods_1px << ", transposed " << b.ods_1px << ", subpixel " << c.ods_1px
      << ", subpixel+dt " << c_dt.ods_1px << "; DT metric " << c.dt_metric << " -> " << c_dt.dt_metric << "; "
      << seconds_since(t0) << " s (means over " << c.runs.size() << " training seeds)";
    return {up_ok && dt_ok, s.str()};
}

// Trains a small model through the CLI and returns the work directory.
fs::path cli_pipeline(const std::string& name) {
    const fs::path d = fresh(name);
    std::ofstream(d / "cfg.json") << R"({"train": {"steps": 60, "seed": 4}})";
    run_cli("synth --n 8 --size 64 --seed 11 --test-fraction 0.25 --out " + q(d / "data"));
    run_cli("train --config " + q(d / "cfg.json") + " --manifest " + q(d / "data" / "manifest.json") +
            " --out-checkpoint " + q(d / "model.ced"));
    run_cli("predict --checkpoint " + q(d / "model.ced") + " --manifest " + q(d / "data" / "manifest.json") +
            " --out-dir " + q(d / "pred") + " --format cedf");
    run_cli("predict --checkpoint " + q(d / "model.ced") + " --manifest " + q(d / "data" / "manifest.json") +
            " --out-dir " + q(d / "pred_nms") + " --nms");
    run_cli("eval --manifest " + q(d / "data" / "manifest.json") + " --pred-dir " + q(d / "pred") + " --config " +
            q(d / "cfg.json") + " --out-report " + q(d / "rep") + " --split all");
    return d;
}

Outcome crispness_reporting() {
    const fs::path d = cli_pipeline("crisp");
    run_cli("eval --out-report " + q(d / "rep") + " --self-check");
    const CsvTable t = read_csv(d / "rep" / "crispness.csv");
    const std::size_t c_thin = t.column("thinned"), c_kind = t.column("tolerance_kind"),
                      c_val = t.column("tolerance_value"), c_ods = t.column("ODS");
    std::map<std::string, std::vector<std::pair<double, double>>> groups;
    for (const auto& row : t.rows)
        groups[row[c_thin] + "/" + row[c_kind]].emplace_back(parse_double(row[c_val]), parse_double(row[c_ods]));
    bool ok = !groups.empty();
    std::ostringstream s;
    for (const auto& [key, rows] : groups) {
        std::vector<double> tols;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            tols.push_back(rows[i].first);
            if (i > 0) ok = ok && rows[i].first < rows[i - 1].first && rows[i].second <= rows[i - 1].second;
        }
        const bool px = key.ends_with("px");
        ok = ok && tols == (px ? std::vector<double>{4.0, 2.0, 1.0} : std::vector<double>{1.0, 0.5});
        s << key << ":";
        for (const auto& [tol, ods] : rows) s << " " << tol << "=" << ods;
        s << "; ";
    }
    ok = ok && groups.size() == 4 && verify_report(d / "rep").empty();
    return {ok, s.str()};
}

Outcome determinism() {
    const fs::path a = cli_pipeline("det_a"), b = cli_pipeline("det_b");
    const auto ta = tree(a), tb = tree(b);
    std::size_t same = 0;
    std::string first_diff;
    for (const auto& [name, bytes] : ta) {
        const auto it = tb.find(name);
        if (it != tb.end() && it->second == bytes) ++same;
        else if (first_diff.empty()) first_diff = name;
    }
    bool ok = same == ta.size() && ta.size() == tb.size();

    // the ablation driver and the full-model check repeat too
    SynthOptions opt;
    opt.n_images = 6;
    opt.size = 32;
    opt.seed = 3;
    opt.test_fraction = 0.34;
    const DatasetManifest m = synth_dataset(opt, fresh("det_abl_data"));
    RunConfig cfg = parse_run_config(R"({"train": {"steps": 20}})");
    run_ablation(cfg, m, fresh("det_abl_a"));
    run_ablation(cfg, m, fresh("det_abl_b"));
    const bool abl_same = tree(work_dir / "det_abl_a") == tree(work_dir / "det_abl_b");
    ok = ok && abl_same;

    std::ostringstream s;
    s << same << "/" << ta.size() << " pipeline files identical";
    if (!first_diff.empty()) s << " (first difference: " << first_diff << ")";
    s << ", ablation outputs identical: " << (abl_same ? "yes" : "no");
    return {ok, s.str()};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient correctness (full model, 5 seeds)", gradient_correctness},
        {"kernel oracles (conv, shuffle, DT, matching)", kernel_oracles},
        {"metric laws", metric_laws},
        {"self-evaluation identity", self_evaluation},
        {"training smoke test", training_smoke},
        {"ablation trend", ablation_trend},
        {"crispness reporting", crispness_reporting},
        {"determinism", determinism},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--cli" && i + 1 < argc) cli_path = argv[++i];
        else if (a == "--work" && i + 1 < argc) work_dir = argv[++i];
        else selected.insert(std::stoi(a));
    }
    if (selected.empty())
        for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) selected.insert(i);

    int failures = 0;
    for (int n : selected) {
        if (n < 1 || n > static_cast<int>(criteria.size())) {
            std::cerr << "no criterion " << n << "\n";
            return 2;
        }
        const auto& [name, fn] = criteria[static_cast<std::size_t>(n - 1)];
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << name << " -- " << o.detail
                  << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
