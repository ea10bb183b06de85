// ced: synthetic data, training, inference and benchmarking from the shell.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ced/gradcheck.hpp"
#include "ced/io.hpp"
#include "ced/pipeline.hpp"
#include "ced/report.hpp"

namespace fs = std::filesystem;
using namespace ced;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::optional<Split> parse_split(const std::string& s) {
    if (s.empty() || s == "all") return std::nullopt;
    try {
        return split_from_string(s);
    } catch (const std::invalid_argument& e) {
        throw UsageError(std::string(e.what()) + " or all");
    }
}

ImageFormat parse_format(const std::string& s) {
    if (s == "pgm") return ImageFormat::Pgm8;
    if (s == "pgm16") return ImageFormat::Pgm16;
    if (s == "cedf") return ImageFormat::Cedf;
    throw UsageError("unknown format '" + s + "' (expected pgm, pgm16, cedf)");
}

void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

void print_summary(const EvalReport& rep) {
    std::printf("%-8s %-7s %8s %8s %8s\n", "tol", "thinned", "ODS", "OIS", "AP");
    for (const auto& row : rep.rows) {
        std::printf("%-8s %-7s %8.4f %8.4f %8.4f\n", row.tolerance.label().c_str(), row.thinned ? "yes" : "no",
                    row.summary.ods, row.summary.ois, row.summary.ap);
    }
    std::printf("DT metric (raw, mean): %.4f", rep.dt_metric);
    if (rep.dt_empty_predictions) std::printf("  [%zu empty binarisations]", rep.dt_empty_predictions);
    std::printf("\n");
}

int report_problems(const std::vector<std::string>& problems, const fs::path& dir) {
    if (problems.empty()) {
        std::printf("self-check: %s is consistent\n", dir.string().c_str());
        return 0;
    }
    for (const auto& p : problems) std::fprintf(stderr, "self-check: %s\n", p.c_str());
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Crisp edge detection: synthetic data, training, inference and benchmarking"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ced 1.0");

    // synth
    SynthOptions synth;
    fs::path synth_out;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic organ-silhouette dataset");
    c_synth->add_option("--n", synth.n_images, "Number of images")->required()->check(CLI::PositiveNumber);
    c_synth->add_option("--size", synth.size, "Image side in pixels")->capture_default_str();
    c_synth->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
    c_synth->add_option("--out", synth_out, "Output directory")->required();
    c_synth->add_option("--size-multiple", synth.size_multiple, "Required divisor of --size (2^(L-1))")
        ->capture_default_str();
    c_synth->add_option("--noise", synth.noise_sigma, "Gaussian noise sigma")->capture_default_str();
    c_synth->add_option("--val-fraction", synth.val_fraction, "Fraction of records tagged val")->capture_default_str();
    c_synth->add_option("--test-fraction", synth.test_fraction, "Fraction of records tagged test")
        ->capture_default_str();

    // train
    fs::path cfg_path, manifest_path, ckpt_out, log_path;
    std::string split_name = "train";
    std::optional<std::uint64_t> seed_override;
    std::optional<int> steps_override;
    auto* c_train = app.add_subcommand("train", "Train a model with per-image SGD");
    c_train->add_option("--config", cfg_path, "Run configuration (JSON)")->required();
    c_train->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    c_train->add_option("--out-checkpoint", ckpt_out, "Checkpoint to write")->required();
    c_train->add_option("--log", log_path, "Per-step loss CSV (default: <checkpoint>.log.csv)");
    c_train->add_option("--split", split_name, "Records to train on: train, val, test or all")->capture_default_str();
    c_train->add_option("--seed", seed_override, "Override train.seed");
    c_train->add_option("--steps", steps_override, "Override train.steps")->check(CLI::NonNegativeNumber);

    // predict
    fs::path ckpt_in, out_dir;
    bool nms = false, do_thin = false;
    double thin_threshold = 0.5;
    std::string format_name = "pgm";
    auto* c_predict = app.add_subcommand("predict", "Write an edge map for every manifest record");
    c_predict->add_option("--checkpoint", ckpt_in, "Model checkpoint")->required();
    c_predict->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    c_predict->add_option("--out-dir", out_dir, "Output directory")->required();
    auto* o_nms = c_predict->add_flag("--nms", nms, "Non-maximum suppression along the gradient direction");
    auto* o_thin = c_predict->add_flag("--thin", do_thin, "Keep probabilities on the thinned binarisation only");
    o_nms->excludes(o_thin);
    c_predict->add_option("--threshold", thin_threshold, "Binarisation threshold for --thin")->capture_default_str();
    c_predict->add_option("--format", format_name, "pgm, pgm16 or cedf")->capture_default_str();

    // extract-boundaries
    auto* c_extract = app.add_subcommand("extract-boundaries", "Write the inner boundary of every mask record");
    c_extract->add_option("--manifest", manifest_path, "Dataset manifest")->required();
    c_extract->add_option("--out-dir", out_dir, "Output directory")->required();

    // eval
    fs::path pred_dir, report_dir;
    bool self_check = false;
    std::string eval_split = "all";
    auto* c_eval = app.add_subcommand("eval", "Benchmark predictions against ground truth");
    c_eval->add_option("--manifest", manifest_path, "Dataset manifest");
    c_eval->add_option("--pred-dir", pred_dir, "Directory of <id>.pgm / <id>.cedf predictions");
    c_eval->add_option("--config", cfg_path, "Run configuration (eval block and bin_threshold)");
    c_eval->add_option("--out-report", report_dir, "Report directory")->required();
    c_eval->add_option("--split", eval_split, "Records to evaluate: train, val, test or all")->capture_default_str();
    c_eval->add_flag("--self-check", self_check,
                     "Re-read the written report and cross-check it; without --manifest, only check an existing one");

    // gradcheck
    bool full_model = false;
    int gc_seeds = 5;
    std::uint64_t gc_seed = 0;
    auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    c_grad->add_flag("--full-model", full_model, "Also check the whole model under the total loss");
    c_grad->add_option("--seeds", gc_seeds, "Number of seeds")->capture_default_str()->check(CLI::PositiveNumber);
    c_grad->add_option("--seed", gc_seed, "First seed")->capture_default_str();

    // ablate
    double dt_lambda = 0.1;
    int replicates = 1;
    auto* c_ablate = app.add_subcommand("ablate", "Train the upsampling variants and compare them");
    c_ablate->add_option("--config", cfg_path, "Run configuration (JSON)")->required();
    c_ablate->add_option("--manifest", manifest_path, "Dataset manifest with train and test records")->required();
    c_ablate->add_option("--out", out_dir, "Output directory")->required();
    c_ablate->add_option("--seed", seed_override, "Override train.seed");
    c_ablate->add_option("--steps", steps_override, "Override train.steps")->check(CLI::NonNegativeNumber);
    c_ablate->add_option("--dt-lambda", dt_lambda,
                         "DT loss weight for the subpixel+dt variant unless the config sets one")
        ->capture_default_str();
    c_ablate->add_option("--replicates", replicates, "Training seeds per variant; scores are averaged")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto load_config = [&]() {
        RunConfig cfg = cfg_path.empty() ? RunConfig{} : load_run_config(cfg_path);
        if (cfg_path.empty()) cfg.loss.alpha.assign(cfg.model.num_outputs(), 1.0);
        if (seed_override) cfg.train.seed = *seed_override;
        if (steps_override) cfg.train.steps = *steps_override;
        return cfg;
    };

    try {
        if (*c_synth) {
            DatasetManifest m;
            try {
                m = synth_dataset(synth, synth_out);
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            std::printf("wrote %zu images and %s\n", m.records.size(), (synth_out / "manifest.json").string().c_str());
        } else if (*c_train) {
            require_file(cfg_path, "config");
            require_file(manifest_path, "manifest");
            const auto split = parse_split(split_name);
            const RunConfig cfg = load_config();
            const auto m = load_manifest(manifest_path);
            const auto samples = load_samples(m, split, cfg.model, &std::cerr);
            if (samples.empty()) throw UsageError("no usable training records in " + manifest_path.string());
            if (log_path.empty()) log_path = fs::path(ckpt_out.string() + ".log.csv");
            if (ckpt_out.has_parent_path()) fs::create_directories(ckpt_out.parent_path());
            std::ofstream log(log_path);
            if (!log) throw FormatError("cannot open " + log_path.string() + " for writing");
            const auto t0 = std::chrono::steady_clock::now();
            const TrainResult res = train(cfg, samples, &log);
            save_checkpoint(res.model, ckpt_out);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (!res.log.empty()) {
                std::printf("trained %d steps on %zu images in %.1fs: loss %.4f -> %.4f\n", cfg.train.steps,
                            samples.size(), secs, res.log.front().loss, res.log.back().loss);
            }
            std::printf("wrote %s and %s\n", ckpt_out.string().c_str(), log_path.string().c_str());
        } else if (*c_predict) {
            require_file(ckpt_in, "checkpoint");
            require_file(manifest_path, "manifest");
            const ImageFormat format = parse_format(format_name);
            if (!(thin_threshold > 0.0 && thin_threshold < 1.0)) throw UsageError("--threshold must lie in (0, 1)");
            const Model model = load_checkpoint(ckpt_in);
            const auto m = load_manifest(manifest_path);
            const PostProcess mode = nms ? PostProcess::Nms : do_thin ? PostProcess::Thin : PostProcess::None;
            const auto written = predict_dataset(model, m, out_dir, mode, thin_threshold, format);
            std::printf("wrote %zu edge maps to %s\n", written.size(), out_dir.string().c_str());
        } else if (*c_extract) {
            require_file(manifest_path, "manifest");
            const auto m = load_manifest(manifest_path);
            const auto written = extract_boundaries(m, out_dir);
            std::printf("wrote %zu boundary maps to %s\n", written.size(), out_dir.string().c_str());
        } else if (*c_eval) {
            if (manifest_path.empty()) {
                if (!self_check) throw UsageError("eval needs --manifest and --pred-dir (or --self-check alone)");
                return report_problems(verify_report(report_dir), report_dir);
            }
            require_file(manifest_path, "manifest");
            if (pred_dir.empty() || !fs::is_directory(pred_dir)) {
                throw UsageError("prediction directory not found: " + pred_dir.string());
            }
            if (!cfg_path.empty()) require_file(cfg_path, "config");
            const auto split = parse_split(eval_split);
            const RunConfig cfg = load_config();
            const auto m = load_manifest(manifest_path);
            const auto items = load_eval_items(m, pred_dir, split);
            const EvalReport rep = evaluate(items, cfg.eval, m.name, cfg.bin_threshold);
            write_report(rep, report_dir);
            print_summary(rep);
            std::printf("report written to %s\n", report_dir.string().c_str());
            if (self_check) return report_problems(verify_report(report_dir), report_dir);
        } else if (*c_grad) {
            int failures = 0;
            auto show = [&](const GradcheckCase& c) {
                std::printf("%-52s max rel err %.3e (tol %.0e, %zu checked, %zu skipped)  %s\n", c.name.c_str(),
                            c.result.max_relative_error, c.tolerance, c.result.checked, c.result.skipped,
                            c.passed() ? "PASS" : "FAIL");
                if (!c.passed()) ++failures;
            };
            for (int i = 0; i < gc_seeds; ++i) {
                for (const auto& c : op_gradcheck_suite(gc_seed + static_cast<std::uint64_t>(i))) show(c);
            }
            if (full_model) {
                double worst = 0.0;
                for (int i = 0; i < gc_seeds; ++i) {
                    const auto c = full_model_gradcheck(gc_seed + static_cast<std::uint64_t>(i));
                    worst = std::max(worst, c.result.max_relative_error);
                    show(c);
                }
                std::printf("full model: max relative error %.3e over %d seeds\n", worst, gc_seeds);
            }
            std::printf("%s\n", failures == 0 ? "gradcheck passed" : "gradcheck FAILED");
            return failures == 0 ? 0 : 1;
        } else if (*c_ablate) {
            require_file(cfg_path, "config");
            require_file(manifest_path, "manifest");
            const RunConfig cfg = load_config();
            const auto m = load_manifest(manifest_path);
            const auto res = run_ablation(cfg, m, out_dir, &std::cerr, dt_lambda, replicates);
            write_ablation_table(res, std::cout);
            std::printf("wrote %s\n", (out_dir / "ablation.csv").string().c_str());
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
