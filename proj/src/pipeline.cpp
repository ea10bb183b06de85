#include "ced/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ced/random.hpp"
#include "ced/report.hpp"

namespace ced {

namespace fs = std::filesystem;

std::vector<TrainSample> load_samples(const DatasetManifest& m, std::optional<Split> split, const ModelConfig& cfg,
                                      std::ostream* warn) {
    std::vector<TrainSample> out;
    const int mult = cfg.size_multiple();
    for (const auto& r : m.records) {
        if (split && r.split != *split) continue;
        Tensor image = load_image(r.image_path);
        if (image.channels() != cfg.in_channels) {
            throw FormatError("record '" + r.id + "': image has " + std::to_string(image.channels()) +
                              " channels, model expects " + std::to_string(cfg.in_channels));
        }
        if (image.height() % mult != 0 || image.width() % mult != 0) {
            throw FormatError("record '" + r.id + "': image " + image.shape().str() +
                              " is not a multiple of " + std::to_string(mult) + " for training");
        }
        BinaryMap gt = load_ground_truth(r);
        if (gt.height() != image.height() || gt.width() != image.width()) {
            throw FormatError("record '" + r.id + "': ground truth size differs from the image");
        }
        const std::size_t on = gt.count();
        if (on == 0 || on == gt.size()) {
            if (warn) {
                *warn << "warning: skipping record '" << r.id << "': ground-truth boundary is all "
                      << (on == 0 ? "off" : "on") << " and the balanced loss vanishes\n";
            }
            continue;
        }
        out.push_back({r.id, std::move(image), GroundTruth(std::move(gt))});
    }
    return out;
}

void write_train_log_header(std::ostream& out, std::size_t terms) {
    out << "step,image_id,loss";
    for (std::size_t i = 0; i < terms; ++i) out << ",term" << i;
    out << ",grad_norm,clipped\n";
}

void write_train_log_row(std::ostream& out, const TrainLogRow& row) {
    out << row.step << "," << row.image_id << "," << format_double(row.loss);
    for (double t : row.terms) out << "," << format_double(t);
    out << "," << format_double(row.grad_norm) << "," << (row.clipped ? 1 : 0) << "\n";
}

namespace {

double global_norm(Model& grads) {
    double s = 0.0;
    for (auto& [name, p] : grads.parameters()) {
        for (float v : p->kernel) s += static_cast<double>(v) * v;
        for (float v : p->bias) s += static_cast<double>(v) * v;
    }
    return std::sqrt(s);
}

void scale(Model& grads, double factor) {
    for (auto& [name, p] : grads.parameters()) {
        for (auto& v : p->kernel) v = static_cast<float>(v * factor);
        for (auto& v : p->bias) v = static_cast<float>(v * factor);
    }
}

}  // namespace

TrainResult train(const RunConfig& cfg, const std::vector<TrainSample>& samples, std::ostream* log_csv) {
    if (samples.empty()) throw std::invalid_argument("train: no usable training images");
    cfg.model.validate();
    cfg.loss.validate(cfg.model.num_outputs());

    TrainResult res;
    res.model = Model::build(cfg.model);
    he_init(res.model, cfg.train.seed);
    Model velocity = Model::build(cfg.model);

    // Separate stream for the visiting order so it does not shift the weights.
    Rng order_rng(cfg.train.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(samples.size());
    const std::size_t terms = cfg.model.num_outputs() + 1;
    if (log_csv) write_train_log_header(*log_csv, terms);

    for (int step = 0; step < cfg.train.steps; ++step) {
        const std::size_t k = static_cast<std::size_t>(step) % samples.size();
        if (k == 0) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        }
        const TrainSample& s = samples[order[k]];
        const auto fr = ced_forward(s.image, res.model);
        for (const auto& l : fr.trace.logits)
            for (float v : l.data())
                if (!std::isfinite(v))
                    throw TrainingError("non-finite output at step " + std::to_string(step) + " on image '" + s.id +
                                        "'");
        auto tl = total_loss(fr.trace.logits, s.gt, cfg.loss);
        if (!std::isfinite(tl.loss)) {
            throw TrainingError("non-finite loss at step " + std::to_string(step) + " on image '" + s.id + "'");
        }
        Model grads = ced_backward(res.model, fr.trace, tl.grads);
        TrainLogRow row{step, s.id, tl.loss, tl.terms, global_norm(grads), false};
        if (cfg.train.clip_norm > 0.0 && row.grad_norm > cfg.train.clip_norm) {
            scale(grads, cfg.train.clip_norm / row.grad_norm);
            row.clipped = true;
        }
        sgd_momentum_step(res.model, grads, cfg.train.lr, cfg.train.momentum, velocity);
        if (log_csv) write_train_log_row(*log_csv, row);
        res.log.push_back(std::move(row));
    }
    return res;
}

Tensor predict(const Model& model, const Tensor& image) {
    const int mult = model.config.size_multiple();
    const int h = image.height(), w = image.width(), c = image.channels();
    const int ph = (h + mult - 1) / mult * mult, pw = (w + mult - 1) / mult * mult;
    if (ph == h && pw == w) return ced_forward(image, model).final;
    Tensor padded(ph, pw, c);
    for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
            for (int ch = 0; ch < c; ++ch) padded.at(y, x, ch) = image.at(std::min(y, h - 1), std::min(x, w - 1), ch);
    const Tensor full = ced_forward(padded, model).final;
    Tensor out(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x, 0) = full.at(y, x, 0);
    return out;
}

Tensor postprocess(const Tensor& prob, PostProcess mode, double threshold) {
    switch (mode) {
        case PostProcess::None: return prob;
        case PostProcess::Nms: return nms_edges(prob);
        case PostProcess::Thin: {
            const BinaryMap skel = thin(BinaryMap::threshold(prob, static_cast<float>(threshold)));
            Tensor out(prob.height(), prob.width(), 1);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = skel[i] ? prob[i] : 0.0f;
            return out;
        }
    }
    return prob;
}

namespace {

std::string extension(ImageFormat f) { return f == ImageFormat::Cedf ? ".cedf" : ".pgm"; }

}  // namespace

std::vector<fs::path> predict_dataset(const Model& model, const DatasetManifest& m, const fs::path& out_dir,
                                      PostProcess mode, double threshold, ImageFormat format) {
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    for (const auto& r : m.records) {
        const Tensor image = load_image(r.image_path);
        if (image.channels() != model.config.in_channels) {
            throw FormatError("record '" + r.id + "': image has " + std::to_string(image.channels()) +
                              " channels, model expects " + std::to_string(model.config.in_channels));
        }
        const Tensor prob = postprocess(predict(model, image), mode, threshold);
        const fs::path path = out_dir / (r.id + extension(format));
        save_edge_map(prob, path, format);
        written.push_back(path);
    }
    return written;
}

std::vector<fs::path> extract_boundaries(const DatasetManifest& m, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    for (const auto& r : m.records) {
        if (!r.gt_mask_path) continue;
        const fs::path path = out_dir / (r.id + ".pgm");
        save_binary_map(boundary_from_mask(load_binary_map(*r.gt_mask_path)), path);
        written.push_back(path);
    }
    return written;
}

fs::path find_prediction(const fs::path& pred_dir, const std::string& id) {
    for (const char* ext : {".cedf", ".pgm"}) {
        const fs::path p = pred_dir / (id + ext);
        if (fs::exists(p)) return p;
    }
    throw FormatError("no prediction for record '" + id + "' in " + pred_dir.string() + " (expected " + id +
                      ".cedf or " + id + ".pgm)");
}

std::vector<EvalItem> load_eval_items(const DatasetManifest& m, const fs::path& pred_dir, std::optional<Split> split) {
    std::vector<EvalItem> items;
    for (const auto& r : m.records) {
        if (split && r.split != *split) continue;
        const fs::path p = find_prediction(pred_dir, r.id);
        Tensor prob = load_image(p);
        BinaryMap gt = load_ground_truth(r);
        if (prob.channels() != 1 || prob.height() != gt.height() || prob.width() != gt.width()) {
            throw FormatError("record '" + r.id + "': prediction " + prob.shape().str() +
                              " does not match ground truth " + std::to_string(gt.height()) + "x" +
                              std::to_string(gt.width()));
        }
        for (float v : prob.data()) {
            if (!(v >= 0.0f && v <= 1.0f)) throw FormatError("record '" + r.id + "': prediction outside [0, 1]");
        }
        items.push_back({r.id, std::move(prob), std::move(gt), r.spacing});
    }
    if (items.empty()) throw std::invalid_argument("eval: no records selected");
    return items;
}

const SummaryRow* EvalReport::find(const Tolerance& t, bool thinned) const {
    for (const auto& r : rows)
        if (r.tolerance == t && r.thinned == thinned) return &r;
    return nullptr;
}

EvalReport evaluate(const std::vector<EvalItem>& items, const EvalConfig& cfg, const std::string& dataset,
                    double bin_threshold) {
    cfg.validate();
    EvalReport rep;
    rep.dataset = dataset;
    rep.thresholds = cfg.threshold_values();

    const std::vector<bool> passes = cfg.apply_thinning ? std::vector<bool>{false, true} : std::vector<bool>{false};
    for (bool thinned : passes) {
        // Per tolerance: one count vector per image that was evaluated at it.
        std::vector<Tolerance> order;
        std::map<std::pair<int, double>, std::vector<std::vector<MatchCounts>>> counts;
        for (const auto& item : items) {
            for (auto& curve : pr_curve(item.prob, item.gt, cfg, item.spacing, thinned)) {
                const auto key = std::make_pair(static_cast<int>(curve.tolerance.kind), curve.tolerance.value);
                if (!counts.contains(key)) order.push_back(curve.tolerance);
                counts[key].push_back(std::move(curve.counts));
            }
        }
        // Pixel tolerances first, each kind in configured order.
        std::stable_sort(order.begin(), order.end(),
                         [](const Tolerance& a, const Tolerance& b) { return a.kind < b.kind; });
        std::vector<CrispnessRow> crisp;
        for (const auto& t : order) {
            const auto& per_image = counts[{static_cast<int>(t.kind), t.value}];
            SummaryRow row{t, thinned, per_image.size(), dataset_summary(per_image, rep.thresholds)};
            crisp.push_back({t, row.summary.ods});
            rep.rows.push_back(std::move(row));
        }
        if (thinned) {
            rep.crispness_thinned = crispness_profile(crisp);
        } else {
            rep.crispness_raw = crispness_profile(crisp);
        }
    }

    double dt_sum = 0.0;
    for (const auto& item : items) {
        const auto dm = distance_transform_metric(item.prob, GroundTruth(item.gt), bin_threshold);
        dt_sum += dm.value;
        if (dm.empty_prediction) ++rep.dt_empty_predictions;
    }
    rep.dt_metric = dt_sum / static_cast<double>(items.size());
    return rep;
}

const AblationRow& AblationResult::row(const std::string& name) const {
    for (const auto& r : rows)
        if (r.variant.name == name) return r;
    throw std::out_of_range("no ablation row '" + name + "'");
}

std::vector<AblationVariant> ablation_variants(const RunConfig& cfg, double default_dt_lambda) {
    const double lambda = cfg.loss.loc_kind == LocKind::DistanceTransform && cfg.loss.lambda_loc > 0.0
                              ? cfg.loss.lambda_loc
                              : default_dt_lambda;
    return {
        {"bilinear", UpsampleKind::Bilinear, LocKind::None, 0.0},
        {"transposed", UpsampleKind::Transposed, LocKind::None, 0.0},
        {"subpixel", UpsampleKind::SubPixel, LocKind::None, 0.0},
        {"subpixel+dt", UpsampleKind::SubPixel, LocKind::DistanceTransform, lambda},
    };
}

AblationResult run_ablation(const RunConfig& cfg, const DatasetManifest& m, const fs::path& out_dir,
                            std::ostream* progress, double default_dt_lambda, int replicates) {
    if (replicates < 1) throw std::invalid_argument("ablate: replicates must be >= 1");
    fs::create_directories(out_dir);
    const auto train_samples = load_samples(m, Split::Train, cfg.model, progress);
    if (train_samples.empty()) throw std::invalid_argument("ablate: manifest has no usable train records");
    std::vector<EvalItem> test_items;
    for (const auto& r : m.records) {
        if (r.split != Split::Test) continue;
        test_items.push_back({r.id, load_image(r.image_path), load_ground_truth(r), r.spacing});
    }
    if (test_items.empty()) throw std::invalid_argument("ablate: manifest has no test records");

    EvalConfig ev = cfg.eval;
    ev.tol_px = {2.0, 1.0};
    ev.tol_mm.clear();
    ev.apply_thinning = false;

    AblationResult res;
    res.baseline = "bilinear";
    for (const auto& v : ablation_variants(cfg, default_dt_lambda)) {
        AblationRow row;
        row.variant = v;
        for (int k = 0; k < replicates; ++k) {
            RunConfig vc = cfg;
            vc.model.upsample = v.upsample;
            vc.loss.loc_kind = v.loc_kind;
            vc.loss.lambda_loc = v.lambda_loc;
            vc.train.seed = cfg.train.seed + static_cast<std::uint64_t>(k);
            const std::string stem =
                replicates == 1 ? v.name : v.name + "_seed" + std::to_string(vc.train.seed);
            if (progress) {
                *progress << "ablate: training " << v.name << " seed " << vc.train.seed << " (" << vc.train.steps
                          << " steps)\n";
            }
            std::ofstream log(out_dir / (stem + "_train_log.csv"));
            const TrainResult tr = train(vc, train_samples, &log);
            save_checkpoint(tr.model, out_dir / (stem + ".ced"));

            std::vector<EvalItem> items = test_items;
            for (auto& item : items) item.prob = predict(tr.model, item.prob);
            const EvalReport rep = evaluate(items, ev, m.name, cfg.bin_threshold);

            AblationRun run;
            run.seed = vc.train.seed;
            run.ods_2px = rep.find({ToleranceKind::Pixel, 2.0}, false)->summary.ods;
            run.ods_1px = rep.find({ToleranceKind::Pixel, 1.0}, false)->summary.ods;
            run.dt_metric = rep.dt_metric;
            const std::size_t tail = std::min(train_samples.size(), tr.log.size());
            double sum = 0.0;
            for (std::size_t i = tr.log.size() - tail; i < tr.log.size(); ++i) sum += tr.log[i].loss;
            run.final_loss = tail > 0 ? sum / static_cast<double>(tail) : 0.0;
            if (progress) {
                *progress << "ablate: " << v.name << " seed " << run.seed << " ODS(2px) " << run.ods_2px
                          << " ODS(1px) " << run.ods_1px << " DT " << run.dt_metric << "\n";
            }
            row.ods_2px += run.ods_2px / replicates;
            row.ods_1px += run.ods_1px / replicates;
            row.dt_metric += run.dt_metric / replicates;
            row.final_loss += run.final_loss / replicates;
            row.runs.push_back(run);
        }
        res.rows.push_back(row);
    }
    const double base = res.row(res.baseline).ods_2px;
    for (auto& r : res.rows) r.delta = r.ods_2px - base;

    std::ofstream csv(out_dir / "ablation.csv");
    write_ablation_csv(res, csv);
    std::ofstream runs(out_dir / "ablation_runs.csv");
    write_ablation_runs_csv(res, runs);
    std::ofstream md(out_dir / "ablation.md");
    write_ablation_table(res, md);
    return res;
}

}  // namespace ced
