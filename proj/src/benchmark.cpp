#include "ced/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ced {

std::string Tolerance::label() const {
    std::ostringstream os;
    os << value << kind_name();
    return os.str();
}

std::vector<double> EvalConfig::threshold_values() const {
    std::vector<double> t(static_cast<std::size_t>(thresholds));
    for (int k = 0; k < thresholds; ++k) t[k] = static_cast<double>(k + 1) / (thresholds + 1);
    return t;
}

std::vector<Tolerance> EvalConfig::tolerances() const {
    std::vector<Tolerance> out;
    for (double t : tol_px) out.push_back({ToleranceKind::Pixel, t});
    for (double t : tol_mm) out.push_back({ToleranceKind::Millimetre, t});
    return out;
}

void EvalConfig::validate() const {
    if (thresholds < 2) throw std::invalid_argument("eval: thresholds must be >= 2");
    for (double t : tol_px)
        if (!(t > 0.0)) throw std::invalid_argument("eval: pixel tolerances must be > 0");
    for (double t : tol_mm)
        if (!(t > 0.0)) throw std::invalid_argument("eval: millimetre tolerances must be > 0");
}

double MatchCounts::precision() const {
    const long n = tp_pred + fp;
    return n > 0 ? static_cast<double>(tp_pred) / n : 0.0;
}

double MatchCounts::recall() const {
    const long n = tp_gt + fn;
    return n > 0 ? static_cast<double>(tp_gt) / n : 0.0;
}

double MatchCounts::f_measure() const {
    // 2PR/(P+R) with P = tp/npred and R = tp/ngt reduces to 2tp/(npred+ngt).
    const long denom = tp_pred + fp + tp_gt + fn;
    return denom > 0 && tp_pred > 0 ? 2.0 * static_cast<double>(tp_pred) / denom : 0.0;
}

double f_measure(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

PRPoint make_point(double threshold, const MatchCounts& c) {
    return {threshold, c.precision(), c.recall(), c.f_measure()};
}

double AdmissibilityRule::distance(int dy, int dx) const {
    if (spacing) {
        const double my = dy * spacing->row_mm, mx = dx * spacing->col_mm;
        return std::sqrt(my * my + mx * mx);
    }
    return std::sqrt(static_cast<double>(dy) * dy + static_cast<double>(dx) * dx);
}

bool AdmissibilityRule::admits(int dy, int dx) const {
    if (spacing) {
        const double my = dy * spacing->row_mm, mx = dx * spacing->col_mm;
        return my * my + mx * mx <= tolerance * tolerance;
    }
    return static_cast<double>(dy) * dy + static_cast<double>(dx) * dx <= tolerance * tolerance;
}

int AdmissibilityRule::radius_rows() const {
    // One extra ring absorbs rounding in the division; admits() is authoritative.
    return static_cast<int>(std::floor(tolerance / (spacing ? spacing->row_mm : 1.0))) + 1;
}

int AdmissibilityRule::radius_cols() const {
    return static_cast<int>(std::floor(tolerance / (spacing ? spacing->col_mm : 1.0))) + 1;
}

AdmissibilityRule px_rule(double tol_px) {
    if (!(tol_px > 0.0)) throw std::invalid_argument("tolerance must be > 0");
    return {tol_px, std::nullopt};
}

AdmissibilityRule mm_to_px(double tol_mm, const Spacing& spacing) {
    if (!(tol_mm > 0.0)) throw std::invalid_argument("tolerance must be > 0");
    if (!(spacing.row_mm > 0.0 && spacing.col_mm > 0.0)) throw std::invalid_argument("spacing must be positive");
    return {tol_mm, spacing};
}

namespace {

// Hopcroft-Karp over a CSR bipartite graph; iterative augmenting search.
class HopcroftKarp {
public:
    HopcroftKarp(int n_left, int n_right, std::vector<int> offsets, std::vector<int> edges)
        : nl_(n_left), nr_(n_right), off_(std::move(offsets)), adj_(std::move(edges)),
          match_l_(static_cast<std::size_t>(n_left), -1), match_r_(static_cast<std::size_t>(n_right), -1),
          dist_(static_cast<std::size_t>(n_left)), it_(static_cast<std::size_t>(n_left)) {}

    int run() {
        int matched = 0;
        // Greedy warm start.
        for (int u = 0; u < nl_; ++u)
            for (int e = off_[u]; e < off_[u + 1]; ++e)
                if (match_r_[adj_[e]] < 0) {
                    match_l_[u] = adj_[e];
                    match_r_[adj_[e]] = u;
                    ++matched;
                    break;
                }
        while (bfs()) {
            for (int u = 0; u < nl_; ++u) it_[u] = off_[u];
            for (int u = 0; u < nl_; ++u)
                if (match_l_[u] < 0 && augment(u)) ++matched;
        }
        return matched;
    }

private:
    static constexpr int kInf = std::numeric_limits<int>::max();

    bool bfs() {
        std::vector<int> queue;
        queue.reserve(static_cast<std::size_t>(nl_));
        for (int u = 0; u < nl_; ++u) {
            if (match_l_[u] < 0) {
                dist_[u] = 0;
                queue.push_back(u);
            } else {
                dist_[u] = kInf;
            }
        }
        bool found = false;
        for (std::size_t h = 0; h < queue.size(); ++h) {
            const int u = queue[h];
            for (int e = off_[u]; e < off_[u + 1]; ++e) {
                const int w = match_r_[adj_[e]];
                if (w < 0) {
                    found = true;
                } else if (dist_[w] == kInf) {
                    dist_[w] = dist_[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        return found;
    }

    bool augment(int root) {
        std::vector<int> stack{root};
        while (!stack.empty()) {
            const int u = stack.back();
            bool advanced = false;
            for (int& e = it_[u]; e < off_[u + 1]; ++e) {
                const int v = adj_[e];
                const int w = match_r_[v];
                if (w < 0) {
                    // Free right vertex: flip the alternating path on the stack.
                    for (auto s = stack.rbegin(); s != stack.rend(); ++s) {
                        const int lu = *s;
                        const int rv = adj_[it_[lu]];
                        match_l_[lu] = rv;
                        match_r_[rv] = lu;
                    }
                    return true;
                }
                if (dist_[w] == dist_[u] + 1) {
                    stack.push_back(w);
                    advanced = true;
                    break;
                }
            }
            if (!advanced) {
                dist_[u] = kInf;
                stack.pop_back();
                if (!stack.empty()) ++it_[stack.back()];
            }
        }
        return false;
    }

    int nl_, nr_;
    std::vector<int> off_, adj_;
    std::vector<int> match_l_, match_r_;
    std::vector<int> dist_, it_;
};

}  // namespace

MatchCounts match_boundaries(const BinaryMap& pred, const BinaryMap& gt, const AdmissibilityRule& rule) {
    if (pred.height() != gt.height() || pred.width() != gt.width()) {
        throw ShapeError("match_boundaries: prediction " + std::to_string(pred.height()) + "x" +
                         std::to_string(pred.width()) + " vs ground truth " + std::to_string(gt.height()) + "x" +
                         std::to_string(gt.width()));
    }
    const int H = gt.height(), W = gt.width();
    std::vector<int> gt_index(gt.size(), -1);
    int n_gt = 0;
    for (std::size_t i = 0; i < gt.size(); ++i)
        if (gt[i]) gt_index[i] = n_gt++;

    // Admissible offsets, nearest first.
    const int ry = std::min(rule.radius_rows(), H), rx = std::min(rule.radius_cols(), W);
    std::vector<std::pair<int, int>> offsets;
    for (int dy = -ry; dy <= ry; ++dy)
        for (int dx = -rx; dx <= rx; ++dx)
            if (rule.admits(dy, dx)) offsets.emplace_back(dy, dx);
    std::stable_sort(offsets.begin(), offsets.end(), [&](auto a, auto b) {
        return rule.distance(a.first, a.second) < rule.distance(b.first, b.second);
    });

    std::vector<int> off{0};
    std::vector<int> adj;
    int n_pred = 0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!pred.get(y, x)) continue;
            ++n_pred;
            for (auto [dy, dx] : offsets) {
                const int ny = y + dy, nx = x + dx;
                if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
                const int g = gt_index[static_cast<std::size_t>(ny) * W + nx];
                if (g >= 0) adj.push_back(g);
            }
            off.push_back(static_cast<int>(adj.size()));
        }

    const int matched = HopcroftKarp(n_pred, n_gt, std::move(off), std::move(adj)).run();
    return MatchCounts{matched, n_pred - matched, matched, n_gt - matched};
}

MatchCounts match_boundaries(const BinaryMap& pred, const BinaryMap& gt, double tol,
                             std::optional<Spacing> spacing) {
    return match_boundaries(pred, gt, spacing ? mm_to_px(tol, *spacing) : px_rule(tol));
}

std::vector<ToleranceCurve> pr_curve(const Tensor& prob, const BinaryMap& gt, const EvalConfig& cfg,
                                     std::optional<Spacing> spacing, bool thinned) {
    cfg.validate();
    if (prob.channels() != 1 || prob.height() != gt.height() || prob.width() != gt.width()) {
        throw ShapeError("pr_curve: prediction " + prob.shape().str() + " does not match ground truth " +
                         std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
    }
    for (float v : prob.data())
        if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("pr_curve: probabilities must lie in [0, 1]");

    const auto thresholds = cfg.threshold_values();
    std::vector<ToleranceCurve> curves;
    std::vector<AdmissibilityRule> rules;
    for (const auto& tol : cfg.tolerances()) {
        if (tol.kind == ToleranceKind::Millimetre) {
            if (!spacing) continue;
            rules.push_back(mm_to_px(tol.value, *spacing));
        } else {
            rules.push_back(px_rule(tol.value));
        }
        curves.push_back({tol, {}, {}});
    }
    for (double t : thresholds) {
        BinaryMap pred = BinaryMap::threshold(prob, static_cast<float>(t));
        if (thinned) pred = thin(pred);
        for (std::size_t i = 0; i < curves.size(); ++i) {
            const MatchCounts c = match_boundaries(pred, gt, rules[i]);
            curves[i].counts.push_back(c);
            curves[i].points.push_back(make_point(t, c));
        }
    }
    return curves;
}

double average_precision(std::vector<PRPoint> points) {
    if (points.empty()) return 0.0;
    std::stable_sort(points.begin(), points.end(), [](const PRPoint& a, const PRPoint& b) {
        return a.recall < b.recall;
    });
    // Running max from the high-recall end.
    for (std::size_t i = points.size() - 1; i-- > 0;)
        points[i].precision = std::max(points[i].precision, points[i + 1].precision);
    double area = 0.0;
    double prev_r = 0.0, prev_p = points.front().precision;
    for (const auto& p : points) {
        area += (p.recall - prev_r) * 0.5 * (p.precision + prev_p);
        prev_r = p.recall;
        prev_p = p.precision;
    }
    return area;
}

DatasetSummary dataset_summary(const std::vector<std::vector<MatchCounts>>& per_image,
                               const std::vector<double>& thresholds) {
    if (per_image.empty()) throw std::invalid_argument("dataset_summary: empty dataset");
    const std::size_t K = thresholds.size();
    for (const auto& img : per_image)
        if (img.size() != K) throw std::invalid_argument("dataset_summary: per-image threshold count mismatch");

    DatasetSummary s;
    std::vector<MatchCounts> pooled(K);
    double ois_sum = 0.0;
    for (const auto& img : per_image) {
        double best = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            pooled[k] += img[k];
            best = std::max(best, img[k].f_measure());
        }
        ois_sum += best;
    }
    s.ois = ois_sum / static_cast<double>(per_image.size());
    for (std::size_t k = 0; k < K; ++k) {
        s.pooled.push_back(make_point(thresholds[k], pooled[k]));
        if (k == 0 || pooled[k].f_measure() > s.ods) {
            s.ods = pooled[k].f_measure();
            s.ods_threshold = thresholds[k];
        }
    }
    s.ap = average_precision(s.pooled);
    return s;
}

CrispnessProfile crispness_profile(const std::vector<CrispnessRow>& rows) {
    CrispnessProfile p;
    for (const auto& r : rows) (r.tolerance.kind == ToleranceKind::Pixel ? p.pixel : p.millimetre).push_back(r);
    auto order = [](std::vector<CrispnessRow>& v) {
        std::stable_sort(v.begin(), v.end(), [](const CrispnessRow& a, const CrispnessRow& b) {
            return a.tolerance.value > b.tolerance.value;
        });
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (v[i].ods > v[i - 1].ods) {
                throw std::logic_error("crispness profile not monotone: ODS " + std::to_string(v[i].ods) + " at " +
                                       v[i].tolerance.label() + " exceeds " + std::to_string(v[i - 1].ods) +
                                       " at " + v[i - 1].tolerance.label());
            }
        }
    };
    order(p.pixel);
    order(p.millimetre);
    return p;
}

}  // namespace ced
