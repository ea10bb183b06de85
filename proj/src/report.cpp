#include "ced/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace ced {

namespace fs = std::filesystem;
using nlohmann::json;

const char* const kApConvention =
    "AP: precision made non-increasing in recall (running max from high recall), "
    "recall-0 anchor at the first interpolated precision, trapezoidal rule";

std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
    return v;
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw FormatError("missing column '" + name + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) throw FormatError(where + ": unterminated quote");
    fields.push_back(std::move(cur));
    return fields;
}

}  // namespace

CsvTable read_csv(std::istream& in, const std::string& name) {
    CsvTable t;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line, name + ":" + std::to_string(lineno));
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
        } else if (fields.size() != t.header.size()) {
            throw FormatError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                              " fields, found " + std::to_string(fields.size()));
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    if (!have_header) throw FormatError(name + ": empty CSV");
    return t;
}

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    return read_csv(in, path.string());
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") == std::string::npos) {
            out << f;
            continue;
        }
        out << '"';
        for (char c : f) {
            if (c == '"') out << '"';
            out << c;
        }
        out << '"';
    }
    out << '\n';
}

void write_pr_csv(const EvalReport& r, std::ostream& out) {
    write_csv_row(out, {"dataset", "tolerance_kind", "tolerance_value", "threshold", "pooled_precision",
                        "pooled_recall", "pooled_f", "thinned"});
    for (const auto& row : r.rows) {
        for (const auto& p : row.summary.pooled) {
            write_csv_row(out, {r.dataset, row.tolerance.kind_name(), format_double(row.tolerance.value),
                                format_double(p.threshold), format_double(p.precision), format_double(p.recall),
                                format_double(p.f_measure), row.thinned ? "1" : "0"});
        }
    }
}

void write_summary_csv(const EvalReport& r, std::ostream& out) {
    out << "# " << kApConvention << "\n";
    write_csv_row(out, {"tolerance", "ODS", "OIS", "AP", "thinned_flag"});
    for (const auto& row : r.rows) {
        write_csv_row(out, {row.tolerance.label(), format_double(row.summary.ods), format_double(row.summary.ois),
                            format_double(row.summary.ap), row.thinned ? "1" : "0"});
    }
}

namespace {

json crisp_json(const CrispnessProfile& c) {
    json j = json::object();
    for (const auto& [key, list] : {std::pair{"pixel", &c.pixel}, std::pair{"millimetre", &c.millimetre}}) {
        j[key] = json::array();
        for (const auto& row : *list) j[key].push_back({{"tolerance", row.tolerance.value}, {"ods", row.ods}});
    }
    return j;
}

}  // namespace

void write_summary_json(const EvalReport& r, std::ostream& out) {
    json j;
    j["dataset"] = r.dataset;
    j["ap_convention"] = kApConvention;
    j["thresholds"] = r.thresholds;
    j["summary"] = json::array();
    for (const auto& row : r.rows) {
        j["summary"].push_back({{"tolerance", row.tolerance.label()},
                                {"tolerance_kind", row.tolerance.kind_name()},
                                {"tolerance_value", row.tolerance.value},
                                {"thinned", row.thinned},
                                {"images", row.images},
                                {"ods", row.summary.ods},
                                {"ods_threshold", row.summary.ods_threshold},
                                {"ois", row.summary.ois},
                                {"ap", row.summary.ap}});
    }
    j["crispness"] = {{"raw", crisp_json(r.crispness_raw)}};
    if (r.crispness_thinned) j["crispness"]["thinned"] = crisp_json(*r.crispness_thinned);
    j["dt_metric"] = r.dt_metric;
    j["dt_empty_predictions"] = r.dt_empty_predictions;
    out << j.dump(2) << "\n";
}

void write_crispness_csv(const EvalReport& r, std::ostream& out) {
    write_csv_row(out, {"thinned", "tolerance_kind", "tolerance_value", "ODS"});
    auto emit = [&](const CrispnessProfile& c, bool thinned) {
        for (const auto* list : {&c.pixel, &c.millimetre})
            for (const auto& row : *list)
                write_csv_row(out, {thinned ? "1" : "0", row.tolerance.kind_name(),
                                    format_double(row.tolerance.value), format_double(row.ods)});
    };
    emit(r.crispness_raw, false);
    if (r.crispness_thinned) emit(*r.crispness_thinned, true);
}

std::vector<fs::path> write_report(const EvalReport& r, const fs::path& dir) {
    fs::create_directories(dir);
    std::vector<fs::path> paths;
    auto write = [&](const char* name, void (*fn)(const EvalReport&, std::ostream&)) {
        const fs::path p = dir / name;
        std::ofstream out(p);
        if (!out) throw FormatError("cannot open " + p.string() + " for writing");
        fn(r, out);
        if (!out) throw FormatError("failed writing " + p.string());
        paths.push_back(p);
    };
    write("pr_curves.csv", write_pr_csv);
    write("summary.csv", write_summary_csv);
    write("summary.json", write_summary_json);
    write("crispness.csv", write_crispness_csv);
    return paths;
}

namespace {

bool parse_flag(const std::string& s) {
    if (s == "1") return true;
    if (s == "0") return false;
    throw FormatError("flag must be 0 or 1, got '" + s + "'");
}

Tolerance parse_label(const std::string& s) {
    for (const auto& [suffix, kind] : {std::pair{"px", ToleranceKind::Pixel}, std::pair{"mm", ToleranceKind::Millimetre}}) {
        const std::string suf = suffix;
        if (s.size() > suf.size() && s.ends_with(suf)) return {kind, parse_double(s.substr(0, s.size() - suf.size()))};
    }
    throw FormatError("bad tolerance label '" + s + "'");
}

}  // namespace

std::vector<std::string> verify_report(const fs::path& dir) {
    std::vector<std::string> problems;
    const CsvTable pr = read_csv(dir / "pr_curves.csv");
    const CsvTable sum = read_csv(dir / "summary.csv");
    const CsvTable crisp = read_csv(dir / "crispness.csv");

    // (kind, value, thinned) -> curve points in file order
    std::map<std::tuple<std::string, double, bool>, std::vector<PRPoint>> curves;
    {
        const auto ck = pr.column("tolerance_kind"), cv = pr.column("tolerance_value"), ct = pr.column("threshold"),
                   cp = pr.column("pooled_precision"), cr = pr.column("pooled_recall"), cf = pr.column("pooled_f"),
                   cth = pr.column("thinned");
        for (const auto& row : pr.rows) {
            PRPoint p{parse_double(row[ct]), parse_double(row[cp]), parse_double(row[cr]), parse_double(row[cf])};
            curves[{row[ck], parse_double(row[cv]), parse_flag(row[cth])}].push_back(p);
        }
    }

    const auto st = sum.column("tolerance"), so = sum.column("ODS"), si = sum.column("OIS"), sa = sum.column("AP"),
               sf = sum.column("thinned_flag");
    std::map<std::pair<std::string, bool>, std::tuple<double, double, double>> summary;
    for (const auto& row : sum.rows) {
        const Tolerance t = parse_label(row[st]);
        const bool thinned = parse_flag(row[sf]);
        const double ods = parse_double(row[so]), ois = parse_double(row[si]), ap = parse_double(row[sa]);
        summary[{row[st], thinned}] = {ods, ois, ap};
        const std::string what = row[st] + (thinned ? " thinned" : " raw");
        const auto it = curves.find({t.kind_name(), t.value, thinned});
        if (it == curves.end()) {
            problems.push_back(what + ": no PR curve");
            continue;
        }
        double best = 0.0;
        for (const auto& p : it->second) best = std::max(best, p.f_measure);
        if (best != ods) problems.push_back(what + ": ODS " + format_double(ods) + " != best pooled F " + format_double(best));
        const double ap2 = average_precision(it->second);
        if (std::abs(ap2 - ap) > 1e-12) problems.push_back(what + ": AP " + format_double(ap) + " != recomputed " + format_double(ap2));
        if (!(ois >= 0.0 && ois <= 1.0)) problems.push_back(what + ": OIS out of range");
    }
    if (summary.size() != curves.size()) problems.push_back("summary and PR curves cover different tolerances");

    {
        std::ifstream in(dir / "summary.json");
        if (!in) throw FormatError("cannot open " + (dir / "summary.json").string());
        json j;
        try {
            j = json::parse(in);
            if (j.at("summary").size() != sum.rows.size()) problems.push_back("summary.json row count differs from summary.csv");
            for (const auto& e : j.at("summary")) {
                const auto key = std::make_pair(e.at("tolerance").get<std::string>(), e.at("thinned").get<bool>());
                const auto it = summary.find(key);
                if (it == summary.end()) {
                    problems.push_back("summary.json row " + key.first + " missing from summary.csv");
                    continue;
                }
                const auto [ods, ois, ap] = it->second;
                if (e.at("ods").get<double>() != ods || e.at("ois").get<double>() != ois ||
                    e.at("ap").get<double>() != ap) {
                    problems.push_back("summary.json disagrees with summary.csv at " + key.first);
                }
            }
        } catch (const json::exception& e) {
            throw FormatError((dir / "summary.json").string() + ": " + e.what());
        }
    }

    {
        std::vector<CrispnessRow> raw, thinned;
        const auto ct = crisp.column("thinned"), ck = crisp.column("tolerance_kind"), cv = crisp.column("tolerance_value"),
                   co = crisp.column("ODS");
        for (const auto& row : crisp.rows) {
            const Tolerance t{row[ck] == "mm" ? ToleranceKind::Millimetre : ToleranceKind::Pixel, parse_double(row[cv])};
            (parse_flag(row[ct]) ? thinned : raw).push_back({t, parse_double(row[co])});
        }
        for (const auto* rows : {&raw, &thinned}) {
            try {
                crispness_profile(*rows);
            } catch (const std::logic_error& e) {
                problems.push_back(std::string("crispness: ") + e.what());
            }
        }
    }
    return problems;
}

void write_ablation_csv(const AblationResult& r, std::ostream& out) {
    write_csv_row(out, {"configuration", "upsample", "loc_kind", "lambda_loc", "ods_2px", "delta_vs_baseline",
                        "ods_1px", "dt_metric", "final_train_loss", "runs"});
    for (const auto& row : r.rows) {
        write_csv_row(out, {row.variant.name, to_string(row.variant.upsample), to_string(row.variant.loc_kind),
                            format_double(row.variant.lambda_loc), format_double(row.ods_2px),
                            format_double(row.delta), format_double(row.ods_1px), format_double(row.dt_metric),
                            format_double(row.final_loss), std::to_string(row.runs.size())});
    }
}

void write_ablation_runs_csv(const AblationResult& r, std::ostream& out) {
    write_csv_row(out, {"configuration", "seed", "ods_2px", "ods_1px", "dt_metric", "final_train_loss"});
    for (const auto& row : r.rows)
        for (const auto& run : row.runs)
            write_csv_row(out, {row.variant.name, std::to_string(run.seed), format_double(run.ods_2px),
                                format_double(run.ods_1px), format_double(run.dt_metric),
                                format_double(run.final_loss)});
}

void write_ablation_table(const AblationResult& r, std::ostream& out) {
    auto fixed = [](double v, int digits) {
        std::ostringstream s;
        s.setf(std::ios::fixed);
        s.precision(digits);
        s << v;
        return s.str();
    };
    out << "| Configuration | ODS (2px) | Δ vs. baseline | ODS (1px) | DT metric |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto& row : r.rows) {
        const std::string delta = row.variant.name == r.baseline ? "baseline"
                                                                 : (row.delta >= 0 ? "+" : "") + fixed(row.delta, 4);
        out << "| " << row.variant.name << " | " << fixed(row.ods_2px, 4) << " | " << delta << " | "
            << fixed(row.ods_1px, 4) << " | " << fixed(row.dt_metric, 4) << " |\n";
    }
}

}  // namespace ced
