#pragma once

// Report files written by `eval` and `ablate`, and the reader behind the
// report self-check.
//
//   pr_curves.csv   dataset, tolerance_kind, tolerance_value, threshold,
//                   pooled_precision, pooled_recall, pooled_f, thinned
//   summary.csv     tolerance, ODS, OIS, AP, thinned_flag
//   summary.json    the summary plus ODS thresholds, DT metric, crispness
//   crispness.csv   thinned, tolerance_kind, tolerance_value, ODS
//
// Numbers use the shortest decimal form that reads back to the same double.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ced/pipeline.hpp"

namespace ced {

std::string format_double(double v);
double parse_double(const std::string& s);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by name; throws FormatError when absent.
    std::size_t column(const std::string& name) const;
};

/// Comma-separated with optional double-quoted fields; lines starting with
/// '#' are comments. Every row must have as many fields as the header.
CsvTable read_csv(std::istream& in, const std::string& name = "<csv>");
CsvTable read_csv(const std::filesystem::path& path);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

extern const char* const kApConvention;

void write_pr_csv(const EvalReport& r, std::ostream& out);
void write_summary_csv(const EvalReport& r, std::ostream& out);
void write_summary_json(const EvalReport& r, std::ostream& out);
void write_crispness_csv(const EvalReport& r, std::ostream& out);

/// Writes the four report files into `dir` and returns their paths.
std::vector<std::filesystem::path> write_report(const EvalReport& r, const std::filesystem::path& dir);

/// Re-reads a report directory and cross-checks it: every summary ODS equals
/// the best pooled F of its curve, AP equals the area recomputed from the
/// curve, OIS lies in [0, 1], the JSON mirror agrees with the CSV, and each
/// crispness profile is monotone. Returns the problems found (empty when the
/// report is consistent); throws FormatError when a file cannot be parsed.
std::vector<std::string> verify_report(const std::filesystem::path& dir);

void write_ablation_csv(const AblationResult& r, std::ostream& out);
/// One row per (variant, training seed).
void write_ablation_runs_csv(const AblationResult& r, std::ostream& out);
/// Markdown table: Configuration, ODS (2px), Δ vs. baseline, ODS (1px), DT metric.
void write_ablation_table(const AblationResult& r, std::ostream& out);

}  // namespace ced
