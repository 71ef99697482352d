#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sonarfit/harness/evaluate.hpp"

namespace sonarfit::harness {

/// Results CSV: method, subject, k_shot, label_ratio, seed, accuracy_pct,
/// n_queries, config_hash. Rows are sorted so that the same tables give the
/// same bytes regardless of input order. label_ratio is empty outside DA and
/// k_shot is 0 for closed-set runs.
std::string results_csv(const std::vector<ResultTable>& tables);

/// Lossless JSON form of a table, used for per-run evaluation artifacts.
nlohmann::json table_to_json(const ResultTable& table);
ResultTable table_from_json(const nlohmann::json& j);

/// "da 50%", "proto k=10", "baseline".
std::string series_label(const ResultTable& table);

/// Per-subject mean ± std over seeds for every series, closed-set and
/// few-shot runs in separate blocks, plus pooled confusion matrices.
std::string summary_text(const std::vector<ResultTable>& tables);

/// Grouped bar chart: one group per subject, one bar per series (mean over
/// seeds), with a legend, as an 8-bit RGB PNG.
void write_bar_chart(const std::vector<ResultTable>& tables, const std::filesystem::path& png);

/// Writes results.csv, summary.txt and accuracy_by_subject.png into out_dir.
void report(const std::vector<ResultTable>& tables, const std::filesystem::path& out_dir);

}  // namespace sonarfit::harness
