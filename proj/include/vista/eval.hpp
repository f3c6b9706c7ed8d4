#pragma once

#include "vista/pipeline.hpp"

#include <map>

namespace vista {

struct Dataset {
    std::string name;
    std::vector<MCQItem> items;
};

/// JSON-lines dataset: one item per line with fields
/// (id, question, options: [string], answer: letter, frames: [path-or-URI]).
/// Local frame paths are checked for existence relative to the dataset file.
Dataset load_dataset(const std::string& path);
Dataset parse_dataset(const std::string& text, const std::string& name,
                      const std::string& base_dir = {});

struct CategoryScore {
    long long correct = 0;
    long long total = 0;

    bool operator==(const CategoryScore&) const = default;
};

struct RunReport {
    std::string dataset_name;
    nlohmann::json config_snapshot;
    std::vector<ItemResult> items;
    long long correct = 0;
    long long total = 0;
    std::map<QuestionCategory, CategoryScore> per_category;
    long long unparseable = 0;
    long long failed = 0;
    long long wall_ms = 0;
    TokenUsage usage;

    double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
};

nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);

/// Aggregates per-item results into a report (recounts correctness flags).
RunReport build_report(const std::string& dataset_name, const nlohmann::json& config_snapshot,
                       std::vector<ItemResult> items);

struct EvalOptions {
    /// Directory receiving config.json, the items.jsonl journal and reports.
    /// Empty runs fully in memory.
    std::string out_dir;
    /// Replay completed items from an existing journal instead of rerunning.
    bool resume = false;
};

/// Runs every dataset item not already present in the resume journal and
/// aggregates accuracy (overall and per routing category).
RunReport run_eval(const Dataset& dataset, const PipelineConfig& config, Backend& backend,
                   const EvalOptions& options = {});

enum class ReportFormat { Json, Markdown, Csv };

ReportFormat parse_report_format(std::string_view name);

/// Renders the report; the markdown table carries a baseline-delta column
/// when a baseline report is supplied.
std::string emit_report(const RunReport& report, ReportFormat format,
                        const RunReport* baseline = nullptr);

struct SweepRow {
    int n_samples = 0;
    double accuracy = 0.0;
    long long chat_calls = 0;
    long long total_tokens = 0;
    long long wall_ms = 0;
};

/// Reruns the evaluation once per sample count and tabulates accuracy
/// against sampling budget (CSV via sweep_csv).
std::vector<SweepRow> run_sample_sweep(const Dataset& dataset, const PipelineConfig& base_config,
                                       Backend& backend, const std::vector<int>& sample_counts);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace vista
