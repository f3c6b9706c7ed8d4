#include "vista/eval.hpp"

#include "vista/util.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace vista {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool is_uri(const std::string& ref) { return ref.find("://") != std::string::npos; }

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return std::string(buf);
}

}  // namespace

Dataset parse_dataset(const std::string& text, const std::string& name,
                      const std::string& base_dir) {
    Dataset dataset;
    dataset.name = name;
    std::set<std::string> ids;
    int line_number = 0;
    for (const auto& line : split_lines(text)) {
        ++line_number;
        if (trim(line).empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& ex) {
            throw SchemaError("dataset line " + std::to_string(line_number) +
                              ": invalid JSON: " + ex.what());
        }
        MCQItem item;
        try {
            item = mcq_item_from_json(record);
        } catch (const SchemaError& ex) {
            throw SchemaError("dataset line " + std::to_string(line_number) + ": " + ex.what());
        }
        if (!ids.insert(item.id).second) {
            throw SchemaError("dataset line " + std::to_string(line_number) + ": duplicate id '" +
                              item.id + "'");
        }
        for (const auto& ref : item.media) {
            if (is_uri(ref)) continue;
            fs::path p(ref);
            if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
            if (!fs::exists(p)) {
                throw SchemaError("dataset line " + std::to_string(line_number) + ": frame '" +
                                  ref + "' does not exist");
            }
        }
        dataset.items.push_back(std::move(item));
    }
    return dataset;
}

Dataset load_dataset(const std::string& path) {
    const fs::path p(path);
    return parse_dataset(read_file(path), p.stem().string(), p.parent_path().string());
}

RunReport build_report(const std::string& dataset_name, const json& config_snapshot,
                       std::vector<ItemResult> items) {
    RunReport report;
    report.dataset_name = dataset_name;
    report.config_snapshot = config_snapshot;
    report.total = static_cast<long long>(items.size());
    for (const auto& item : items) {
        if (item.correct.value_or(false)) ++report.correct;
        if (!item.extracted && !item.failed) ++report.unparseable;
        if (item.failed) ++report.failed;
        auto& bucket = report.per_category[item.report_category()];
        ++bucket.total;
        if (item.correct.value_or(false)) ++bucket.correct;
        report.wall_ms += item.wall_ms;
        report.usage += item.usage;
    }
    report.items = std::move(items);
    return report;
}

json to_json(const RunReport& report) {
    json j;
    j["dataset"] = report.dataset_name;
    j["config"] = report.config_snapshot;
    j["correct"] = report.correct;
    j["total"] = report.total;
    j["accuracy"] = report.accuracy();
    json per_category = json::object();
    for (const auto& [category, score] : report.per_category) {
        per_category[std::string(category_name(category))] =
            json{{"correct", score.correct}, {"total", score.total}};
    }
    j["per_category"] = std::move(per_category);
    j["unparseable"] = report.unparseable;
    j["failed"] = report.failed;
    j["wall_ms"] = report.wall_ms;
    j["usage"] = to_json(report.usage);
    json items = json::array();
    for (const auto& item : report.items) items.push_back(to_json(item));
    j["items"] = std::move(items);
    return j;
}

RunReport run_report_from_json(const json& j) {
    std::vector<ItemResult> items;
    for (const auto& record : j.at("items")) items.push_back(item_result_from_json(record));
    RunReport report = build_report(j.at("dataset").get<std::string>(), j.at("config"),
                                    std::move(items));
    // aggregates are recomputed from the items; verify the document agrees
    if (report.correct != j.at("correct").get<long long>() ||
        report.total != j.at("total").get<long long>()) {
        throw SchemaError("report document aggregates disagree with its items");
    }
    return report;
}

RunReport run_eval(const Dataset& dataset, const PipelineConfig& config, Backend& backend,
                   const EvalOptions& options) {
    if (dataset.items.empty()) {
        throw PreconditionError("dataset '" + dataset.name + "' has no items");
    }

    std::map<std::string, ItemResult> completed;
    fs::path journal_path;
    if (!options.out_dir.empty()) {
        fs::create_directories(options.out_dir);
        journal_path = fs::path(options.out_dir) / "items.jsonl";
        if (fs::exists(journal_path)) {
            if (!options.resume) {
                throw VistaError("journal " + journal_path.string() +
                                 " already exists; pass resume or choose a fresh out dir");
            }
            for (const auto& line : split_lines(read_file(journal_path.string()))) {
                if (trim(line).empty()) continue;
                ItemResult result = item_result_from_json(json::parse(line));
                completed.emplace(result.item_id, std::move(result));
            }
        }
        write_file((fs::path(options.out_dir) / "config.json").string(),
                   config.snapshot().dump(2) + "\n");
    }

    std::vector<MCQItem> pending;
    for (const auto& item : dataset.items) {
        if (!completed.count(item.id)) pending.push_back(item);
    }

    std::ofstream journal;
    if (!journal_path.empty()) {
        journal.open(journal_path, std::ios::app);
        if (!journal) throw VistaError("cannot open journal " + journal_path.string());
    }
    auto commit = [&](const ItemResult& result) {
        if (journal.is_open()) {
            journal << to_json(result).dump() << '\n';
            journal.flush();
        }
    };

    std::vector<ItemResult> fresh = run_items(pending, config, backend, commit);

    std::map<std::string, ItemResult> by_id = std::move(completed);
    for (auto& result : fresh) by_id.emplace(result.item_id, std::move(result));

    std::vector<ItemResult> ordered;
    ordered.reserve(dataset.items.size());
    for (const auto& item : dataset.items) {
        auto it = by_id.find(item.id);
        if (it == by_id.end()) throw VistaError("missing result for item '" + item.id + "'");
        ordered.push_back(std::move(it->second));
    }

    RunReport report = build_report(dataset.name, config.snapshot(), std::move(ordered));
    if (!options.out_dir.empty()) {
        write_file((fs::path(options.out_dir) / "report.json").string(),
                   to_json(report).dump(2) + "\n");
    }
    return report;
}

ReportFormat parse_report_format(std::string_view name) {
    if (name == "json") return ReportFormat::Json;
    if (name == "md" || name == "markdown") return ReportFormat::Markdown;
    if (name == "csv") return ReportFormat::Csv;
    throw SchemaError("unknown report format: '" + std::string(name) + "'");
}

namespace {

std::string accuracy_percent(const CategoryScore& score) {
    if (score.total == 0) return "-";
    return format_fixed(100.0 * static_cast<double>(score.correct) /
                            static_cast<double>(score.total),
                        1);
}

std::string delta_cell(double accuracy, double baseline) {
    const double delta = (accuracy - baseline) * 100.0;
    const std::string rendered = format_fixed(delta, 1);
    return delta >= 0 ? "+" + rendered : rendered;
}

std::string markdown_report(const RunReport& report, const RunReport* baseline) {
    std::string out;
    out += "| Dataset | Accuracy |";
    if (baseline != nullptr) out += " Baseline | Delta |";
    out += "\n|---|---|";
    if (baseline != nullptr) out += "---|---|";
    out += "\n| " + report.dataset_name + " | " +
           format_fixed(report.accuracy() * 100.0, 1) + " |";
    if (baseline != nullptr) {
        out += " " + format_fixed(baseline->accuracy() * 100.0, 1) + " | " +
               delta_cell(report.accuracy(), baseline->accuracy()) + " |";
    }
    out += "\n\n| Category | Correct | Total | Accuracy |\n|---|---|---|---|\n";
    for (const auto& [category, score] : report.per_category) {
        out += "| " + std::string(category_name(category)) + " | " +
               std::to_string(score.correct) + " | " + std::to_string(score.total) + " | " +
               accuracy_percent(score) + " |\n";
    }
    out += "| overall | " + std::to_string(report.correct) + " | " +
           std::to_string(report.total) + " | " +
           format_fixed(report.accuracy() * 100.0, 1) + " |\n";
    return out;
}

std::string csv_report(const RunReport& report) {
    std::string out = "category,correct,total,accuracy\n";
    for (const auto& [category, score] : report.per_category) {
        const double accuracy =
            score.total == 0 ? 0.0
                             : static_cast<double>(score.correct) / static_cast<double>(score.total);
        out += std::string(category_name(category)) + "," + std::to_string(score.correct) + "," +
               std::to_string(score.total) + "," + format_fixed(accuracy, 3) + "\n";
    }
    out += "overall," + std::to_string(report.correct) + "," + std::to_string(report.total) + "," +
           format_fixed(report.accuracy(), 3) + "\n";
    return out;
}

}  // namespace

std::string emit_report(const RunReport& report, ReportFormat format, const RunReport* baseline) {
    switch (format) {
        case ReportFormat::Json: return to_json(report).dump(2) + "\n";
        case ReportFormat::Markdown: return markdown_report(report, baseline);
        case ReportFormat::Csv: return csv_report(report);
    }
    return {};
}

std::vector<SweepRow> run_sample_sweep(const Dataset& dataset, const PipelineConfig& base_config,
                                       Backend& backend, const std::vector<int>& sample_counts) {
    if (sample_counts.empty()) {
        throw PreconditionError("sample sweep needs at least one sample count");
    }
    std::vector<SweepRow> rows;
    for (int n : sample_counts) {
        if (n < 1) throw PreconditionError("sample counts must be positive");
        PipelineConfig config = base_config;
        config.n_samples = n;
        const RunReport report = run_eval(dataset, config, backend, {});
        SweepRow row;
        row.n_samples = n;
        row.accuracy = report.accuracy();
        for (const auto& item : report.items) row.chat_calls += item.chat_calls();
        row.total_tokens = report.usage.total_tokens;
        row.wall_ms = report.wall_ms;
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(),
              [](const SweepRow& a, const SweepRow& b) { return a.n_samples < b.n_samples; });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "n_samples,accuracy,chat_calls,total_tokens,wall_ms\n";
    for (const auto& row : rows) {
        out += std::to_string(row.n_samples) + "," + format_fixed(row.accuracy, 3) + "," +
               std::to_string(row.chat_calls) + "," + std::to_string(row.total_tokens) + "," +
               std::to_string(row.wall_ms) + "\n";
    }
    return out;
}

}  // namespace vista
