#pragma once

#include "vista/backend.hpp"
#include "vista/chat.hpp"
#include "vista/complexity.hpp"
#include "vista/consensus.hpp"
#include "vista/prompt_forge.hpp"
#include "vista/taxonomy.hpp"

#include <functional>
#include <optional>

namespace vista {

enum class RouterKind { Taxonomy, Complexity, AlwaysDeep, AlwaysDirect };

std::string_view router_kind_name(RouterKind kind);
RouterKind parse_router_kind(std::string_view name);

struct PipelineConfig {
    RouterKind router = RouterKind::Taxonomy;
    VerifyMethod verify = VerifyMethod::Lrc;
    int n_samples = 5;
    double theta = 0.85;
    PromptConfig prompt;
    /// Sampling temperature for the multi-sample stage; single-completion
    /// stages run at zero. Unset defaults to 0.7 when n_samples > 1, else 0.
    std::optional<double> temperature;
    int max_tokens = 1024;
    std::optional<long long> seed;
    int workers = 1;
    ComplexityConfig complexity;
    /// Override for the keyword taxonomy; nullptr uses the built-in table.
    const FeatureTable* taxonomy = nullptr;
    /// Injectable clock (milliseconds) so scripted runs can be byte-stable.
    std::function<long long()> now_ms;

    double multi_sample_temperature() const;
    const FeatureTable& feature_table() const;
    long long clock_ms() const;

    nlohmann::json snapshot() const;
};

/// One backend interaction made while running an item.
struct BackendCall {
    std::string stage;  // standard | anchoring | deduction | verify | reanswer | refinement | ...
    std::string kind;   // chat | embed | hidden_state
    std::string request_id;
    std::string transcript_fingerprint;  // chat and hidden_state only
    int n_requested = 0;
    int n_received = 0;
    TokenUsage usage;
};

/// Sampled deduction as recorded in traces; the embedding is present only
/// when the verification method computed one.
struct PathRecord {
    int index = 0;
    std::string text;
    std::optional<char> extracted;
    std::optional<std::vector<double>> embedding;
};

struct ItemResult {
    std::string item_id;
    Branch branch = Branch::Direct;
    std::optional<RoutingDecision> route_decision;   // taxonomy routing
    std::optional<ComplexityReport> complexity;      // complexity routing
    std::optional<std::string> summary;
    std::vector<PathRecord> paths;
    std::optional<ConsensusResult> consensus;
    std::string final_text;
    std::optional<char> extracted;  // nullopt = unparseable
    std::optional<bool> correct;
    bool failed = false;
    std::string failure;  // "<stage>: <message>"
    long long wall_ms = 0;
    TokenUsage usage;
    std::vector<BackendCall> trace;

    /// Completions requested across chat interactions (the per-item chat
    /// call count; a chat asking n samples counts n).
    long long chat_calls() const;
    /// Number of chat interactions regardless of sample counts.
    long long chat_invocations() const;

    /// Reporting category: the taxonomy decision's category when present,
    /// Others for items routed by other means.
    QuestionCategory report_category() const;
};

nlohmann::json to_json(const ItemResult& result);
ItemResult item_result_from_json(const nlohmann::json& j);

/// Letter extraction cascade: (1) first standalone letter token ("A", "A.",
/// "(A)"); (2) "answer is X"; (3) unique case-insensitive containment of
/// exactly one option's full text. Returns nullopt when nothing matches.
std::optional<char> extract_answer(const std::string& final_text,
                                   const std::vector<std::pair<char, std::string>>& options);

/// Runs one item end to end. Stage errors are captured into a failed
/// ItemResult rather than thrown, so batch runs keep exact accounting.
ItemResult run_item(const MCQItem& item, const PipelineConfig& config, Backend& backend);

/// Bounded worker pool over independent items; `on_commit` observes results
/// in item order regardless of completion order.
std::vector<ItemResult> run_items(const std::vector<MCQItem>& items, const PipelineConfig& config,
                                  Backend& backend,
                                  const std::function<void(const ItemResult&)>& on_commit = {});

}  // namespace vista
