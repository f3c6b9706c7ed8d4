#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace vista {

enum class QuestionCategory {
    FactRetrieval,
    ProcessDescription,
    CausalReasoning,
    ThemeSummary,
    ComparativeAnalysis,
    BehaviorInference,
    KeyMoment,
    InteractionAnalysis,
    Others,
};

inline constexpr int kCategoryCount = 9;

/// Canonical snake_case identifier, as used in data files and reports.
std::string_view category_name(QuestionCategory category);

/// Accepts canonical ids plus display spellings ("Fact Retrieval",
/// "fact_retrieval", "FactRetrieval"); throws SchemaError otherwise.
QuestionCategory parse_category(std::string_view name);

/// Whether the category is routed to the deep reasoning branch.
bool category_is_deep(QuestionCategory category);

enum class Branch { Direct, Deep };

std::string_view branch_name(Branch branch);

/// Per-category keyword hit counts, indexed by QuestionCategory value.
using CategoryHits = std::array<int, kCategoryCount>;

struct FeatureEntry {
    QuestionCategory category;
    bool deep = false;
    std::vector<std::string> keywords;  // lowercase, trimmed
};

/// Immutable keyword-feature taxonomy. Entries keep file declaration order,
/// which doubles as the routing tie-break order.
class FeatureTable {
public:
    FeatureTable(std::vector<FeatureEntry> entries, std::vector<std::string> warnings);

    const std::vector<FeatureEntry>& entries() const { return entries_; }
    const FeatureEntry& entry(QuestionCategory category) const;

    /// Loader diagnostics (cross-category keyword duplicates, in-category dedups).
    const std::vector<std::string>& warnings() const { return warnings_; }

    std::string to_json_text() const;

private:
    std::vector<FeatureEntry> entries_;
    std::vector<std::string> warnings_;
};

struct RoutingDecision {
    QuestionCategory category = QuestionCategory::Others;
    CategoryHits hits{};
    Branch branch = Branch::Direct;
};

/// Parses a taxonomy document (JSON, one record per category with fields
/// `category`, `deep`, `keywords`). Duplicated keywords across categories are
/// retained and recorded as warnings; schema violations throw SchemaError.
FeatureTable load_feature_table(const std::string& document_text);
FeatureTable load_feature_table_file(const std::string& path);

/// The shipped taxonomy asset.
const FeatureTable& builtin_feature_table();

/// Number of distinct keyword phrases of each category present in the
/// question. Single-word phrases match at word boundaries only; multi-word
/// phrases match as whole case-insensitive substrings.
CategoryHits match_categories(const std::string& question, const FeatureTable& table);

/// Picks the category with the highest hit count (ties broken by table
/// declaration order); zero hits everywhere falls back to Others/Direct.
RoutingDecision route(const std::string& question, const FeatureTable& table);

}  // namespace vista
