#include "vista/taxonomy.hpp"

#include "vista/assets.hpp"
#include "vista/errors.hpp"
#include "vista/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>

namespace vista {

namespace {

using nlohmann::json;

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "fact_retrieval",     "process_description", "causal_reasoning",
    "theme_summary",      "comparative_analysis", "behavior_inference",
    "key_moment",         "interaction_analysis", "others",
};

constexpr std::array<bool, kCategoryCount> kDeepFlags = {
    false,  // fact_retrieval
    false,  // process_description
    true,   // causal_reasoning
    true,   // theme_summary
    true,   // comparative_analysis
    true,   // behavior_inference
    false,  // key_moment
    true,   // interaction_analysis
    false,  // others
};

std::string normalize_category_key(std::string_view name) {
    std::string key;
    for (char c : name) {
        if (c == ' ' || c == '_' || c == '-') continue;
        key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return key;
}

bool phrase_matches(const std::string& question_lower, const std::string& phrase) {
    const bool single_word = phrase.find(' ') == std::string::npos;
    size_t pos = 0;
    while ((pos = question_lower.find(phrase, pos)) != std::string::npos) {
        if (!single_word) return true;
        const bool left_ok = pos == 0 || !is_word_char(question_lower[pos - 1]);
        const size_t end = pos + phrase.size();
        const bool right_ok = end == question_lower.size() || !is_word_char(question_lower[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

}  // namespace

std::string_view category_name(QuestionCategory category) {
    return kCategoryNames[static_cast<size_t>(category)];
}

QuestionCategory parse_category(std::string_view name) {
    const std::string key = normalize_category_key(name);
    for (int i = 0; i < kCategoryCount; ++i) {
        if (key == normalize_category_key(kCategoryNames[i])) {
            return static_cast<QuestionCategory>(i);
        }
    }
    throw SchemaError("unknown question category: '" + std::string(name) + "'");
}

bool category_is_deep(QuestionCategory category) {
    return kDeepFlags[static_cast<size_t>(category)];
}

std::string_view branch_name(Branch branch) {
    return branch == Branch::Deep ? "deep" : "direct";
}

FeatureTable::FeatureTable(std::vector<FeatureEntry> entries, std::vector<std::string> warnings)
    : entries_(std::move(entries)), warnings_(std::move(warnings)) {}

const FeatureEntry& FeatureTable::entry(QuestionCategory category) const {
    for (const auto& e : entries_) {
        if (e.category == category) return e;
    }
    throw VistaError("feature table has no entry for " + std::string(category_name(category)));
}

std::string FeatureTable::to_json_text() const {
    json doc;
    doc["categories"] = json::array();
    for (const auto& e : entries_) {
        json record;
        record["category"] = std::string(category_name(e.category));
        record["deep"] = e.deep;
        record["keywords"] = e.keywords;
        doc["categories"].push_back(std::move(record));
    }
    return doc.dump(2) + "\n";
}

FeatureTable load_feature_table(const std::string& document_text) {
    json doc;
    try {
        doc = json::parse(document_text);
    } catch (const json::exception& ex) {
        throw SchemaError(std::string("taxonomy document is not valid JSON: ") + ex.what());
    }
    if (!doc.is_object() || !doc.contains("categories") || !doc["categories"].is_array()) {
        throw SchemaError("taxonomy document must be an object with a 'categories' array");
    }

    std::vector<FeatureEntry> entries;
    std::vector<std::string> warnings;
    std::set<QuestionCategory> seen;
    std::map<std::string, QuestionCategory> keyword_owner;

    for (const auto& record : doc["categories"]) {
        if (!record.is_object() || !record.contains("category") || !record.contains("deep") ||
            !record.contains("keywords")) {
            throw SchemaError("taxonomy record missing one of category/deep/keywords: " +
                              record.dump());
        }
        FeatureEntry entry;
        entry.category = parse_category(record["category"].get<std::string>());
        const std::string name(category_name(entry.category));
        if (!record["deep"].is_boolean()) {
            throw SchemaError("taxonomy entry '" + name + "': deep must be a boolean");
        }
        entry.deep = record["deep"].get<bool>();
        if (entry.deep != category_is_deep(entry.category)) {
            throw SchemaError("taxonomy entry '" + name + "': deep flag must be " +
                              (category_is_deep(entry.category) ? "true" : "false"));
        }
        if (!seen.insert(entry.category).second) {
            throw SchemaError("taxonomy entry '" + name + "' declared twice");
        }
        if (!record["keywords"].is_array()) {
            throw SchemaError("taxonomy entry '" + name + "': keywords must be a string list");
        }
        std::set<std::string> in_category;
        for (const auto& kw : record["keywords"]) {
            if (!kw.is_string()) {
                throw SchemaError("taxonomy entry '" + name + "': keywords must be strings");
            }
            std::string phrase = to_lower(trim(kw.get<std::string>()));
            if (phrase.empty()) {
                throw SchemaError("taxonomy entry '" + name + "' contains an empty keyword");
            }
            if (!in_category.insert(phrase).second) {
                warnings.push_back("entry '" + name + "' repeats keyword '" + phrase +
                                   "'; kept once");
                continue;
            }
            auto [it, inserted] = keyword_owner.emplace(phrase, entry.category);
            if (!inserted) {
                warnings.push_back("keyword '" + phrase + "' appears under both '" +
                                   std::string(category_name(it->second)) + "' and '" + name +
                                   "'; both categories will accumulate hits");
            }
            entry.keywords.push_back(std::move(phrase));
        }
        if (entry.category == QuestionCategory::Others) {
            if (!entry.keywords.empty()) {
                throw SchemaError("taxonomy entry 'others' must not carry keywords");
            }
        } else if (entry.keywords.empty()) {
            throw SchemaError("taxonomy entry '" + name + "' has an empty keyword list");
        }
        entries.push_back(std::move(entry));
    }

    if (entries.size() != kCategoryCount) {
        throw SchemaError("taxonomy document must declare exactly 9 categories, got " +
                          std::to_string(entries.size()));
    }
    return FeatureTable(std::move(entries), std::move(warnings));
}

FeatureTable load_feature_table_file(const std::string& path) {
    return load_feature_table(read_file(path));
}

const FeatureTable& builtin_feature_table() {
    static const FeatureTable table = load_feature_table(std::string(assets::kTaxonomyJson));
    return table;
}

CategoryHits match_categories(const std::string& question, const FeatureTable& table) {
    if (trim(question).empty()) {
        throw PreconditionError("match_categories: question must be nonempty");
    }
    const std::string lowered = to_lower(question);
    CategoryHits hits{};
    for (const auto& entry : table.entries()) {
        int count = 0;
        for (const auto& phrase : entry.keywords) {
            if (phrase_matches(lowered, phrase)) ++count;
        }
        hits[static_cast<size_t>(entry.category)] = count;
    }
    return hits;
}

RoutingDecision route(const std::string& question, const FeatureTable& table) {
    RoutingDecision decision;
    decision.hits = match_categories(question, table);

    int best = 0;
    QuestionCategory winner = QuestionCategory::Others;
    for (const auto& entry : table.entries()) {  // declaration order breaks ties
        const int count = decision.hits[static_cast<size_t>(entry.category)];
        if (count > best) {
            best = count;
            winner = entry.category;
        }
    }
    decision.category = winner;
    decision.branch = category_is_deep(winner) ? Branch::Deep : Branch::Direct;
    return decision;
}

}  // namespace vista
