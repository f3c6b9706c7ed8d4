#include "vista/complexity.hpp"

#include "vista/errors.hpp"
#include "vista/util.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace vista {

namespace {

const std::set<std::string> kMarkWords = {"that",     "whether", "because", "if",
                                          "although", "since",   "while",   "unless"};

const std::set<std::string> kPronouns = {"i",  "you", "he",  "she", "it",   "we",
                                         "they", "me", "him", "her", "us", "them"};
const std::set<std::string> kDeterminers = {"the", "a", "an", "this", "these", "those"};
const std::set<std::string> kAdpositions = {"of", "in", "on",  "at",   "by",   "with",
                                            "from", "to", "for", "into", "over", "under"};
const std::set<std::string> kCoordinators = {"and", "or", "but"};
const std::set<std::string> kAuxiliaries = {"is",  "are", "was",  "were",  "be",   "been",
                                            "am",  "do",  "does", "did",   "have", "has",
                                            "had", "will", "would", "can", "could", "should",
                                            "may", "might"};

void check_heads(const std::vector<TokenAnnotation>& tokens) {
    const int n = static_cast<int>(tokens.size());
    for (int i = 0; i < n; ++i) {
        if (tokens[i].head < 0 || tokens[i].head >= n) {
            throw StructuralError("token " + std::to_string(i) + " ('" + tokens[i].text +
                                  "') has out-of-range head " + std::to_string(tokens[i].head));
        }
    }
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

void validate_tokens(const std::vector<TokenAnnotation>& tokens) {
    check_heads(tokens);
    if (tokens.empty()) return;
    int roots = 0;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i].head == static_cast<int>(i)) ++roots;
    }
    if (roots != 1) {
        throw StructuralError("token sequence must have exactly one root, found " +
                              std::to_string(roots));
    }
}

int count_dependencies(const std::vector<TokenAnnotation>& tokens) {
    check_heads(tokens);
    int count = 0;
    for (size_t i = 0; i < tokens.size(); ++i) {
        const auto& dependent = tokens[i];
        if (dependent.head == static_cast<int>(i)) continue;  // root self-edge
        const auto& head = tokens[static_cast<size_t>(dependent.head)];
        if (head.pos != dependent.pos) ++count;
    }
    return count;
}

int count_clauses(const std::vector<TokenAnnotation>& tokens) {
    return static_cast<int>(
        std::count_if(tokens.begin(), tokens.end(),
                      [](const TokenAnnotation& t) { return t.dep == "mark"; }));
}

LexicalMetrics lexical_metrics(const std::vector<std::string>& words, int tau) {
    LexicalMetrics metrics;
    if (words.empty()) {
        metrics.degenerate = true;
        return metrics;
    }
    std::set<std::string> distinct;
    for (const auto& word : words) {
        const std::string normalized = to_lower(word);
        distinct.insert(normalized);
        if (static_cast<int>(normalized.size()) > tau) ++metrics.rarity;
    }
    metrics.diversity = static_cast<double>(distinct.size()) / static_cast<double>(words.size());
    return metrics;
}

ComplexityReport complexity_score(const std::vector<TokenAnnotation>& tokens,
                                  const ComplexityConfig& config) {
    ComplexityReport report;
    report.n_dep = count_dependencies(tokens);
    report.n_clause = count_clauses(tokens);

    std::vector<std::string> words;
    words.reserve(tokens.size());
    for (const auto& token : tokens) {
        for (auto& w : split_words(token.text)) words.push_back(std::move(w));
    }
    const LexicalMetrics lexical = lexical_metrics(words, config.tau);
    report.diversity = lexical.diversity;
    report.rarity = lexical.rarity;
    report.degenerate_input = lexical.degenerate;

    report.alpha = clamp01(report.n_clause / config.clause_cap);
    report.beta = clamp01(report.n_dep / config.dep_cap);
    report.gamma = clamp01(report.rarity / config.rarity_cap);
    report.delta = lexical.diversity;
    report.score = fuse_components(report.alpha, report.beta, report.gamma, report.delta);
    report.needs_reasoning = needs_reasoning(report.score, config.theta);
    return report;
}

double fuse_components(double alpha, double beta, double gamma, double delta) {
    return 0.3 * alpha + 0.2 * beta + 0.3 * gamma + 0.2 * delta;
}

bool needs_reasoning(double score, double theta) { return score > theta; }

std::vector<TokenAnnotation> fallback_annotate(const std::string& text) {
    std::vector<TokenAnnotation> tokens;
    for (const auto& word : split_words(text)) {
        TokenAnnotation token;
        token.text = word;
        if (kMarkWords.count(word)) {
            token.pos = "SCONJ";
            token.dep = "mark";
        } else if (kPronouns.count(word)) {
            token.pos = "PRON";
            token.dep = "dep";
        } else if (kDeterminers.count(word)) {
            token.pos = "DET";
            token.dep = "dep";
        } else if (kAdpositions.count(word)) {
            token.pos = "ADP";
            token.dep = "dep";
        } else if (kCoordinators.count(word)) {
            token.pos = "CCONJ";
            token.dep = "dep";
        } else if (kAuxiliaries.count(word)) {
            token.pos = "AUX";
            token.dep = "dep";
        } else if (std::all_of(word.begin(), word.end(),
                               [](unsigned char c) { return std::isdigit(c); })) {
            token.pos = "NUM";
            token.dep = "dep";
        } else {
            token.pos = "WORD";
            token.dep = "dep";
        }
        token.head = 0;  // flat structure rooted at the first token
        tokens.push_back(std::move(token));
    }
    if (!tokens.empty()) tokens.front().dep = "root";
    return tokens;
}

std::vector<TokenAnnotation> parse_token_document(const std::string& text) {
    std::vector<TokenAnnotation> tokens;
    int line_number = 0;
    for (const auto& line : split_lines(text)) {
        ++line_number;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;

        std::vector<std::string> fields;
        size_t start = 0;
        while (true) {
            const size_t tab = line.find('\t', start);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, tab - start));
            start = tab + 1;
        }
        if (fields.size() != 5) {
            throw SchemaError("token file line " + std::to_string(line_number) +
                              ": expected 5 tab-separated fields (index, text, pos, head, dep), "
                              "got " + std::to_string(fields.size()));
        }
        int index = 0;
        TokenAnnotation token;
        try {
            index = std::stoi(fields[0]);
            token.head = std::stoi(fields[3]);
        } catch (const std::exception&) {
            throw SchemaError("token file line " + std::to_string(line_number) +
                              ": index and head must be integers");
        }
        if (index != static_cast<int>(tokens.size())) {
            throw SchemaError("token file line " + std::to_string(line_number) +
                              ": indices must run consecutively from 0");
        }
        token.text = fields[1];
        token.pos = fields[2];
        token.dep = fields[4];
        tokens.push_back(std::move(token));
    }
    validate_tokens(tokens);
    return tokens;
}

std::vector<TokenAnnotation> load_token_file(const std::string& path) {
    return parse_token_document(read_file(path));
}

}  // namespace vista
