#pragma once

#include <string>
#include <vector>

namespace vista {

/// One pre-parsed token of a dependency annotation. The root token is its
/// own head; every head index must be in range for the sequence.
struct TokenAnnotation {
    std::string text;
    std::string pos;
    int head = 0;  // index of syntactic head, self-index for root
    std::string dep;

    bool operator==(const TokenAnnotation&) const = default;
};

/// Throws StructuralError on out-of-range heads or (for nonempty input)
/// a root count other than one. Used by the file loader; the counting
/// operations only require in-range heads.
void validate_tokens(const std::vector<TokenAnnotation>& tokens);

struct ComplexityConfig {
    double theta = 0.65;     // reasoning-required threshold on the fused score
    int tau = 6;             // rarity length threshold (strictly greater counts)
    double clause_cap = 3;   // saturation caps for the [0,1] normalization
    double dep_cap = 15;
    double rarity_cap = 8;
};

struct LexicalMetrics {
    double diversity = 0.0;  // distinct / total over case-normalized words
    int rarity = 0;          // occurrences longer than tau characters
    bool degenerate = false; // set for empty input, where both are defined 0
};

struct ComplexityReport {
    int n_dep = 0;
    int n_clause = 0;
    double diversity = 0.0;
    int rarity = 0;
    double alpha = 0.0;  // clause component
    double beta = 0.0;   // dependency component
    double gamma = 0.0;  // rarity component
    double delta = 0.0;  // diversity component
    double score = 0.0;  // 0.3a + 0.2b + 0.3g + 0.2d
    bool needs_reasoning = false;
    bool degenerate_input = false;
};

/// Head->dependent edges whose two ends carry different part-of-speech tags;
/// self-edges (the root) are excluded. Throws StructuralError on
/// out-of-range head indices.
int count_dependencies(const std::vector<TokenAnnotation>& tokens);

/// Tokens whose dependency label is exactly "mark".
int count_clauses(const std::vector<TokenAnnotation>& tokens);

LexicalMetrics lexical_metrics(const std::vector<std::string>& words, int tau = 6);

/// Weighted fusion of the four normalized components:
/// 0.3*alpha + 0.2*beta + 0.3*gamma + 0.2*delta.
double fuse_components(double alpha, double beta, double gamma, double delta);

ComplexityReport complexity_score(const std::vector<TokenAnnotation>& tokens,
                                  const ComplexityConfig& config = {});

/// Strict threshold decision: true iff score > theta.
bool needs_reasoning(double score, double theta = 0.65);

/// Approximate rule-based annotator: whitespace tokens, a closed-class list
/// of subordinating mark words, flat head structure rooted at the first
/// token. A stand-in for a real dependency parser, for use when questions
/// arrive as plain text rather than pre-parsed annotations.
std::vector<TokenAnnotation> fallback_annotate(const std::string& text);

/// Columnar token file: one record per line, tab-separated fields
/// (index, text, pos, head, dep); '#' lines and blank lines are skipped.
/// Indices are zero-based and the root is its own head.
std::vector<TokenAnnotation> load_token_file(const std::string& path);
std::vector<TokenAnnotation> parse_token_document(const std::string& text);

}  // namespace vista
