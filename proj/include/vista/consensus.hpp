#pragma once

#include "vista/backend.hpp"

#include <string>
#include <vector>

namespace vista {

enum class VerifyMethod { Naive, Majority, BestOfN, Lrc };

std::string_view verify_method_name(VerifyMethod method);
VerifyMethod parse_verify_method(std::string_view name);

/// One sampled deduction with its latent-space embedding.
struct ReasoningPath {
    std::string text;
    EmbeddingVector embedding;
    int source_index = 0;
};

/// Greedy similarity cluster; the representative is always the first member.
struct PathCluster {
    std::vector<ReasoningPath> members;

    const ReasoningPath& representative() const { return members.front(); }
};

struct ConsensusResult {
    VerifyMethod method = VerifyMethod::Majority;
    std::string chosen_text;  // always one of the candidates, never synthesized
    nlohmann::json diagnostics;
    std::optional<double> theta;  // set for Lrc
};

/// Cosine similarity of two equal-dimension nonzero vectors.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Question/summary agreement mapped to [0,1]: (cos + 1) / 2.
double semantic_confidence(const EmbeddingVector& v_q, const EmbeddingVector& v_s);

/// Latent agreement of two reasoning paths (plain cosine, in [-1,1]).
double pairwise_similarity(const ReasoningPath& a, const ReasoningPath& b);

/// Single greedy pass: each path joins the first existing cluster (in
/// creation order) whose representative is at least theta similar, else
/// opens a new cluster. Output is a partition of the input.
std::vector<PathCluster> cluster_paths(const std::vector<ReasoningPath>& paths, double theta);

/// Picks the largest cluster's representative; ties broken by higher mean
/// intra-cluster pairwise similarity, then by earliest creation order.
ConsensusResult select_consensus(const std::vector<PathCluster>& clusters, double theta);

/// Most frequent letter; ties broken by earliest first occurrence.
ConsensusResult majority_vote(const std::vector<char>& answers);

/// Embeds the question and every candidate summary, scores each candidate by
/// semantic_confidence, returns the argmax (earliest index on ties).
ConsensusResult best_of_n(const std::string& question_text,
                          const std::vector<std::string>& summaries, Backend& embedder);

/// Extracts the reliability letter (A-D) from a verdict; throws ParseError
/// when no letter and no option phrase is present.
char parse_reliability(const std::string& verdict_text);

/// Adjudication rule for the prompting-only verifier: keep the prior answer
/// on A/B, trigger one re-answer round on C/D.
bool naive_keep_prior(char reliability);

}  // namespace vista
