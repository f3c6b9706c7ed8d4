#include "vista/consensus.hpp"

#include "vista/util.hpp"

#include <cmath>
#include <map>

namespace vista {

using nlohmann::json;

std::string_view verify_method_name(VerifyMethod method) {
    switch (method) {
        case VerifyMethod::Naive: return "naive";
        case VerifyMethod::Majority: return "majority";
        case VerifyMethod::BestOfN: return "bon";
        case VerifyMethod::Lrc: return "lrc";
    }
    return "lrc";
}

VerifyMethod parse_verify_method(std::string_view name) {
    if (name == "naive") return VerifyMethod::Naive;
    if (name == "majority") return VerifyMethod::Majority;
    if (name == "bon" || name == "best_of_n") return VerifyMethod::BestOfN;
    if (name == "lrc") return VerifyMethod::Lrc;
    throw SchemaError("unknown verification method: '" + std::string(name) + "'");
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw PreconditionError("cosine: dimension mismatch " + std::to_string(a.dimension()) +
                                " vs " + std::to_string(b.dimension()));
    }
    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
    for (int i = 0; i < a.dimension(); ++i) {
        const double x = a.values()[static_cast<size_t>(i)];
        const double y = b.values()[static_cast<size_t>(i)];
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if (norm_a == 0.0 || norm_b == 0.0) {
        throw UndefinedCosineError("cosine undefined for a zero vector");
    }
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

double semantic_confidence(const EmbeddingVector& v_q, const EmbeddingVector& v_s) {
    return 0.5 * (cosine_similarity(v_q, v_s) + 1.0);
}

double pairwise_similarity(const ReasoningPath& a, const ReasoningPath& b) {
    return cosine_similarity(a.embedding, b.embedding);
}

std::vector<PathCluster> cluster_paths(const std::vector<ReasoningPath>& paths, double theta) {
    if (paths.empty()) throw PreconditionError("cluster_paths: path list must be nonempty");
    if (theta < 0.0 || theta > 1.0) {
        throw PreconditionError("cluster_paths: theta must lie in [0,1]");
    }
    std::vector<PathCluster> clusters;
    for (const auto& path : paths) {
        bool added = false;
        for (auto& cluster : clusters) {
            if (pairwise_similarity(path, cluster.representative()) >= theta) {
                cluster.members.push_back(path);
                added = true;
                break;
            }
        }
        if (!added) {
            clusters.push_back(PathCluster{{path}});
        }
    }
    return clusters;
}

namespace {

// singleton clusters have no pairs; treated as perfectly cohesive
double mean_intra_similarity(const PathCluster& cluster) {
    const size_t n = cluster.members.size();
    if (n < 2) return 1.0;
    double sum = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            sum += pairwise_similarity(cluster.members[i], cluster.members[j]);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

}  // namespace

ConsensusResult select_consensus(const std::vector<PathCluster>& clusters, double theta) {
    if (clusters.empty()) throw PreconditionError("select_consensus: cluster list is empty");

    std::vector<double> cohesion(clusters.size());
    for (size_t i = 0; i < clusters.size(); ++i) cohesion[i] = mean_intra_similarity(clusters[i]);

    size_t winner = 0;
    for (size_t i = 1; i < clusters.size(); ++i) {
        const size_t best_size = clusters[winner].members.size();
        const size_t size = clusters[i].members.size();
        if (size > best_size || (size == best_size && cohesion[i] > cohesion[winner])) {
            winner = i;  // equal size and cohesion keeps the earlier cluster
        }
    }

    json sizes = json::array();
    json cohesions = json::array();
    json member_texts = json::array();
    for (size_t i = 0; i < clusters.size(); ++i) {
        sizes.push_back(clusters[i].members.size());
        cohesions.push_back(cohesion[i]);
    }
    for (const auto& member : clusters[winner].members) member_texts.push_back(member.text);

    ConsensusResult result;
    result.method = VerifyMethod::Lrc;
    result.chosen_text = clusters[winner].representative().text;
    result.theta = theta;
    result.diagnostics = json{{"cluster_sizes", std::move(sizes)},
                              {"cluster_cohesion", std::move(cohesions)},
                              {"chosen_cluster", winner},
                              {"chosen_cluster_members", std::move(member_texts)}};
    return result;
}

ConsensusResult majority_vote(const std::vector<char>& answers) {
    if (answers.empty()) throw PreconditionError("majority_vote: answer list is empty");
    for (char a : answers) {
        if (a < 'A' || a > 'Z') {
            throw PreconditionError("majority_vote: '" + std::string(1, a) +
                                    "' is not an option letter");
        }
    }

    std::map<char, int> tally;
    std::map<char, size_t> first_seen;
    for (size_t i = 0; i < answers.size(); ++i) {
        ++tally[answers[i]];
        first_seen.emplace(answers[i], i);
    }

    char winner = answers.front();
    for (const auto& [letter, count] : tally) {
        if (count > tally[winner] ||
            (count == tally[winner] && first_seen[letter] < first_seen[winner])) {
            winner = letter;
        }
    }

    json tallies = json::object();
    for (const auto& [letter, count] : tally) tallies[std::string(1, letter)] = count;

    ConsensusResult result;
    result.method = VerifyMethod::Majority;
    result.chosen_text = std::string(1, winner);
    result.diagnostics = json{{"tallies", std::move(tallies)}, {"votes", answers.size()}};
    return result;
}

ConsensusResult best_of_n(const std::string& question_text,
                          const std::vector<std::string>& summaries, Backend& embedder) {
    if (summaries.empty()) throw PreconditionError("best_of_n: summary list is empty");

    std::vector<std::string> batch;
    batch.reserve(summaries.size() + 1);
    batch.push_back(question_text);
    for (const auto& s : summaries) batch.push_back(s);
    const std::vector<EmbeddingVector> vectors = embedder.embed(batch);

    size_t best = 0;
    std::vector<double> scores(summaries.size());
    for (size_t i = 0; i < summaries.size(); ++i) {
        scores[i] = semantic_confidence(vectors[0], vectors[i + 1]);
        if (scores[i] > scores[best]) best = i;
    }

    ConsensusResult result;
    result.method = VerifyMethod::BestOfN;
    result.chosen_text = summaries[best];
    result.diagnostics = json{{"scores", scores}, {"chosen_index", best}};
    return result;
}

char parse_reliability(const std::string& verdict_text) {
    if (trim(verdict_text).empty()) {
        throw PreconditionError("parse_reliability: verdict text is empty");
    }
    // pass 1: standalone letter token, possibly wrapped as (A) or A.
    std::string token;
    auto inspect = [&]() -> char {
        size_t b = 0;
        size_t e = token.size();
        while (b < e && (token[b] == '(' || token[b] == '[' || token[b] == '"')) ++b;
        while (e > b && (token[e - 1] == ')' || token[e - 1] == ']' || token[e - 1] == '.' ||
                         token[e - 1] == ',' || token[e - 1] == ':' || token[e - 1] == ';' ||
                         token[e - 1] == '!' || token[e - 1] == '"')) {
            --e;
        }
        if (e - b == 1 && token[b] >= 'A' && token[b] <= 'D') return token[b];
        return '\0';
    };
    for (char c : verdict_text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (const char hit = inspect(); hit != '\0') return hit;
            token.clear();
        } else {
            token.push_back(c);
        }
    }
    if (const char hit = inspect(); hit != '\0') return hit;

    // pass 2: option phrase; longer phrases first so "not very reliable"
    // is not captured by "very reliable"
    if (contains_ci(verdict_text, "absolutely impossible")) return 'D';
    if (contains_ci(verdict_text, "not very reliable")) return 'C';
    if (contains_ci(verdict_text, "generally reliable")) return 'B';
    if (contains_ci(verdict_text, "very reliable")) return 'A';

    throw ParseError("no reliability letter found in verdict: '" + verdict_text + "'");
}

bool naive_keep_prior(char reliability) { return reliability == 'A' || reliability == 'B'; }

}  // namespace vista
