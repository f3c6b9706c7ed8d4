#pragma once

#include "vista/backend.hpp"

#include <map>
#include <mutex>

namespace vista {

/// Script-driven offline backend for hermetic tests and dry runs.
///
/// Fixture document (JSON):
///   {
///     "name": "fixture-name",
///     "embedding_dimension": 8,
///     "embed_seed": 1234,
///     "capabilities": {"has_embeddings": true, "has_hidden_states": true,
///                      "max_media_per_request": 32},
///     "rules": [
///       {"match": {"contains": ["step by step"], "not_contains": ["final answer"]},
///        "completions": ["text a", "text b"]},
///       {"match": {"fingerprint": "0123456789abcdef"},
///        "completions": ["..."]},
///       {"match": {"contains": ["boom"]}, "error": "unavailable"},
///       {"match": {"contains": ["nope"]}, "error": "refusal"},
///       {"match": {"contains": ["half"]}, "completions": ["x"], "partial": 0}
///     ],
///     "default_completions": ["A"],
///     "embeddings": {"pinned text": [1, 0, 0, 0, 0, 0, 0, 0]},
///     "hidden_states": {"pinned completion": [0, 1, 0, 0, 0, 0, 0, 0]}
///   }
///
/// Rules are evaluated in order against the transcript fingerprint and the
/// transcript text; the first match wins. A matched pool of length L
/// answers a chat(n) request with pool[i % L] for i in 0..n-1, or pool[0]
/// repeated when temperature is zero. Texts without a pinned embedding get a
/// deterministic vector seeded from fnv1a64(text) ^ embed_seed.
class MockBackend : public Backend {
public:
    explicit MockBackend(const nlohmann::json& fixture);

    static MockBackend from_file(const std::string& path);
    static nlohmann::json load_fixture(const std::string& path);

    CapabilitySet capabilities() const override { return capabilities_; }

    const std::string& name() const { return name_; }

    struct CallRecord {
        std::string kind;  // chat | embed | hidden_state
        std::string fingerprint;
        int n_requested = 0;
        int media_count = 0;
    };
    std::vector<CallRecord> call_log() const;

protected:
    CompletionBatch do_chat(const ChatTranscript& transcript,
                            const SamplingParams& params) override;
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override;
    EmbeddingVector do_hidden_state(const ChatTranscript& transcript,
                                    const std::string& completion) override;

private:
    struct Rule {
        std::string fingerprint;              // empty = any
        std::vector<std::string> contains;    // all must occur in the transcript text
        std::vector<std::string> not_contains;
        std::string media_contains;           // substring of any media ref
        std::vector<std::string> completions;
        std::string error;  // "", "refusal", "unavailable"
        std::optional<int> partial;
    };

    const Rule* find_rule(const std::string& fp, const std::string& transcript_text,
                          const std::vector<std::string>& media_refs) const;
    EmbeddingVector seeded_vector(std::uint64_t seed) const;
    std::string next_request_id(const std::string& fp);
    void record(const std::string& kind, const std::string& fp, int n, int media = 0);

    std::string name_;
    int embedding_dimension_ = 8;
    std::uint64_t embed_seed_ = 0;
    CapabilitySet capabilities_;
    std::vector<Rule> rules_;
    std::vector<std::string> default_completions_;
    std::map<std::string, std::vector<double>> pinned_embeddings_;
    std::map<std::string, std::vector<double>> pinned_hidden_states_;

    mutable std::mutex mutex_;
    std::map<std::string, int> request_counters_;
    std::vector<CallRecord> call_log_;
};

}  // namespace vista
