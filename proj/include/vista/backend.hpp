#pragma once

#include "vista/chat.hpp"
#include "vista/errors.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace vista {

struct SamplingParams {
    double temperature = 0.0;
    int n_samples = 1;
    int max_tokens = 1024;
    std::optional<long long> seed;

    void validate() const;
};

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long total_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& other);
    bool operator==(const TokenUsage&) const = default;
};

nlohmann::json to_json(const TokenUsage& usage);
TokenUsage usage_from_json(const nlohmann::json& j);

struct CompletionBatch {
    std::vector<std::string> texts;  // exactly n_samples entries
    TokenUsage usage;
    nlohmann::json raw_metadata;  // provenance: backend, request id, rule hit
};

/// Fixed-dimension real vector; rejects empty and non-finite payloads.
class EmbeddingVector {
public:
    explicit EmbeddingVector(std::vector<double> values);

    const std::vector<double>& values() const { return values_; }
    int dimension() const { return static_cast<int>(values_.size()); }

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
};

struct CapabilitySet {
    bool has_embeddings = false;
    bool has_hidden_states = false;
    int max_media_per_request = 32;

    bool operator==(const CapabilitySet&) const = default;
};

/// Uniform client for inference backends. Shared contract checks (transcript
/// shape, media limits, batch sizes, uniform embedding dimension) run here;
/// concrete transports implement the do_* hooks.
class Backend {
public:
    virtual ~Backend() = default;

    /// Multi-sample completion of a transcript ending on a user turn.
    CompletionBatch chat(const ChatTranscript& transcript, const SamplingParams& params);

    /// Order-preserving batch embedding; all outputs share one dimension.
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);

    virtual CapabilitySet capabilities() const = 0;

    /// Final-token last-layer hidden state of `completion` in context.
    /// Requires capabilities().has_hidden_states.
    EmbeddingVector hidden_state(const ChatTranscript& transcript, const std::string& completion);

protected:
    virtual CompletionBatch do_chat(const ChatTranscript& transcript,
                                    const SamplingParams& params) = 0;
    virtual std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) = 0;
    virtual EmbeddingVector do_hidden_state(const ChatTranscript& transcript,
                                            const std::string& completion) = 0;
};

}  // namespace vista
