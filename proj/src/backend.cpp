#include "vista/backend.hpp"

#include <cmath>

namespace vista {

using nlohmann::json;

void SamplingParams::validate() const {
    if (temperature < 0.0) throw PreconditionError("temperature must be non-negative");
    if (n_samples < 1) throw PreconditionError("n_samples must be at least 1");
    if (max_tokens < 1) throw PreconditionError("max_tokens must be at least 1");
}

TokenUsage& TokenUsage::operator+=(const TokenUsage& other) {
    prompt_tokens += other.prompt_tokens;
    completion_tokens += other.completion_tokens;
    total_tokens += other.total_tokens;
    return *this;
}

json to_json(const TokenUsage& usage) {
    json j;
    j["prompt_tokens"] = usage.prompt_tokens;
    j["completion_tokens"] = usage.completion_tokens;
    j["total_tokens"] = usage.total_tokens;
    return j;
}

TokenUsage usage_from_json(const json& j) {
    TokenUsage usage;
    usage.prompt_tokens = j.value("prompt_tokens", 0LL);
    usage.completion_tokens = j.value("completion_tokens", 0LL);
    usage.total_tokens = j.value("total_tokens", 0LL);
    return usage;
}

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) {
        throw BackendContractError("embedding vector must not be empty");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw BackendContractError("embedding vector contains a non-finite value");
        }
    }
}

CompletionBatch Backend::chat(const ChatTranscript& transcript, const SamplingParams& params) {
    params.validate();
    validate_for_completion(transcript);
    const int media = transcript.media_count();
    const int limit = capabilities().max_media_per_request;
    if (media > limit) {
        throw PreconditionError("transcript carries " + std::to_string(media) +
                                " media segments, backend limit is " + std::to_string(limit));
    }
    CompletionBatch batch = do_chat(transcript, params);
    if (static_cast<int>(batch.texts.size()) != params.n_samples) {
        throw PartialResultError("backend returned " + std::to_string(batch.texts.size()) +
                                     " of " + std::to_string(params.n_samples) +
                                     " requested samples",
                                 static_cast<int>(batch.texts.size()), params.n_samples);
    }
    return batch;
}

std::vector<EmbeddingVector> Backend::embed(const std::vector<std::string>& texts) {
    if (!capabilities().has_embeddings) {
        throw UnsupportedOperationError("backend does not expose embeddings");
    }
    if (texts.empty()) throw PreconditionError("embed: text batch must be nonempty");
    for (const auto& t : texts) {
        if (t.empty()) throw PreconditionError("embed: texts must be nonempty");
    }
    std::vector<EmbeddingVector> vectors = do_embed(texts);
    if (vectors.size() != texts.size()) {
        throw BackendContractError("embedding batch returned " + std::to_string(vectors.size()) +
                                   " vectors for " + std::to_string(texts.size()) + " inputs");
    }
    for (const auto& v : vectors) {
        if (v.dimension() != vectors.front().dimension()) {
            throw BackendContractError("embedding batch mixes dimensions " +
                                       std::to_string(vectors.front().dimension()) + " and " +
                                       std::to_string(v.dimension()));
        }
    }
    return vectors;
}

EmbeddingVector Backend::hidden_state(const ChatTranscript& transcript,
                                      const std::string& completion) {
    if (!capabilities().has_hidden_states) {
        throw UnsupportedOperationError(
            "backend does not expose hidden states; fall back to embed()");
    }
    return do_hidden_state(transcript, completion);
}

}  // namespace vista
