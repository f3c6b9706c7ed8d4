#pragma once

#include "vista/backend.hpp"

#include <memory>
#include <mutex>

namespace vista {

struct HttpBackendConfig {
    std::string base_url;  // e.g. http://localhost:8000/v1
    std::string model;
    std::string api_key_env = "VISTA_API_KEY";  // falls back to OPENAI_API_KEY
    std::optional<std::string> embedding_model;  // defaults to model
    int timeout_ms = 120000;
    int max_retries = 3;
    int retry_base_ms = 250;
    int concurrency_limit = 4;
    int max_media_per_request = 32;
    bool embeddings_enabled = true;
    /// Optional sidecar contract: POST {base_url}/hidden_state with
    /// {"model", "messages", "completion"} returning {"hidden_state": [...]}.
    bool hidden_state_endpoint = false;
    std::string trace_path;  // when set, JSONL request/response log
};

/// Chat-completions client for any server speaking the de-facto standard
/// JSON schema. Retries transient transport failures and 429/5xx responses
/// with exponential backoff; every call carries a logged request id.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    CapabilitySet capabilities() const override;

    /// Request body builder, exposed for tests.
    static nlohmann::json build_chat_request(const ChatTranscript& transcript,
                                             const SamplingParams& params,
                                             const std::string& model);

protected:
    CompletionBatch do_chat(const ChatTranscript& transcript,
                            const SamplingParams& params) override;
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override;
    EmbeddingVector do_hidden_state(const ChatTranscript& transcript,
                                    const std::string& completion) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Local image files become data: URIs; http(s) and data URIs pass through.
std::string media_ref_to_url(const std::string& ref);

}  // namespace vista
