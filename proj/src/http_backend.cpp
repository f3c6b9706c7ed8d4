#include "vista/http_backend.hpp"

#include "vista/util.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <semaphore>
#include <thread>

namespace vista {

using nlohmann::json;

namespace {

constexpr char kBase64Chars[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(std::string_view data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 2 < data.size()) {
        const unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                           (static_cast<unsigned char>(data[i + 1]) << 8) |
                           static_cast<unsigned char>(data[i + 2]);
        out.push_back(kBase64Chars[(v >> 18) & 63]);
        out.push_back(kBase64Chars[(v >> 12) & 63]);
        out.push_back(kBase64Chars[(v >> 6) & 63]);
        out.push_back(kBase64Chars[v & 63]);
        i += 3;
    }
    const size_t rest = data.size() - i;
    if (rest == 1) {
        const unsigned v = static_cast<unsigned char>(data[i]) << 16;
        out.push_back(kBase64Chars[(v >> 18) & 63]);
        out.push_back(kBase64Chars[(v >> 12) & 63]);
        out += "==";
    } else if (rest == 2) {
        const unsigned v = (static_cast<unsigned char>(data[i]) << 16) |
                           (static_cast<unsigned char>(data[i + 1]) << 8);
        out.push_back(kBase64Chars[(v >> 18) & 63]);
        out.push_back(kBase64Chars[(v >> 12) & 63]);
        out.push_back(kBase64Chars[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::string mime_for_path(const std::string& path) {
    const auto dot = path.rfind('.');
    const std::string ext = dot == std::string::npos ? "" : to_lower(path.substr(dot + 1));
    if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
    if (ext == "webp") return "image/webp";
    if (ext == "gif") return "image/gif";
    return "image/png";
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // leading path prefix, may be empty
};

SplitUrl split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw PreconditionError("backend base URL must include a scheme: " + base_url);
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    SplitUrl split;
    if (path_start == std::string::npos) {
        split.origin = base_url;
    } else {
        split.origin = base_url.substr(0, path_start);
        split.path = base_url.substr(path_start);
        while (!split.path.empty() && split.path.back() == '/') split.path.pop_back();
    }
    return split;
}

}  // namespace

std::string media_ref_to_url(const std::string& ref) {
    if (ref.find("://") != std::string::npos || ref.rfind("data:", 0) == 0) {
        return ref;  // already a URI of some scheme
    }
    const std::string bytes = read_file(ref);
    return "data:" + mime_for_path(ref) + ";base64," + base64_encode(bytes);
}

struct HttpBackend::Impl {
    explicit Impl(HttpBackendConfig cfg)
        : config(std::move(cfg)),
          url(split_base_url(config.base_url)),
          slots(config.concurrency_limit > 0 ? config.concurrency_limit : 1) {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key == nullptr || *key == '\0') key = std::getenv("OPENAI_API_KEY");
        if (key != nullptr) api_key = key;
        if (!config.trace_path.empty()) {
            trace.open(config.trace_path, std::ios::app);
        }
    }

    httplib::Client make_client() {
        httplib::Client client(url.origin);
        client.set_connection_timeout(config.timeout_ms / 1000, config.timeout_ms % 1000 * 1000);
        client.set_read_timeout(config.timeout_ms / 1000, config.timeout_ms % 1000 * 1000);
        if (!api_key.empty()) {
            client.set_default_headers({{"Authorization", "Bearer " + api_key}});
        }
        return client;
    }

    void log(const json& record) {
        if (!trace.is_open()) return;
        std::lock_guard<std::mutex> lock(trace_mutex);
        trace << record.dump() << '\n';
        trace.flush();
    }

    std::string next_request_id() {
        return "req-" + std::to_string(request_seq.fetch_add(1));
    }

    /// POSTs with retry/backoff; returns the parsed body of a 2xx response.
    json post_json(const std::string& endpoint, const json& body, const std::string& request_id) {
        const std::string path = url.path + endpoint;
        const std::string payload = body.dump();
        std::string last_failure;

        for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
            if (attempt > 0) {
                const int delay = config.retry_base_ms * (1 << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::milliseconds(std::min(delay, 10000)));
            }
            slots.acquire();
            auto client = make_client();
            httplib::Result res = client.Post(path, payload, "application/json");
            slots.release();

            if (!res) {
                last_failure = "transport error: " + httplib::to_string(res.error());
                log({{"request_id", request_id},
                     {"endpoint", endpoint},
                     {"attempt", attempt},
                     {"request", payload},
                     {"error", last_failure}});
                continue;
            }
            log({{"request_id", request_id},
                 {"endpoint", endpoint},
                 {"attempt", attempt},
                 {"status", res->status},
                 {"request", payload},
                 {"response", res->body}});
            if (res->status >= 200 && res->status < 300) {
                try {
                    return json::parse(res->body);
                } catch (const json::exception& ex) {
                    throw BackendContractError("backend returned invalid JSON from " + endpoint +
                                               ": " + ex.what());
                }
            }
            if (retryable_status(res->status)) {
                last_failure = "HTTP " + std::to_string(res->status);
                continue;
            }
            std::string message = "HTTP " + std::to_string(res->status);
            try {
                const json err = json::parse(res->body);
                if (err.contains("error")) {
                    const auto& e = err.at("error");
                    message += ": " + (e.is_object() ? e.value("message", e.dump()) : e.dump());
                }
            } catch (const json::exception&) {
                // non-JSON error body; keep the status line
            }
            throw BackendError("backend rejected request " + request_id + " (" + message + ")");
        }
        throw BackendUnavailableError("backend unreachable after " +
                                      std::to_string(config.max_retries + 1) + " attempts (" +
                                      last_failure + ")");
    }

    HttpBackendConfig config;
    SplitUrl url;
    std::string api_key;
    std::counting_semaphore<4096> slots;
    std::atomic<long long> request_seq{0};
    std::ofstream trace;
    std::mutex trace_mutex;
};

HttpBackend::HttpBackend(HttpBackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpBackend::~HttpBackend() = default;

CapabilitySet HttpBackend::capabilities() const {
    return CapabilitySet{impl_->config.embeddings_enabled, impl_->config.hidden_state_endpoint,
                         impl_->config.max_media_per_request};
}

json HttpBackend::build_chat_request(const ChatTranscript& transcript,
                                     const SamplingParams& params, const std::string& model) {
    json messages = json::array();
    for (const auto& turn : transcript.turns) {
        json message;
        message["role"] = std::string(role_name(turn.role));
        const auto refs = turn.media_refs();
        if (refs.empty()) {
            message["content"] = turn.text();
        } else {
            json parts = json::array();
            for (const auto& seg : turn.segments) {
                if (seg.kind == Segment::Kind::Media) {
                    parts.push_back(json{{"type", "image_url"},
                                         {"image_url", {{"url", media_ref_to_url(seg.payload)}}}});
                } else {
                    parts.push_back(json{{"type", "text"}, {"text", seg.payload}});
                }
            }
            message["content"] = std::move(parts);
        }
        messages.push_back(std::move(message));
    }
    json body;
    body["model"] = model;
    body["messages"] = std::move(messages);
    body["n"] = params.n_samples;
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    if (params.seed) body["seed"] = *params.seed;
    return body;
}

CompletionBatch HttpBackend::do_chat(const ChatTranscript& transcript,
                                     const SamplingParams& params) {
    const std::string request_id = impl_->next_request_id();
    const json body = build_chat_request(transcript, params, impl_->config.model);
    const json response = impl_->post_json("/chat/completions", body, request_id);

    if (!response.contains("choices") || !response.at("choices").is_array()) {
        throw BackendContractError("chat response has no choices array");
    }
    std::vector<std::string> texts(response.at("choices").size());
    size_t fallback_index = 0;
    for (const auto& choice : response.at("choices")) {
        const auto& message = choice.at("message");
        if (message.contains("refusal") && !message.at("refusal").is_null()) {
            throw ContentRefusalError("backend refused request " + request_id + ": " +
                                      message.at("refusal").get<std::string>());
        }
        if (choice.value("finish_reason", std::string()) == "content_filter") {
            throw ContentRefusalError("backend filtered request " + request_id);
        }
        const size_t index = choice.contains("index")
                                 ? choice.at("index").get<size_t>()
                                 : fallback_index;
        if (index < texts.size()) texts[index] = message.value("content", std::string());
        ++fallback_index;
    }

    CompletionBatch batch;
    batch.texts = std::move(texts);
    if (response.contains("usage")) batch.usage = usage_from_json(response.at("usage"));
    batch.raw_metadata = json{{"backend", "http"},
                              {"request_id", request_id},
                              {"fingerprint", fingerprint(transcript)},
                              {"model", response.value("model", impl_->config.model)}};
    return batch;
}

std::vector<EmbeddingVector> HttpBackend::do_embed(const std::vector<std::string>& texts) {
    const std::string request_id = impl_->next_request_id();
    json body;
    body["model"] = impl_->config.embedding_model.value_or(impl_->config.model);
    body["input"] = texts;
    const json response = impl_->post_json("/embeddings", body, request_id);

    if (!response.contains("data") || !response.at("data").is_array()) {
        throw BackendContractError("embeddings response has no data array");
    }
    std::vector<std::vector<double>> raw(response.at("data").size());
    size_t fallback_index = 0;
    for (const auto& entry : response.at("data")) {
        const size_t index =
            entry.contains("index") ? entry.at("index").get<size_t>() : fallback_index;
        if (index >= raw.size()) {
            throw BackendContractError("embeddings response index out of range");
        }
        raw[index] = entry.at("embedding").get<std::vector<double>>();
        ++fallback_index;
    }
    std::vector<EmbeddingVector> vectors;
    vectors.reserve(raw.size());
    for (auto& values : raw) vectors.emplace_back(std::move(values));
    return vectors;
}

EmbeddingVector HttpBackend::do_hidden_state(const ChatTranscript& transcript,
                                             const std::string& completion) {
    const std::string request_id = impl_->next_request_id();
    json body = build_chat_request(transcript, SamplingParams{}, impl_->config.model);
    body.erase("n");
    body.erase("temperature");
    body.erase("max_tokens");
    body["completion"] = completion;
    const json response = impl_->post_json("/hidden_state", body, request_id);
    if (!response.contains("hidden_state")) {
        throw BackendContractError("hidden_state response missing 'hidden_state' field");
    }
    return EmbeddingVector(response.at("hidden_state").get<std::vector<double>>());
}

}  // namespace vista
