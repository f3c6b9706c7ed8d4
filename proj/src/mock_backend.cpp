#include "vista/mock_backend.hpp"

#include "vista/util.hpp"

#include <algorithm>

namespace vista {

using nlohmann::json;

namespace {

long long approximate_tokens(size_t chars) {
    return static_cast<long long>((chars + 3) / 4);
}

TokenUsage mock_usage(const ChatTranscript& transcript, const std::vector<std::string>& texts) {
    TokenUsage usage;
    size_t prompt_chars = 0;
    for (const auto& turn : transcript.turns) {
        for (const auto& seg : turn.segments) {
            if (seg.kind == Segment::Kind::Text) {
                prompt_chars += seg.payload.size();
            } else {
                usage.prompt_tokens += 32;  // flat per-frame stand-in
            }
        }
    }
    usage.prompt_tokens += approximate_tokens(prompt_chars);
    for (const auto& t : texts) usage.completion_tokens += approximate_tokens(t.size());
    usage.total_tokens = usage.prompt_tokens + usage.completion_tokens;
    return usage;
}

}  // namespace

MockBackend::MockBackend(const json& fixture) {
    if (!fixture.is_object()) throw SchemaError("mock fixture must be a JSON object");
    name_ = fixture.value("name", std::string("mock"));
    embedding_dimension_ = fixture.value("embedding_dimension", 8);
    if (embedding_dimension_ < 1) {
        throw SchemaError("mock fixture: embedding_dimension must be positive");
    }
    embed_seed_ = fixture.value("embed_seed", 0ULL);

    capabilities_ = {true, true, 32};
    if (fixture.contains("capabilities")) {
        const auto& caps = fixture.at("capabilities");
        capabilities_.has_embeddings = caps.value("has_embeddings", true);
        capabilities_.has_hidden_states = caps.value("has_hidden_states", true);
        capabilities_.max_media_per_request = caps.value("max_media_per_request", 32);
    }

    if (fixture.contains("rules")) {
        for (const auto& r : fixture.at("rules")) {
            Rule rule;
            if (r.contains("match")) {
                const auto& m = r.at("match");
                rule.fingerprint = m.value("fingerprint", std::string());
                if (m.contains("contains")) {
                    rule.contains = m.at("contains").get<std::vector<std::string>>();
                }
                if (m.contains("not_contains")) {
                    rule.not_contains = m.at("not_contains").get<std::vector<std::string>>();
                }
                rule.media_contains = m.value("media_contains", std::string());
            }
            if (r.contains("completions")) {
                rule.completions = r.at("completions").get<std::vector<std::string>>();
            }
            rule.error = r.value("error", std::string());
            if (r.contains("partial")) rule.partial = r.at("partial").get<int>();
            if (rule.completions.empty() && rule.error.empty()) {
                throw SchemaError("mock rule needs either completions or an error kind");
            }
            rules_.push_back(std::move(rule));
        }
    }
    if (fixture.contains("default_completions")) {
        default_completions_ =
            fixture.at("default_completions").get<std::vector<std::string>>();
    }
    auto load_pinned = [&](const char* key, std::map<std::string, std::vector<double>>& sink) {
        if (!fixture.contains(key)) return;
        for (const auto& [text, values] : fixture.at(key).items()) {
            auto vec = values.get<std::vector<double>>();
            if (static_cast<int>(vec.size()) != embedding_dimension_) {
                throw SchemaError("mock fixture: pinned vector for '" + text + "' has dimension " +
                                  std::to_string(vec.size()) + ", fixture declares " +
                                  std::to_string(embedding_dimension_));
            }
            sink[text] = std::move(vec);
        }
    };
    load_pinned("embeddings", pinned_embeddings_);
    load_pinned("hidden_states", pinned_hidden_states_);
}

json MockBackend::load_fixture(const std::string& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& ex) {
        throw SchemaError("mock fixture '" + path + "' is not valid JSON: " + ex.what());
    }
}

MockBackend MockBackend::from_file(const std::string& path) {
    return MockBackend(load_fixture(path));
}

const MockBackend::Rule* MockBackend::find_rule(const std::string& fp,
                                                const std::string& transcript_text,
                                                const std::vector<std::string>& media_refs) const {
    for (const auto& rule : rules_) {
        if (!rule.fingerprint.empty() && rule.fingerprint != fp) continue;
        bool ok = true;
        for (const auto& needle : rule.contains) {
            if (transcript_text.find(needle) == std::string::npos) {
                ok = false;
                break;
            }
        }
        for (const auto& needle : rule.not_contains) {
            if (transcript_text.find(needle) != std::string::npos) {
                ok = false;
                break;
            }
        }
        if (ok && !rule.media_contains.empty()) {
            ok = std::any_of(media_refs.begin(), media_refs.end(), [&](const std::string& ref) {
                return ref.find(rule.media_contains) != std::string::npos;
            });
        }
        if (ok) return &rule;
    }
    return nullptr;
}

EmbeddingVector MockBackend::seeded_vector(std::uint64_t seed) const {
    // splitmix64 stream; values in [-1, 1), stable across platforms
    std::vector<double> values(static_cast<size_t>(embedding_dimension_));
    std::uint64_t state = seed;
    for (auto& v : values) {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z = z ^ (z >> 31);
        v = static_cast<double>(z >> 11) / 4503599627370496.0 - 1.0;
    }
    return EmbeddingVector(std::move(values));
}

std::string MockBackend::next_request_id(const std::string& fp) {
    const int count = request_counters_[fp]++;
    return "mock-" + fp.substr(0, 8) + "-" + std::to_string(count);
}

void MockBackend::record(const std::string& kind, const std::string& fp, int n, int media) {
    call_log_.push_back(CallRecord{kind, fp, n, media});
}

std::vector<MockBackend::CallRecord> MockBackend::call_log() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return call_log_;
}

CompletionBatch MockBackend::do_chat(const ChatTranscript& transcript,
                                     const SamplingParams& params) {
    const std::string fp = fingerprint(transcript);
    const std::string transcript_text = transcript.all_text();
    std::vector<std::string> media_refs;
    for (const auto& turn : transcript.turns) {
        for (const auto& ref : turn.media_refs()) media_refs.push_back(ref);
    }

    std::string request_id;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        request_id = next_request_id(fp);
        record("chat", fp, params.n_samples, static_cast<int>(media_refs.size()));
    }

    const Rule* rule = find_rule(fp, transcript_text, media_refs);
    const std::vector<std::string>* pool = nullptr;
    std::string rule_tag = "default";
    if (rule != nullptr) {
        if (rule->error == "unavailable") {
            throw BackendUnavailableError("mock scripted transport failure for " + fp);
        }
        if (rule->error == "refusal") {
            throw ContentRefusalError("mock scripted refusal for " + fp);
        }
        pool = &rule->completions;
        rule_tag = "rule:" + std::to_string(rule - rules_.data());
    } else if (!default_completions_.empty()) {
        pool = &default_completions_;
    } else {
        throw BackendUnavailableError("mock fixture '" + name_ + "' has no rule for transcript " +
                                      fp + " and no default_completions");
    }

    CompletionBatch batch;
    const int n = (rule != nullptr && rule->partial) ? std::min(*rule->partial, params.n_samples)
                                                     : params.n_samples;
    for (int i = 0; i < n; ++i) {
        const size_t index = params.temperature == 0.0 ? 0 : i % pool->size();
        batch.texts.push_back((*pool)[index]);
    }
    batch.usage = mock_usage(transcript, batch.texts);
    batch.raw_metadata = json{{"backend", "mock"},
                              {"request_id", request_id},
                              {"fingerprint", fp},
                              {"rule", rule_tag}};
    return batch;
}

std::vector<EmbeddingVector> MockBackend::do_embed(const std::vector<std::string>& texts) {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        record("embed", "", static_cast<int>(texts.size()));
    }
    std::vector<EmbeddingVector> vectors;
    vectors.reserve(texts.size());
    for (const auto& text : texts) {
        auto pinned = pinned_embeddings_.find(text);
        if (pinned != pinned_embeddings_.end()) {
            vectors.emplace_back(pinned->second);
        } else {
            vectors.push_back(seeded_vector(fnv1a64(text) ^ embed_seed_));
        }
    }
    return vectors;
}

EmbeddingVector MockBackend::do_hidden_state(const ChatTranscript& transcript,
                                             const std::string& completion) {
    const std::string fp = fingerprint(transcript);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        record("hidden_state", fp, 1);
    }
    auto pinned = pinned_hidden_states_.find(completion);
    if (pinned != pinned_hidden_states_.end()) {
        return EmbeddingVector(pinned->second);
    }
    return seeded_vector(fnv1a64(fp) ^ fnv1a64(completion) ^ embed_seed_);
}

}  // namespace vista
