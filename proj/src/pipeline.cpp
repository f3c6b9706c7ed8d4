#include "vista/pipeline.hpp"

#include "vista/util.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <mutex>
#include <thread>

namespace vista {

using nlohmann::json;

std::string_view router_kind_name(RouterKind kind) {
    switch (kind) {
        case RouterKind::Taxonomy: return "taxonomy";
        case RouterKind::Complexity: return "complexity";
        case RouterKind::AlwaysDeep: return "always_deep";
        case RouterKind::AlwaysDirect: return "always_direct";
    }
    return "taxonomy";
}

RouterKind parse_router_kind(std::string_view name) {
    if (name == "taxonomy") return RouterKind::Taxonomy;
    if (name == "complexity") return RouterKind::Complexity;
    if (name == "always_deep") return RouterKind::AlwaysDeep;
    if (name == "always_direct") return RouterKind::AlwaysDirect;
    throw SchemaError("unknown router kind: '" + std::string(name) + "'");
}

double PipelineConfig::multi_sample_temperature() const {
    if (temperature) return *temperature;
    return n_samples > 1 ? 0.7 : 0.0;
}

const FeatureTable& PipelineConfig::feature_table() const {
    return taxonomy != nullptr ? *taxonomy : builtin_feature_table();
}

long long PipelineConfig::clock_ms() const {
    if (now_ms) return now_ms();
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

json PipelineConfig::snapshot() const {
    json j;
    j["router"] = std::string(router_kind_name(router));
    j["verify"] = std::string(verify_method_name(verify));
    j["n_samples"] = n_samples;
    j["theta"] = theta;
    j["prompt"] = json{{"with_question_focus", prompt.with_question_focus},
                       {"with_cot_trigger", prompt.with_cot_trigger}};
    json sampling;
    sampling["temperature_multi_sample"] = multi_sample_temperature();
    sampling["temperature_single"] = 0.0;
    sampling["max_tokens"] = max_tokens;
    sampling["seed"] = seed ? json(*seed) : json(nullptr);
    j["sampling"] = std::move(sampling);
    j["workers"] = workers;
    if (router == RouterKind::Complexity) {
        j["complexity"] = json{{"theta", complexity.theta},
                               {"tau", complexity.tau},
                               {"clause_cap", complexity.clause_cap},
                               {"dep_cap", complexity.dep_cap},
                               {"rarity_cap", complexity.rarity_cap}};
    }
    return j;
}

long long ItemResult::chat_calls() const {
    long long total = 0;
    for (const auto& call : trace) {
        if (call.kind == "chat") total += call.n_requested;
    }
    return total;
}

long long ItemResult::chat_invocations() const {
    long long total = 0;
    for (const auto& call : trace) {
        if (call.kind == "chat") ++total;
    }
    return total;
}

QuestionCategory ItemResult::report_category() const {
    return route_decision ? route_decision->category : QuestionCategory::Others;
}

namespace {

json to_json(const BackendCall& call) {
    json j;
    j["stage"] = call.stage;
    j["kind"] = call.kind;
    j["request_id"] = call.request_id;
    j["fingerprint"] = call.transcript_fingerprint;
    j["n_requested"] = call.n_requested;
    j["n_received"] = call.n_received;
    j["usage"] = to_json(call.usage);
    return j;
}

BackendCall call_from_json(const json& j) {
    BackendCall call;
    call.stage = j.at("stage").get<std::string>();
    call.kind = j.at("kind").get<std::string>();
    call.request_id = j.at("request_id").get<std::string>();
    call.transcript_fingerprint = j.at("fingerprint").get<std::string>();
    call.n_requested = j.at("n_requested").get<int>();
    call.n_received = j.at("n_received").get<int>();
    call.usage = usage_from_json(j.at("usage"));
    return call;
}

json routing_to_json(const RoutingDecision& decision) {
    json hits = json::object();
    for (int i = 0; i < kCategoryCount; ++i) {
        hits[std::string(category_name(static_cast<QuestionCategory>(i)))] =
            decision.hits[static_cast<size_t>(i)];
    }
    return json{{"category", std::string(category_name(decision.category))},
                {"hits", std::move(hits)},
                {"branch", std::string(branch_name(decision.branch))}};
}

RoutingDecision routing_from_json(const json& j) {
    RoutingDecision decision;
    decision.category = parse_category(j.at("category").get<std::string>());
    for (int i = 0; i < kCategoryCount; ++i) {
        const auto name = std::string(category_name(static_cast<QuestionCategory>(i)));
        decision.hits[static_cast<size_t>(i)] = j.at("hits").value(name, 0);
    }
    decision.branch =
        j.at("branch").get<std::string>() == "deep" ? Branch::Deep : Branch::Direct;
    return decision;
}

json complexity_to_json(const ComplexityReport& report) {
    return json{{"n_dep", report.n_dep},
                {"n_clause", report.n_clause},
                {"diversity", report.diversity},
                {"rarity", report.rarity},
                {"alpha", report.alpha},
                {"beta", report.beta},
                {"gamma", report.gamma},
                {"delta", report.delta},
                {"score", report.score},
                {"needs_reasoning", report.needs_reasoning},
                {"degenerate_input", report.degenerate_input}};
}

ComplexityReport complexity_from_json(const json& j) {
    ComplexityReport report;
    report.n_dep = j.at("n_dep").get<int>();
    report.n_clause = j.at("n_clause").get<int>();
    report.diversity = j.at("diversity").get<double>();
    report.rarity = j.at("rarity").get<int>();
    report.alpha = j.at("alpha").get<double>();
    report.beta = j.at("beta").get<double>();
    report.gamma = j.at("gamma").get<double>();
    report.delta = j.at("delta").get<double>();
    report.score = j.at("score").get<double>();
    report.needs_reasoning = j.at("needs_reasoning").get<bool>();
    report.degenerate_input = j.value("degenerate_input", false);
    return report;
}

json consensus_to_json(const ConsensusResult& result) {
    json j;
    j["method"] = std::string(verify_method_name(result.method));
    j["chosen_text"] = result.chosen_text;
    j["diagnostics"] = result.diagnostics;
    j["theta"] = result.theta ? json(*result.theta) : json(nullptr);
    return j;
}

ConsensusResult consensus_from_json(const json& j) {
    ConsensusResult result;
    result.method = parse_verify_method(j.at("method").get<std::string>());
    result.chosen_text = j.at("chosen_text").get<std::string>();
    result.diagnostics = j.at("diagnostics");
    if (!j.at("theta").is_null()) result.theta = j.at("theta").get<double>();
    return result;
}

std::string letter_or_unparseable(std::optional<char> letter) {
    return letter ? std::string(1, *letter) : std::string("unparseable");
}

std::optional<char> letter_from_json(const json& j) {
    const std::string s = j.get<std::string>();
    if (s == "unparseable") return std::nullopt;
    return s.at(0);
}

}  // namespace

json to_json(const ItemResult& result) {
    json j;
    j["item_id"] = result.item_id;
    j["branch"] = std::string(branch_name(result.branch));
    j["routing"] = result.route_decision ? routing_to_json(*result.route_decision) : json(nullptr);
    j["complexity"] = result.complexity ? complexity_to_json(*result.complexity) : json(nullptr);
    j["summary"] = result.summary ? json(*result.summary) : json(nullptr);
    json paths = json::array();
    for (const auto& path : result.paths) {
        json p;
        p["index"] = path.index;
        p["text"] = path.text;
        p["extracted"] = path.extracted ? json(std::string(1, *path.extracted)) : json(nullptr);
        p["embedding"] = path.embedding ? json(*path.embedding) : json(nullptr);
        paths.push_back(std::move(p));
    }
    j["paths"] = std::move(paths);
    j["consensus"] = result.consensus ? consensus_to_json(*result.consensus) : json(nullptr);
    j["final_text"] = result.final_text;
    j["extracted"] = letter_or_unparseable(result.extracted);
    j["correct"] = result.correct ? json(*result.correct) : json(nullptr);
    j["failed"] = result.failed;
    j["failure"] = result.failure;
    j["wall_ms"] = result.wall_ms;
    j["usage"] = to_json(result.usage);
    json trace = json::array();
    for (const auto& call : result.trace) trace.push_back(to_json(call));
    j["trace"] = std::move(trace);
    return j;
}

ItemResult item_result_from_json(const json& j) {
    ItemResult result;
    result.item_id = j.at("item_id").get<std::string>();
    result.branch = j.at("branch").get<std::string>() == "deep" ? Branch::Deep : Branch::Direct;
    if (!j.at("routing").is_null()) result.route_decision = routing_from_json(j.at("routing"));
    if (!j.at("complexity").is_null()) result.complexity = complexity_from_json(j.at("complexity"));
    if (!j.at("summary").is_null()) result.summary = j.at("summary").get<std::string>();
    for (const auto& p : j.at("paths")) {
        PathRecord path;
        path.index = p.at("index").get<int>();
        path.text = p.at("text").get<std::string>();
        if (!p.at("extracted").is_null()) path.extracted = p.at("extracted").get<std::string>()[0];
        if (!p.at("embedding").is_null()) {
            path.embedding = p.at("embedding").get<std::vector<double>>();
        }
        result.paths.push_back(std::move(path));
    }
    if (!j.at("consensus").is_null()) result.consensus = consensus_from_json(j.at("consensus"));
    result.final_text = j.at("final_text").get<std::string>();
    result.extracted = letter_from_json(j.at("extracted"));
    if (!j.at("correct").is_null()) result.correct = j.at("correct").get<bool>();
    result.failed = j.at("failed").get<bool>();
    result.failure = j.at("failure").get<std::string>();
    result.wall_ms = j.at("wall_ms").get<long long>();
    result.usage = usage_from_json(j.at("usage"));
    for (const auto& c : j.at("trace")) result.trace.push_back(call_from_json(c));
    return result;
}

std::optional<char> extract_answer(const std::string& final_text,
                                   const std::vector<std::pair<char, std::string>>& options) {
    if (options.empty()) throw PreconditionError("extract_answer: options are empty");
    const char last_letter = options.back().first;
    auto in_range = [&](char c) { return c >= 'A' && c <= last_letter; };

    // pass 1: first standalone letter token ("A", "A.", "(A)")
    {
        std::string token;
        auto inspect = [&]() -> std::optional<char> {
            size_t b = 0;
            size_t e = token.size();
            while (b < e && (token[b] == '(' || token[b] == '[' || token[b] == '"' ||
                             token[b] == '*')) {
                ++b;
            }
            while (e > b &&
                   (token[e - 1] == ')' || token[e - 1] == ']' || token[e - 1] == '.' ||
                    token[e - 1] == ',' || token[e - 1] == ':' || token[e - 1] == ';' ||
                    token[e - 1] == '!' || token[e - 1] == '"' || token[e - 1] == '*')) {
                --e;
            }
            if (e - b == 1 && in_range(token[b])) return token[b];
            return std::nullopt;
        };
        for (char c : final_text) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (auto hit = inspect()) return hit;
                token.clear();
            } else {
                token.push_back(c);
            }
        }
        if (auto hit = inspect()) return hit;
    }

    // pass 2: "answer is X"
    {
        const std::string lowered = to_lower(final_text);
        size_t pos = 0;
        while ((pos = lowered.find("answer is", pos)) != std::string::npos) {
            size_t cursor = pos + 9;
            while (cursor < final_text.size() &&
                   (std::isspace(static_cast<unsigned char>(final_text[cursor])) ||
                    final_text[cursor] == ':' || final_text[cursor] == '(')) {
                ++cursor;
            }
            if (cursor < final_text.size()) {
                const char letter =
                    static_cast<char>(std::toupper(static_cast<unsigned char>(final_text[cursor])));
                const bool boundary = cursor + 1 >= final_text.size() ||
                                      !is_word_char(final_text[cursor + 1]);
                if (in_range(letter) && boundary) return letter;
            }
            pos += 9;
        }
    }

    // pass 3: unique containment of exactly one option's full text
    {
        std::optional<char> unique;
        for (const auto& [letter, text] : options) {
            if (!trim(text).empty() && contains_ci(final_text, text)) {
                if (unique) return std::nullopt;  // ambiguous
                unique = letter;
            }
        }
        if (unique) return unique;
    }
    return std::nullopt;
}

namespace {

/// Per-item recording wrapper around the backend.
class StageRecorder {
public:
    StageRecorder(Backend& backend, ItemResult& result) : backend_(backend), result_(result) {}

    CompletionBatch chat(const std::string& stage, const ChatTranscript& transcript,
                         const SamplingParams& params) {
        BackendCall call;
        call.stage = stage;
        call.kind = "chat";
        call.transcript_fingerprint = fingerprint(transcript);
        call.n_requested = params.n_samples;
        try {
            CompletionBatch batch = backend_.chat(transcript, params);
            call.request_id = batch.raw_metadata.value("request_id", std::string());
            call.n_received = static_cast<int>(batch.texts.size());
            call.usage = batch.usage;
            result_.trace.push_back(std::move(call));
            result_.usage += batch.usage;
            return batch;
        } catch (...) {
            // failed interactions stay visible in the trace
            result_.trace.push_back(std::move(call));
            throw;
        }
    }

    std::vector<EmbeddingVector> embed(const std::string& stage,
                                       const std::vector<std::string>& texts) {
        std::vector<EmbeddingVector> vectors = backend_.embed(texts);
        BackendCall call;
        call.stage = stage;
        call.kind = "embed";
        call.n_requested = static_cast<int>(texts.size());
        call.n_received = static_cast<int>(vectors.size());
        result_.trace.push_back(std::move(call));
        return vectors;
    }

    EmbeddingVector hidden_state(const std::string& stage, const ChatTranscript& transcript,
                                 const std::string& completion) {
        EmbeddingVector vector = backend_.hidden_state(transcript, completion);
        BackendCall call;
        call.stage = stage;
        call.kind = "hidden_state";
        call.transcript_fingerprint = fingerprint(transcript);
        call.n_requested = 1;
        call.n_received = 1;
        result_.trace.push_back(std::move(call));
        return vector;
    }

    Backend& backend() { return backend_; }

private:
    Backend& backend_;
    ItemResult& result_;
};

/// Routes embedding calls through the per-item trace; chat is not available
/// on this adapter.
class RecordingEmbedder : public Backend {
public:
    RecordingEmbedder(StageRecorder& recorder, std::string stage)
        : recorder_(recorder), stage_(std::move(stage)) {}

    CapabilitySet capabilities() const override { return recorder_.backend().capabilities(); }

protected:
    CompletionBatch do_chat(const ChatTranscript&, const SamplingParams&) override {
        throw UnsupportedOperationError("embedding adapter cannot chat");
    }
    std::vector<EmbeddingVector> do_embed(const std::vector<std::string>& texts) override {
        return recorder_.embed(stage_, texts);
    }
    EmbeddingVector do_hidden_state(const ChatTranscript& transcript,
                                    const std::string& completion) override {
        return recorder_.hidden_state(stage_, transcript, completion);
    }

private:
    StageRecorder& recorder_;
    std::string stage_;
};

SamplingParams single_params(const PipelineConfig& config) {
    SamplingParams params;
    params.temperature = 0.0;
    params.n_samples = 1;
    params.max_tokens = config.max_tokens;
    params.seed = config.seed;
    return params;
}

SamplingParams multi_params(const PipelineConfig& config) {
    SamplingParams params;
    params.temperature = config.multi_sample_temperature();
    params.n_samples = config.n_samples;
    params.max_tokens = config.max_tokens;
    params.seed = config.seed;
    return params;
}

/// Extends a transcript that already ended on a user turn with the model's
/// reply and a follow-up user message.
ChatTranscript extend_dialogue(ChatTranscript transcript, const std::string& assistant_text,
                               const std::string& user_text) {
    ChatTurn assistant;
    assistant.role = Role::Assistant;
    assistant.segments.push_back(Segment::text(assistant_text));
    transcript.turns.push_back(std::move(assistant));
    ChatTurn user;
    user.role = Role::User;
    user.segments.push_back(Segment::text(user_text));
    transcript.turns.push_back(std::move(user));
    return transcript;
}

constexpr const char* kReanswerRequest =
    "The previous answer may be unreliable. Reconsider the key frames and the summarized "
    "evidence, then answer the question again.";

void run_direct(const MCQItem& item, const PipelineConfig& config, StageRecorder& recorder,
                ItemResult& result) {
    const CompletionBatch batch =
        recorder.chat("standard", render_standard(item), single_params(config));
    result.final_text = batch.texts.front();
}

void run_deep(const MCQItem& item, const PipelineConfig& config, StageRecorder& recorder,
              ItemResult& result) {
    std::string summary;
    std::vector<std::string> deduction_texts;
    ChatTranscript deduction_transcript;

    if (config.verify == VerifyMethod::BestOfN) {
        // under bon the summary stage is the sampled stage; confidence pairs
        // the question with each candidate summary
        const CompletionBatch candidates = recorder.chat(
            "anchoring", render_anchoring(item, config.prompt), multi_params(config));
        RecordingEmbedder embedder(recorder, "verify");
        ConsensusResult consensus = best_of_n(item.question, candidates.texts, embedder);
        summary = consensus.chosen_text;
        result.consensus = std::move(consensus);
        deduction_transcript = render_deduction(item, summary, config.prompt);
        const CompletionBatch deduction =
            recorder.chat("deduction", deduction_transcript, single_params(config));
        deduction_texts = deduction.texts;
    } else {
        const CompletionBatch anchoring = recorder.chat(
            "anchoring", render_anchoring(item, config.prompt), single_params(config));
        summary = anchoring.texts.front();
        deduction_transcript = render_deduction(item, summary, config.prompt);
        const CompletionBatch deduction =
            recorder.chat("deduction", deduction_transcript, multi_params(config));
        deduction_texts = deduction.texts;
    }

    result.summary = summary;
    for (size_t i = 0; i < deduction_texts.size(); ++i) {
        PathRecord path;
        path.index = static_cast<int>(i);
        path.text = deduction_texts[i];
        path.extracted = extract_answer(deduction_texts[i], item.options);
        result.paths.push_back(std::move(path));
    }

    std::string chosen_reasoning = deduction_texts.front();

    switch (config.verify) {
        case VerifyMethod::BestOfN:
            // verification already selected the summary; the single deduction
            // is the reasoning
            break;
        case VerifyMethod::Majority: {
            std::vector<char> letters;
            for (const auto& path : result.paths) {
                if (path.extracted) letters.push_back(*path.extracted);
            }
            if (letters.empty()) {
                ConsensusResult fallback;
                fallback.method = VerifyMethod::Majority;
                fallback.chosen_text = deduction_texts.front();
                fallback.diagnostics = json{{"no_parseable_votes", true}};
                result.consensus = std::move(fallback);
                break;
            }
            ConsensusResult vote = majority_vote(letters);
            const char winner = vote.chosen_text.front();
            for (const auto& path : result.paths) {
                if (path.extracted && *path.extracted == winner) {
                    chosen_reasoning = path.text;
                    break;
                }
            }
            result.consensus = std::move(vote);
            break;
        }
        case VerifyMethod::Lrc: {
            std::vector<ReasoningPath> paths;
            if (recorder.backend().capabilities().has_hidden_states) {
                for (size_t i = 0; i < deduction_texts.size(); ++i) {
                    EmbeddingVector embedding = recorder.hidden_state(
                        "verify", deduction_transcript, deduction_texts[i]);
                    result.paths[i].embedding = embedding.values();
                    paths.push_back(ReasoningPath{deduction_texts[i], std::move(embedding),
                                                  static_cast<int>(i)});
                }
            } else {
                const std::vector<EmbeddingVector> vectors =
                    recorder.embed("verify", deduction_texts);
                for (size_t i = 0; i < deduction_texts.size(); ++i) {
                    result.paths[i].embedding = vectors[i].values();
                    paths.push_back(
                        ReasoningPath{deduction_texts[i], vectors[i], static_cast<int>(i)});
                }
            }
            const std::vector<PathCluster> clusters = cluster_paths(paths, config.theta);
            ConsensusResult consensus = select_consensus(clusters, config.theta);
            chosen_reasoning = consensus.chosen_text;
            result.consensus = std::move(consensus);
            break;
        }
        case VerifyMethod::Naive: {
            const std::string prior = deduction_texts.front();
            const CompletionBatch verdict_batch = recorder.chat(
                "verify", render_naive_verify(item, prior), single_params(config));
            ConsensusResult consensus;
            consensus.method = VerifyMethod::Naive;
            try {
                const char verdict = parse_reliability(verdict_batch.texts.front());
                consensus.diagnostics["verdict"] = std::string(1, verdict);
                if (naive_keep_prior(verdict)) {
                    consensus.diagnostics["kept_prior"] = true;
                    chosen_reasoning = prior;
                } else {
                    consensus.diagnostics["kept_prior"] = false;
                    const CompletionBatch reanswer = recorder.chat(
                        "reanswer",
                        extend_dialogue(deduction_transcript, prior, kReanswerRequest),
                        single_params(config));
                    chosen_reasoning = reanswer.texts.front();
                }
            } catch (const ParseError& ex) {
                // fail open: keep the prior answer and record the problem
                consensus.diagnostics["parse_error"] = ex.what();
                consensus.diagnostics["kept_prior"] = true;
                chosen_reasoning = prior;
            }
            consensus.chosen_text = chosen_reasoning;
            result.consensus = std::move(consensus);
            break;
        }
    }

    const CompletionBatch final_batch = recorder.chat(
        "refinement", render_refinement(item, summary, chosen_reasoning), single_params(config));
    result.final_text = final_batch.texts.front();
}

}  // namespace

ItemResult run_item(const MCQItem& item, const PipelineConfig& config, Backend& backend) {
    ItemResult result;
    result.item_id = item.id;
    const long long started = config.clock_ms();
    StageRecorder recorder(backend, result);

    std::string stage = "routing";
    try {
        item.validate();
        switch (config.router) {
            case RouterKind::Taxonomy: {
                const RoutingDecision decision = route(item.question, config.feature_table());
                result.branch = decision.branch;
                result.route_decision = decision;
                break;
            }
            case RouterKind::Complexity: {
                const ComplexityReport report =
                    complexity_score(fallback_annotate(item.question), config.complexity);
                result.branch = report.needs_reasoning ? Branch::Deep : Branch::Direct;
                result.complexity = report;
                break;
            }
            case RouterKind::AlwaysDeep:
                result.branch = Branch::Deep;
                break;
            case RouterKind::AlwaysDirect:
                result.branch = Branch::Direct;
                break;
        }

        if (result.branch == Branch::Direct) {
            stage = "standard";
            run_direct(item, config, recorder, result);
        } else {
            stage = "deep";
            run_deep(item, config, recorder, result);
        }
        stage = "extraction";
        result.extracted = extract_answer(result.final_text, item.options);
    } catch (const std::exception& ex) {
        result.failed = true;
        result.failure = stage + ": " + ex.what();
    }

    if (item.gold) {
        result.correct = !result.failed && result.extracted && *result.extracted == *item.gold;
    }
    result.wall_ms = config.clock_ms() - started;
    return result;
}

std::vector<ItemResult> run_items(const std::vector<MCQItem>& items, const PipelineConfig& config,
                                  Backend& backend,
                                  const std::function<void(const ItemResult&)>& on_commit) {
    std::vector<std::optional<ItemResult>> slots(items.size());
    std::atomic<size_t> next{0};
    std::mutex commit_mutex;
    size_t commit_cursor = 0;
    std::exception_ptr first_error;

    auto worker = [&] {
        while (true) {
            const size_t index = next.fetch_add(1);
            if (index >= items.size()) return;
            ItemResult result = run_item(items[index], config, backend);
            std::lock_guard<std::mutex> lock(commit_mutex);
            slots[index] = std::move(result);
            while (commit_cursor < slots.size() && slots[commit_cursor].has_value()) {
                if (on_commit) {
                    try {
                        on_commit(*slots[commit_cursor]);
                    } catch (...) {
                        if (!first_error) first_error = std::current_exception();
                    }
                }
                ++commit_cursor;
            }
        }
    };

    const int worker_count = std::max(1, std::min(config.workers, static_cast<int>(items.size())));
    if (worker_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(worker_count));
        for (int i = 0; i < worker_count; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<ItemResult> results;
    results.reserve(items.size());
    for (auto& slot : slots) results.push_back(std::move(*slot));
    return results;
}

}  // namespace vista
