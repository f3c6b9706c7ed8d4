#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vista/mock_backend.hpp"
#include "vista/pipeline.hpp"

using namespace vista;
using nlohmann::json;

namespace {

MCQItem robot_item() {
    MCQItem item;
    item.id = "u01";
    item.question = "Why did the robot stop in clip u01?";
    item.options = {{'A', "Low battery"},
                    {'B', "An obstacle appeared"},
                    {'C', "It finished the task"},
                    {'D', "A signal was lost"}};
    item.media = {"mock://frames/u01/f1.png", "mock://frames/u01/f2.png"};
    item.gold = 'B';
    return item;
}

json robot_fixture() {
    json fixture;
    fixture["name"] = "robot";
    fixture["embedding_dimension"] = 4;
    fixture["embed_seed"] = 99;
    fixture["capabilities"] =
        json{{"has_embeddings", true}, {"has_hidden_states", true}, {"max_media_per_request", 32}};
    fixture["rules"] = json::array({
        json{{"match", json{{"contains", json::array({"Please answer the following question:", "u01"})}}},
             {"completions", json::array({"The final answer is: B"})}},
        json{{"match", json{{"contains", json::array({"Summarize the main content in the video", "u01"})}}},
             {"completions", json::array({"U-sum: the robot halts in front of a box."})}},
        json{{"match", json{{"contains", json::array({"How reliable do you think this answer is?", "u01"})}}},
             {"completions", json::array({"A. very reliable"})}},
        json{{"match", json{{"contains", json::array({"Reconsider the key frames", "u01"})}}},
             {"completions", json::array({"u01 recheck: the box blocks the path. The answer is B"})}},
        json{{"match", json{{"contains", json::array({"Only select the best answer. The final answer is:", "u01"})}}},
             {"completions", json::array({"The final answer is: B"})}},
        json{{"match", json{{"contains", json::array({"The main content of the video is summarized below:", "u01"})},
                            {"not_contains", json::array({"Only select the best answer."})}}},
             {"completions",
              json::array({"u01 r1: a box sits in the path; it must stop. The answer is B",
                           "u01 r2: the obstacle forces a halt. The answer is B",
                           "u01 r3: the battery gauge still reads full. The answer is B",
                           "u01 r4: the task list is unfinished. The answer is B",
                           "u01 r5: telemetry stays connected. The answer is B"})}},
    });
    return fixture;
}

PipelineConfig base_config(RouterKind router, VerifyMethod verify, int samples) {
    PipelineConfig config;
    config.router = router;
    config.verify = verify;
    config.n_samples = samples;
    config.workers = 1;
    config.now_ms = [] { return 0LL; };
    return config;
}

}  // namespace

TEST_CASE("answer extraction cascade") {
    const std::vector<std::pair<char, std::string>> options = {
        {'A', "Low battery"}, {'B', "An obstacle appeared"}, {'C', "It finished"}, {'D', "Lost"}};

    SUBCASE("answer-is pattern") {
        CHECK(extract_answer("The final answer is: B", options) == 'B');
        CHECK(extract_answer("the answer is (d)", options) == 'D');
    }
    SUBCASE("standalone letter token") {
        CHECK(extract_answer("(C)", options) == 'C');
        CHECK(extract_answer("A.", options) == 'A');
        CHECK(extract_answer("I would pick B, definitely.", options) == 'B');
    }
    SUBCASE("letters outside the option range do not match") {
        CHECK(extract_answer("E", options) == std::nullopt);
        const std::vector<std::pair<char, std::string>> two = {{'A', "yes"}, {'B', "no"}};
        CHECK(extract_answer("C", two) == std::nullopt);
    }
    SUBCASE("unique option-text containment") {
        CHECK(extract_answer("Clearly an obstacle appeared in front.", options) == 'B');
    }
    SUBCASE("two quoted option texts are ambiguous") {
        CHECK(extract_answer("Either low battery or an obstacle appeared.", options) ==
              std::nullopt);
    }
    SUBCASE("nothing extractable") {
        CHECK(extract_answer("It is unclear from the frames.", options) == std::nullopt);
        CHECK(extract_answer("", options) == std::nullopt);
    }
    SUBCASE("cascade order: standalone letter beats option text") {
        CHECK(extract_answer("D but maybe an obstacle appeared", options) == 'D');
    }
}

TEST_CASE("direct branch makes exactly one chat call and records nothing deep") {
    const MCQItem item = robot_item();
    MockBackend backend(robot_fixture());
    const PipelineConfig config = base_config(RouterKind::AlwaysDirect, VerifyMethod::Lrc, 5);

    const ItemResult result = run_item(item, config, backend);
    CHECK_FALSE(result.failed);
    CHECK(result.branch == Branch::Direct);
    CHECK(result.chat_calls() == 1);
    CHECK(result.chat_invocations() == 1);
    CHECK_FALSE(result.summary.has_value());
    CHECK(result.paths.empty());
    CHECK_FALSE(result.consensus.has_value());
    CHECK(result.extracted == 'B');
    CHECK(result.correct == true);
}

TEST_CASE("taxonomy router sends causal questions down the deep branch") {
    const MCQItem item = robot_item();  // "Why did ..." -> causal
    MockBackend backend(robot_fixture());
    const PipelineConfig config = base_config(RouterKind::Taxonomy, VerifyMethod::Lrc, 5);

    const ItemResult result = run_item(item, config, backend);
    CHECK_FALSE(result.failed);
    REQUIRE(result.route_decision.has_value());
    CHECK(result.route_decision->category == QuestionCategory::CausalReasoning);
    CHECK(result.branch == Branch::Deep);
    CHECK(result.summary.has_value());
    CHECK(result.paths.size() == 5);
}

TEST_CASE("complexity router fills the complexity report instead") {
    const MCQItem item = robot_item();
    MockBackend backend(robot_fixture());
    PipelineConfig config = base_config(RouterKind::Complexity, VerifyMethod::Lrc, 5);

    const ItemResult result = run_item(item, config, backend);
    CHECK_FALSE(result.failed);
    REQUIRE(result.complexity.has_value());
    CHECK_FALSE(result.route_decision.has_value());
    // short plain question scores below the threshold
    CHECK(result.branch == Branch::Direct);
    CHECK(result.report_category() == QuestionCategory::Others);
}

TEST_CASE("lrc deep run: calls, paths, clusters, trace") {
    const MCQItem item = robot_item();
    MockBackend backend(robot_fixture());
    PipelineConfig config = base_config(RouterKind::AlwaysDeep, VerifyMethod::Lrc, 5);
    config.theta = 0.85;

    const ItemResult result = run_item(item, config, backend);
    CHECK_FALSE(result.failed);
    CHECK(result.branch == Branch::Deep);
    CHECK(result.summary == "U-sum: the robot halts in front of a box.");
    REQUIRE(result.paths.size() == 5);
    for (const auto& path : result.paths) {
        CHECK(path.extracted == 'B');
        CHECK(path.embedding.has_value());  // hidden states recorded
    }
    REQUIRE(result.consensus.has_value());
    CHECK(result.consensus->method == VerifyMethod::Lrc);
    CHECK(result.consensus->theta == doctest::Approx(0.85));
    CHECK(result.extracted == 'B');
    CHECK(result.correct == true);

    // 1 anchoring + 5 deduction samples + 1 refinement
    CHECK(result.chat_calls() == 7);
    CHECK(result.chat_invocations() == 3);
    int hidden_calls = 0;
    for (const auto& call : result.trace) {
        if (call.kind == "hidden_state") ++hidden_calls;
        if (call.kind == "chat") CHECK_FALSE(call.request_id.empty());
    }
    CHECK(hidden_calls == 5);
}

TEST_CASE("lrc falls back to text embeddings without hidden states") {
    json fixture = robot_fixture();
    fixture["capabilities"]["has_hidden_states"] = false;
    MockBackend backend(fixture);
    const PipelineConfig config = base_config(RouterKind::AlwaysDeep, VerifyMethod::Lrc, 5);

    const ItemResult result = run_item(robot_item(), config, backend);
    CHECK_FALSE(result.failed);
    int embed_calls = 0;
    for (const auto& call : result.trace) {
        if (call.kind == "embed") ++embed_calls;
    }
    CHECK(embed_calls == 1);
    CHECK(result.chat_calls() == 7);
}

TEST_CASE("majority voting counts letters and refines the winning path") {
    const MCQItem item = robot_item();
    MockBackend backend(robot_fixture());
    const PipelineConfig config = base_config(RouterKind::AlwaysDeep, VerifyMethod::Majority, 5);

    const ItemResult result = run_item(item, config, backend);
    CHECK_FALSE(result.failed);
    REQUIRE(result.consensus.has_value());
    CHECK(result.consensus->method == VerifyMethod::Majority);
    CHECK(result.consensus->chosen_text == "B");
    CHECK(result.consensus->diagnostics["tallies"]["B"] == 5);
    CHECK(result.chat_calls() == 7);
    // no embedding traffic under majority
    for (const auto& call : result.trace) CHECK(call.kind == "chat");
    CHECK(result.correct == true);
}

TEST_CASE("best-of-n samples the summary stage") {
    json fixture = robot_fixture();
    // three sampled candidate summaries; the second is pinned closest to the question
    fixture["rules"][1]["completions"] =
        json::array({"U-sum one: a robot and a box.",
                     "U-sum two: the robot stops before an obstacle box.",
                     "U-sum three: a robot in a room."});
    fixture["rules"][5]["match"]["contains"] = json::array(
        {"The main content of the video is summarized below:", "U-sum two"});
    fixture["embeddings"] = json{
        {"Why did the robot stop in clip u01?", {1.0, 0.0, 0.0, 0.0}},
        {"U-sum one: a robot and a box.", {0.0, 1.0, 0.0, 0.0}},
        {"U-sum two: the robot stops before an obstacle box.", {0.9, 0.1, 0.0, 0.0}},
        {"U-sum three: a robot in a room.", {0.0, 0.0, 1.0, 0.0}},
    };
    MockBackend backend(fixture);
    const PipelineConfig config = base_config(RouterKind::AlwaysDeep, VerifyMethod::BestOfN, 3);

    const ItemResult result = run_item(robot_item(), config, backend);
    CHECK_FALSE(result.failed);
    CHECK(result.summary == "U-sum two: the robot stops before an obstacle box.");
    REQUIRE(result.consensus.has_value());
    CHECK(result.consensus->method == VerifyMethod::BestOfN);
    CHECK(result.paths.size() == 1);  // single deduction under bon
    // 3 summary samples + 1 deduction + 1 refinement
    CHECK(result.chat_calls() == 5);
    int embed_calls = 0;
    for (const auto& call : result.trace) {
        if (call.kind == "embed") {
            ++embed_calls;
            CHECK(call.n_requested == 4);  // question + 3 candidates
        }
    }
    CHECK(embed_calls == 1);
}

TEST_CASE("naive verification keeps the prior answer on a reliable verdict") {
    const MCQItem item = robot_item();
    MockBackend backend(robot_fixture());
    const PipelineConfig config = base_config(RouterKind::AlwaysDeep, VerifyMethod::Naive, 5);

    const ItemResult result = run_item(item, config, backend);
    CHECK_FALSE(result.failed);
    REQUIRE(result.consensus.has_value());
    CHECK(result.consensus->diagnostics["verdict"] == "A");
    CHECK(result.consensus->diagnostics["kept_prior"] == true);
    CHECK(result.consensus->chosen_text == result.paths.front().text);
    // 1 anchoring + 5 deductions + 1 verify + 1 refinement
    CHECK(result.chat_calls() == 8);
    CHECK(result.chat_invocations() == 4);
}

TEST_CASE("naive verification re-answers once on an unreliable verdict") {
    json fixture = robot_fixture();
    fixture["rules"][2]["completions"] = json::array({"C. not very reliable"});
    MockBackend backend(fixture);
    const PipelineConfig config = base_config(RouterKind::AlwaysDeep, VerifyMethod::Naive, 5);

    const ItemResult result = run_item(robot_item(), config, backend);
    CHECK_FALSE(result.failed);
    REQUIRE(result.consensus.has_value());
    CHECK(result.consensus->diagnostics["kept_prior"] == false);
    CHECK(result.consensus->chosen_text ==
          "u01 recheck: the box blocks the path. The answer is B");
    // ... + 1 re-answer
    CHECK(result.chat_calls() == 9);
    CHECK(result.chat_invocations() == 5);
}

TEST_CASE("naive verification fails open on an unparseable verdict") {
    json fixture = robot_fixture();
    fixture["rules"][2]["completions"] = json::array({"hard to say"});
    MockBackend backend(fixture);
    const PipelineConfig config = base_config(RouterKind::AlwaysDeep, VerifyMethod::Naive, 5);

    const ItemResult result = run_item(robot_item(), config, backend);
    CHECK_FALSE(result.failed);
    REQUIRE(result.consensus.has_value());
    CHECK(result.consensus->diagnostics.contains("parse_error"));
    CHECK(result.consensus->diagnostics["kept_prior"] == true);
    CHECK(result.chat_calls() == 8);
}

TEST_CASE("stage failures are captured, not thrown") {
    json fixture = robot_fixture();
    fixture["rules"][1]["error"] = "unavailable";
    fixture["rules"][1].erase("completions");
    MockBackend backend(fixture);
    const PipelineConfig config = base_config(RouterKind::AlwaysDeep, VerifyMethod::Lrc, 5);

    const MCQItem item = robot_item();
    const ItemResult result = run_item(item, config, backend);
    CHECK(result.failed);
    CHECK(result.failure.find("deep") != std::string::npos);
    CHECK(result.correct == false);

    // the failed anchoring interaction still lands in the trace
    REQUIRE(result.trace.size() == 1);
    CHECK(result.trace[0].stage == "anchoring");
    CHECK(result.trace[0].n_requested == 1);
    CHECK(result.trace[0].n_received == 0);
}

TEST_CASE("item results serialize losslessly and reproducibly") {
    const MCQItem item = robot_item();
    const PipelineConfig config = base_config(RouterKind::Taxonomy, VerifyMethod::Lrc, 5);

    MockBackend backend_a(robot_fixture());
    MockBackend backend_b(robot_fixture());
    const ItemResult first = run_item(item, config, backend_a);
    const ItemResult second = run_item(item, config, backend_b);
    const std::string dump_first = to_json(first).dump();
    CHECK(dump_first == to_json(second).dump());

    const ItemResult reloaded = item_result_from_json(to_json(first));
    CHECK(to_json(reloaded).dump() == dump_first);
}

TEST_CASE("worker pool commits results in item order") {
    std::vector<MCQItem> items;
    for (int i = 0; i < 6; ++i) {
        MCQItem item = robot_item();
        item.id = "w" + std::to_string(i);
        items.push_back(item);
    }
    MockBackend backend(robot_fixture());
    PipelineConfig config = base_config(RouterKind::AlwaysDirect, VerifyMethod::Lrc, 1);
    config.workers = 4;

    std::vector<std::string> committed;
    const auto results = run_items(items, config, backend,
                                   [&](const ItemResult& r) { committed.push_back(r.item_id); });
    REQUIRE(results.size() == 6);
    for (int i = 0; i < 6; ++i) {
        CHECK(results[static_cast<size_t>(i)].item_id == "w" + std::to_string(i));
        CHECK(committed[static_cast<size_t>(i)] == "w" + std::to_string(i));
    }
}

TEST_CASE("config snapshot records the effective temperatures") {
    PipelineConfig config = base_config(RouterKind::Taxonomy, VerifyMethod::Lrc, 5);
    json snapshot = config.snapshot();
    CHECK(snapshot["sampling"]["temperature_multi_sample"] == doctest::Approx(0.7));
    CHECK(snapshot["sampling"]["temperature_single"] == doctest::Approx(0.0));

    config.n_samples = 1;
    CHECK(config.snapshot()["sampling"]["temperature_multi_sample"] == doctest::Approx(0.0));

    config.temperature = 0.3;
    CHECK(config.snapshot()["sampling"]["temperature_multi_sample"] == doctest::Approx(0.3));
}
