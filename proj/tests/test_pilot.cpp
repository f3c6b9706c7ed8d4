#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vista/mock_backend.hpp"
#include "vista/pilot.hpp"
#include "vista/util.hpp"

#include <zlib.h>

#include <filesystem>

using namespace vista;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

MCQItem pilot_item(const std::string& id, const std::string& marker) {
    MCQItem item;
    item.id = id;
    item.question = "What happens at the " + marker + " moment?";
    item.options = {{'A', "A door opens"},
                    {'B', "A light turns on"},
                    {'C', "A phone rings"},
                    {'D', "A window closes"}};
    item.media = {"mock://frames/" + id + "/f1.png", "mock://frames/" + id + "/f2.png"};
    item.gold = 'A';
    return item;
}

std::string chain_line(const std::string& item_id, const std::string& marker,
                       const std::vector<std::pair<std::string, std::string>>& probes) {
    json record;
    record["item_id"] = item_id;
    record["sufficiency_check"] = "facts pin the answer for " + marker;
    json steps = json::array();
    int id = 1;
    for (const auto& [probe, answer] : probes) {
        steps.push_back(json{{"step_id", id++},
                             {"visual_fact", "fact: " + probe},
                             {"binary_probe", probe},
                             {"probe_answer", answer}});
    }
    record["reasoning_chain"] = std::move(steps);
    return record.dump();
}

}  // namespace

TEST_CASE("chi-square goodness of fit against a fixed baseline") {
    SUBCASE("the 61-of-100 regime") {
        const ChiSquareResult result = chi_square_uniform(61, 100, 0.25);
        // (61-25)^2/25 + (39-75)^2/75 = 51.84 + 17.28
        CHECK(result.statistic == doctest::Approx(69.12).epsilon(1e-6));
        CHECK(result.p_below_001);
        CHECK_FALSE(result.low_expected_warning);
    }
    SUBCASE("exact expectation scores zero") {
        const ChiSquareResult result = chi_square_uniform(25, 100, 0.25);
        CHECK(result.statistic == doctest::Approx(0.0));
        CHECK_FALSE(result.p_below_001);
    }
    SUBCASE("two-cell hand computation with small n") {
        const ChiSquareResult result = chi_square_uniform(0, 4, 0.25);
        CHECK(result.statistic == doctest::Approx(4.0 / 3.0));
        CHECK(result.low_expected_warning);  // expected cell 1 < 5
    }
    SUBCASE("nonnegative across the range") {
        for (long long m = 0; m <= 20; ++m) {
            CHECK(chi_square_uniform(m, 20, 0.25).statistic >= 0.0);
        }
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(chi_square_uniform(1, 0, 0.25), PreconditionError);
        CHECK_THROWS_AS(chi_square_uniform(5, 4, 0.25), PreconditionError);
        CHECK_THROWS_AS(chi_square_uniform(-1, 4, 0.25), PreconditionError);
        CHECK_THROWS_AS(chi_square_uniform(1, 4, 0.0), PreconditionError);
        CHECK_THROWS_AS(chi_square_uniform(1, 4, 1.0), PreconditionError);
    }
}

TEST_CASE("probe chain schema") {
    SUBCASE("valid line") {
        const auto chains = parse_probe_chains(
            chain_line("p1", "alpha",
                       {{"Is the door open?", "Yes"},
                        {"Is the light off?", "No"},
                        {"Is a person present?", "Yes"}}) +
            "\n");
        REQUIRE(chains.size() == 1);
        CHECK(chains[0].item_id == "p1");
        CHECK(chains[0].reasoning_chain.size() == 3);
        CHECK(chains[0].reasoning_chain[1].answer_yes == false);
    }
    SUBCASE("probe answer outside yes/no") {
        CHECK_THROWS_AS(
            parse_probe_chains(chain_line("p1", "alpha",
                                          {{"q1", "Yes"}, {"q2", "Maybe"}, {"q3", "No"}})),
            SchemaError);
    }
    SUBCASE("too few steps") {
        CHECK_THROWS_AS(parse_probe_chains(chain_line("p1", "a", {{"q1", "Yes"}, {"q2", "No"}})),
                        SchemaError);
    }
    SUBCASE("too many steps") {
        std::vector<std::pair<std::string, std::string>> probes;
        for (int i = 0; i < 7; ++i) probes.emplace_back("q" + std::to_string(i), "Yes");
        CHECK_THROWS_AS(parse_probe_chains(chain_line("p1", "a", probes)), SchemaError);
    }
    SUBCASE("non-consecutive step ids") {
        json record = json::parse(chain_line(
            "p1", "a", {{"q1", "Yes"}, {"q2", "Yes"}, {"q3", "Yes"}}));
        record["reasoning_chain"][2]["step_id"] = 9;
        CHECK_THROWS_AS(parse_probe_chains(record.dump()), SchemaError);
    }
}

TEST_CASE("probe tasks A, B and C over a scripted backend") {
    const std::vector<MCQItem> items = {pilot_item("p1", "pilot-one"),
                                        pilot_item("p2", "pilot-two")};
    const auto chains = parse_probe_chains(
        chain_line("p1", "pilot-one",
                   {{"Is the handle turning?", "Yes"},
                    {"Is the hallway dark?", "No"},
                    {"Is the door moving?", "Yes"}}) +
        "\n" +
        chain_line("p2", "pilot-two",
                   {{"Is a lamp visible?", "Yes"},
                    {"Is the switch flipped?", "Yes"},
                    {"Is the room bright afterwards?", "Yes"}}) +
        "\n");

    json fixture;
    fixture["name"] = "pilot";
    fixture["embedding_dimension"] = 4;
    fixture["rules"] = json::array();
    // task A: both items answered wrong on purpose (the guard keeps these
    // rules away from the fact-injected task C transcripts)
    fixture["rules"].push_back(
        json{{"match", json{{"contains", json::array({"Please answer the following question:",
                                                      "pilot-one"})},
                            {"not_contains", json::array({"Known visual facts:"})}}},
             {"completions", json::array({"The final answer is: C"})}});
    fixture["rules"].push_back(
        json{{"match", json{{"contains", json::array({"Please answer the following question:",
                                                      "pilot-two"})},
                            {"not_contains", json::array({"Known visual facts:"})}}},
             {"completions", json::array({"The final answer is: C"})}});
    // task B: every probe answered with its gold truth value
    for (const auto& chain : chains) {
        for (const auto& step : chain.reasoning_chain) {
            fixture["rules"].push_back(
                json{{"match", json{{"contains", json::array({"with Yes or No:",
                                                              step.binary_probe})}}},
                     {"completions",
                      json::array({step.answer_yes ? "Yes, it is." : "No, it is not."})}});
        }
    }
    // task C: facts flip p1 to correct, p2 stays wrong
    fixture["rules"].push_back(
        json{{"match", json{{"contains", json::array({"Known visual facts:", "pilot-one"})}}},
             {"completions", json::array({"The final answer is: A"})}});
    fixture["rules"].push_back(
        json{{"match", json{{"contains", json::array({"Known visual facts:", "pilot-two"})}}},
             {"completions", json::array({"The final answer is: C"})}});
    MockBackend backend(fixture);

    const ProbeTaskResult result = run_probe_tasks(chains, items, backend);
    CHECK(result.a_total == 2);
    CHECK(result.acc_a() == doctest::Approx(0.0));
    CHECK(result.b_total == 6);
    CHECK(result.acc_b() == doctest::Approx(1.0));
    CHECK(result.c_total == 2);
    CHECK(result.acc_c() == doctest::Approx(0.5));
}

TEST_CASE("probe tasks reject unresolvable item ids") {
    const std::vector<MCQItem> items = {pilot_item("p1", "pilot-one")};
    const auto chains = parse_probe_chains(
        chain_line("ghost", "nowhere",
                   {{"q1", "Yes"}, {"q2", "Yes"}, {"q3", "Yes"}}));
    json fixture;
    fixture["name"] = "empty";
    fixture["default_completions"] = json::array({"Yes"});
    MockBackend backend(fixture);
    try {
        run_probe_tasks(chains, items, backend);
        FAIL("expected SchemaError");
    } catch (const SchemaError& ex) {
        CHECK(std::string(ex.what()).find("ghost") != std::string::npos);
    }
}

TEST_CASE("fact-injected transcripts carry no media") {
    const MCQItem item = pilot_item("p1", "pilot-one");
    const ChatTranscript transcript =
        render_fact_injected(item, {"The door is open", "The hallway is lit"});
    for (const auto& turn : transcript.turns) {
        for (const auto& seg : turn.segments) CHECK(seg.kind == Segment::Kind::Text);
    }
    const std::string text = transcript.last_user_text();
    CHECK(text.find("Known visual facts:") != std::string::npos);
    CHECK(text.find("1. The door is open") != std::string::npos);
    CHECK(text.find("2. The hallway is lit") != std::string::npos);
    CHECK(text.find(item.question) != std::string::npos);
    CHECK(text.find("A. A door opens") != std::string::npos);
}

TEST_CASE("blind consistency over black frames") {
    // 100 failed items whose original choice was always B
    std::vector<MCQItem> items;
    std::map<std::string, char> original;
    json fixture;
    fixture["name"] = "blind";
    fixture["rules"] = json::array();
    for (int i = 1; i <= 100; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "q%03d", i);
        MCQItem item = pilot_item(buf, std::string("marker-") + buf);
        items.push_back(item);
        original[buf] = 'B';
        // 61 items repeat the original error blind; 39 answer differently
        fixture["rules"].push_back(json{
            {"match", json{{"contains", json::array({std::string("marker-") + buf})}}},
            {"completions", json::array({i <= 61 ? "The final answer is: B"
                                                 : "The final answer is: C"})}});
    }
    MockBackend backend(fixture);

    BlindConsistencyOptions options;
    options.resolution = 16;  // keep the generated frame tiny
    options.work_dir = (fs::temp_directory_path() / "vista_blind_test").string();
    const BlindConsistencyReport report =
        run_blind_consistency(items, original, backend, options);

    CHECK(report.n == 100);
    CHECK(report.matches == 61);
    CHECK(report.excluded == 0);
    CHECK(report.consistency_rate == doctest::Approx(0.61));
    CHECK(report.chi_square == doctest::Approx(69.12).epsilon(1e-6));
    CHECK(report.p_below_001);
}

TEST_CASE("unparseable blind answers are excluded and counted") {
    std::vector<MCQItem> items = {pilot_item("b1", "mark-b1"), pilot_item("b2", "mark-b2"),
                                  pilot_item("b3", "mark-b3")};
    const std::map<std::string, char> original = {{"b1", 'B'}, {"b2", 'B'}, {"b3", 'B'}};
    json fixture;
    fixture["name"] = "blind-small";
    fixture["rules"] = json::array(
        {json{{"match", json{{"contains", json::array({"mark-b1"})}}},
              {"completions", json::array({"The final answer is: B"})}},
         json{{"match", json{{"contains", json::array({"mark-b2"})}}},
              {"completions", json::array({"no clue at all"})}},
         json{{"match", json{{"contains", json::array({"mark-b3"})}}},
              {"completions", json::array({"The final answer is: D"})}}});
    MockBackend backend(fixture);

    BlindConsistencyOptions options;
    options.resolution = 16;
    options.work_dir = (fs::temp_directory_path() / "vista_blind_small").string();
    const BlindConsistencyReport report =
        run_blind_consistency(items, original, backend, options);
    CHECK(report.n == 2);
    CHECK(report.matches == 1);
    CHECK(report.excluded == 1);
    CHECK(report.low_expected_warning);  // expected cell 0.5 < 5

    SUBCASE("missing original choice is a precondition error") {
        const std::map<std::string, char> incomplete = {{"b1", 'B'}};
        CHECK_THROWS_AS(run_blind_consistency(items, incomplete, backend, options),
                        PreconditionError);
    }
}

TEST_CASE("blind frames replace media at the native frame count") {
    MCQItem item = pilot_item("b1", "mark-b1");
    item.media = {"mock://a", "mock://b", "mock://c"};
    json fixture;
    fixture["name"] = "count";
    // fires only when the frames are the generated black images
    fixture["rules"] = json::array(
        {json{{"match", json{{"media_contains", "black_16x16"}}},
              {"completions", json::array({"The final answer is: B"})}}});
    MockBackend backend(fixture);

    BlindConsistencyOptions options;
    options.resolution = 16;
    options.work_dir = (fs::temp_directory_path() / "vista_blind_count").string();
    const BlindConsistencyReport report =
        run_blind_consistency({item}, {{"b1", 'B'}}, backend, options);
    CHECK(report.matches == 1);

    const auto log = backend.call_log();
    REQUIRE(log.size() == 1);
    CHECK(log[0].kind == "chat");
    // the blinded transcript still carries all three frame slots
    CHECK(log[0].media_count == 3);
}

TEST_CASE("black png is a valid all-zero grayscale image") {
    const fs::path path = fs::temp_directory_path() / "vista_black_check.png";
    write_black_png(path.string(), 24, 16);
    const std::string bytes = read_file(path.string());

    REQUIRE(bytes.size() > 45);
    CHECK(bytes.substr(1, 3) == "PNG");

    // IHDR starts at offset 8: length(4) type(4) data(13)
    CHECK(bytes.substr(12, 4) == "IHDR");
    auto be32 = [&](size_t offset) {
        return (static_cast<unsigned>(static_cast<unsigned char>(bytes[offset])) << 24) |
               (static_cast<unsigned>(static_cast<unsigned char>(bytes[offset + 1])) << 16) |
               (static_cast<unsigned>(static_cast<unsigned char>(bytes[offset + 2])) << 8) |
               static_cast<unsigned>(static_cast<unsigned char>(bytes[offset + 3]));
    };
    CHECK(be32(16) == 24);  // width
    CHECK(be32(20) == 16);  // height

    // IDAT payload inflates to (width+1)*height zero bytes
    const size_t idat_len = be32(33);
    REQUIRE(bytes.substr(37, 4) == "IDAT");
    std::string inflated(25 * 16, 'x');
    uLongf out_len = inflated.size();
    REQUIRE(uncompress(reinterpret_cast<Bytef*>(inflated.data()), &out_len,
                       reinterpret_cast<const Bytef*>(bytes.data() + 41),
                       static_cast<uLong>(idat_len)) == Z_OK);
    CHECK(out_len == 25 * 16);
    for (char c : inflated) CHECK(c == '\0');

    SUBCASE("deterministic bytes") {
        const fs::path again = fs::temp_directory_path() / "vista_black_check2.png";
        write_black_png(again.string(), 24, 16);
        CHECK(read_file(again.string()) == bytes);
    }
    SUBCASE("bad dimensions rejected") {
        CHECK_THROWS_AS(write_black_png("/tmp/x.png", 0, 5), PreconditionError);
    }
}

TEST_CASE("fact extraction prompt substitution") {
    const MCQItem item = pilot_item("p1", "pilot-one");
    const std::string prompt = fact_extraction_prompt(item);
    CHECK(prompt.find("User Question: \"" + item.question + "\"") != std::string::npos);
    CHECK(prompt.find("Correct Answer: \"A. A door opens\"") != std::string::npos);
    CHECK(prompt.find("\"reasoning_chain\": [") != std::string::npos);
    CHECK(prompt.find("\"sufficiency_check\"") != std::string::npos);
    // escaped braces render as literals
    CHECK(prompt.find("{\n") != std::string::npos);
    CHECK(prompt.find("{question}") == std::string::npos);

    MCQItem no_gold = item;
    no_gold.gold.reset();
    CHECK_THROWS_AS(fact_extraction_prompt(no_gold), PreconditionError);
}
