#include "vista/pilot.hpp"

#include "vista/assets.hpp"
#include "vista/pipeline.hpp"
#include "vista/prompt_forge.hpp"
#include "vista/util.hpp"

#include <zlib.h>

#include <filesystem>
#include <set>

namespace vista {

using nlohmann::json;
namespace fs = std::filesystem;

void ProbeChain::validate() const {
    if (item_id.empty()) throw SchemaError("probe chain has empty item_id");
    if (reasoning_chain.size() < 3 || reasoning_chain.size() > 6) {
        throw SchemaError("probe chain for '" + item_id + "' must have 3 to 6 steps, got " +
                          std::to_string(reasoning_chain.size()));
    }
    for (size_t i = 0; i < reasoning_chain.size(); ++i) {
        const auto& step = reasoning_chain[i];
        if (step.step_id != static_cast<int>(i) + 1) {
            throw SchemaError("probe chain for '" + item_id +
                              "': step_ids must run consecutively from 1");
        }
        if (trim(step.visual_fact).empty() || trim(step.binary_probe).empty()) {
            throw SchemaError("probe chain for '" + item_id + "' step " +
                              std::to_string(step.step_id) + " has an empty fact or probe");
        }
    }
}

std::vector<ProbeChain> parse_probe_chains(const std::string& text) {
    std::vector<ProbeChain> chains;
    int line_number = 0;
    for (const auto& line : split_lines(text)) {
        ++line_number;
        if (trim(line).empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& ex) {
            throw SchemaError("probe file line " + std::to_string(line_number) +
                              ": invalid JSON: " + ex.what());
        }
        ProbeChain chain;
        chain.item_id = record.value("item_id", std::string());
        chain.sufficiency_check = record.value("sufficiency_check", std::string());
        if (!record.contains("reasoning_chain") || !record.at("reasoning_chain").is_array()) {
            throw SchemaError("probe file line " + std::to_string(line_number) +
                              ": missing reasoning_chain array");
        }
        for (const auto& s : record.at("reasoning_chain")) {
            ProbeStep step;
            step.step_id = s.at("step_id").get<int>();
            step.visual_fact = s.at("visual_fact").get<std::string>();
            step.binary_probe = s.at("binary_probe").get<std::string>();
            const std::string answer = to_lower(trim(s.at("probe_answer").get<std::string>()));
            if (answer == "yes") {
                step.answer_yes = true;
            } else if (answer == "no") {
                step.answer_yes = false;
            } else {
                throw SchemaError("probe file line " + std::to_string(line_number) +
                                  ": probe_answer must be Yes or No, got '" +
                                  s.at("probe_answer").get<std::string>() + "'");
            }
            chain.reasoning_chain.push_back(std::move(step));
        }
        try {
            chain.validate();
        } catch (const SchemaError& ex) {
            throw SchemaError("probe file line " + std::to_string(line_number) + ": " + ex.what());
        }
        chains.push_back(std::move(chain));
    }
    return chains;
}

std::vector<ProbeChain> load_probe_chains(const std::string& path) {
    return parse_probe_chains(read_file(path));
}

namespace {

ChatTurn system_turn() {
    ChatTurn turn;
    turn.role = Role::System;
    turn.segments.push_back(Segment::text("You are a helpful assistant."));
    return turn;
}

ChatTranscript render_probe(const MCQItem& item, const std::string& probe) {
    ChatTranscript transcript;
    transcript.turns.push_back(system_turn());
    ChatTurn user;
    user.role = Role::User;
    for (const auto& ref : item.media) user.segments.push_back(Segment::media(ref));
    user.segments.push_back(Segment::text(
        "The input consists of a sequence of key frames from a video. Please answer the "
        "following question with Yes or No:\n" +
        probe));
    transcript.turns.push_back(std::move(user));
    return transcript;
}

/// First standalone yes/no word decides; anything else is no parse.
std::optional<bool> parse_yes_no(const std::string& text) {
    for (const auto& word : split_words(text)) {
        if (word == "yes") return true;
        if (word == "no") return false;
    }
    return std::nullopt;
}

SamplingParams one_shot() {
    SamplingParams params;
    params.temperature = 0.0;
    params.n_samples = 1;
    return params;
}

const MCQItem& resolve_item(const std::vector<MCQItem>& items, const std::string& item_id) {
    for (const auto& item : items) {
        if (item.id == item_id) return item;
    }
    throw SchemaError("probe chain references unknown item '" + item_id + "'");
}

std::optional<char> answer_item(const ChatTranscript& transcript, const MCQItem& item,
                                Backend& backend) {
    const CompletionBatch batch = backend.chat(transcript, one_shot());
    return extract_answer(batch.texts.front(), item.options);
}

}  // namespace

ChatTranscript render_fact_injected(const MCQItem& item, const std::vector<std::string>& facts) {
    std::string text = "Known visual facts:\n";
    for (size_t i = 0; i < facts.size(); ++i) {
        text += std::to_string(i + 1) + ". " + facts[i] + "\n";
    }
    text += "\nPlease answer the following question:\n" + item.question + "\n" +
            render_options(item);

    ChatTranscript transcript;
    transcript.turns.push_back(system_turn());
    ChatTurn user;
    user.role = Role::User;
    user.segments.push_back(Segment::text(std::move(text)));
    transcript.turns.push_back(std::move(user));
    return transcript;
}

ProbeTaskResult run_probe_tasks(const std::vector<ProbeChain>& chains,
                                const std::vector<MCQItem>& items, Backend& backend) {
    if (chains.empty()) throw PreconditionError("run_probe_tasks: no probe chains");
    for (const auto& chain : chains) {
        chain.validate();
        const MCQItem& item = resolve_item(items, chain.item_id);
        if (item.media.empty()) {
            throw SchemaError("item '" + item.id + "' has no media; probes need frames");
        }
        if (!item.gold) {
            throw SchemaError("item '" + item.id + "' has no gold answer; tasks need one");
        }
    }

    ProbeTaskResult result;

    // Task A: plain end-to-end answering, once per distinct chain item
    std::set<std::string> seen;
    for (const auto& chain : chains) {
        if (!seen.insert(chain.item_id).second) continue;
        const MCQItem& item = resolve_item(items, chain.item_id);
        const std::optional<char> letter = answer_item(render_standard(item), item, backend);
        ++result.a_total;
        if (letter && *letter == *item.gold) ++result.a_correct;
    }

    // Task B: every probe, frames attached; also remember which facts held
    std::map<const ProbeChain*, std::vector<std::string>> verified_facts;
    for (const auto& chain : chains) {
        const MCQItem& item = resolve_item(items, chain.item_id);
        for (const auto& step : chain.reasoning_chain) {
            const CompletionBatch batch =
                backend.chat(render_probe(item, step.binary_probe), one_shot());
            const std::optional<bool> parsed = parse_yes_no(batch.texts.front());
            ++result.b_total;
            if (parsed && *parsed == step.answer_yes) {
                ++result.b_correct;
                verified_facts[&chain].push_back(step.visual_fact);
            }
        }
    }

    // Task C: re-ask with verified facts as text, visual processing bypassed
    for (const auto& chain : chains) {
        const MCQItem& item = resolve_item(items, chain.item_id);
        const ChatTranscript transcript = render_fact_injected(item, verified_facts[&chain]);
        for (const auto& turn : transcript.turns) {
            for (const auto& seg : turn.segments) {
                if (seg.kind == Segment::Kind::Media) {
                    throw VistaError("task C transcript must not carry media");
                }
            }
        }
        const std::optional<char> letter = answer_item(transcript, item, backend);
        ++result.c_total;
        if (letter && *letter == *item.gold) ++result.c_correct;
    }
    return result;
}

ChiSquareResult chi_square_uniform(long long matches, long long n, double p0) {
    if (n <= 0) throw PreconditionError("chi_square_uniform: n must be positive");
    if (matches < 0 || matches > n) {
        throw PreconditionError("chi_square_uniform: matches must lie in [0, n]");
    }
    if (p0 <= 0.0 || p0 >= 1.0) {
        throw PreconditionError("chi_square_uniform: p0 must lie strictly in (0, 1)");
    }
    const double expected_match = static_cast<double>(n) * p0;
    const double expected_other = static_cast<double>(n) * (1.0 - p0);
    const double observed_match = static_cast<double>(matches);
    const double observed_other = static_cast<double>(n - matches);

    ChiSquareResult result;
    const double d1 = observed_match - expected_match;
    const double d2 = observed_other - expected_other;
    result.statistic = d1 * d1 / expected_match + d2 * d2 / expected_other;
    result.p_below_001 = result.statistic > 10.828;  // df=1, alpha=0.001
    result.low_expected_warning = expected_match < 5.0 || expected_other < 5.0;
    return result;
}

BlindConsistencyReport run_blind_consistency(const std::vector<MCQItem>& items,
                                             const std::map<std::string, char>& original_choices,
                                             Backend& backend,
                                             const BlindConsistencyOptions& options) {
    if (items.empty()) throw PreconditionError("run_blind_consistency: no items");
    for (const auto& item : items) {
        if (!original_choices.count(item.id)) {
            throw PreconditionError("item '" + item.id + "' has no recorded original choice");
        }
    }

    const fs::path dir =
        options.work_dir.empty() ? fs::temp_directory_path() : fs::path(options.work_dir);
    fs::create_directories(dir);
    const fs::path black = dir / ("black_" + std::to_string(options.resolution) + "x" +
                                  std::to_string(options.resolution) + ".png");
    if (!fs::exists(black)) {
        write_black_png(black.string(), options.resolution, options.resolution);
    }

    BlindConsistencyReport report;
    for (const auto& item : items) {
        MCQItem blinded = item;
        blinded.media.assign(item.media.size(), black.string());  // native frame count
        std::optional<char> letter;
        try {
            letter = answer_item(render_standard(blinded), blinded, backend);
        } catch (const BackendError&) {
            letter = std::nullopt;
        }
        if (!letter) {
            ++report.excluded;
            continue;
        }
        ++report.n;
        if (*letter == original_choices.at(item.id)) ++report.matches;
    }

    if (report.n > 0) {
        report.consistency_rate =
            static_cast<double>(report.matches) / static_cast<double>(report.n);
        const ChiSquareResult chi = chi_square_uniform(report.matches, report.n, options.p0);
        report.chi_square = chi.statistic;
        report.p_below_001 = chi.p_below_001;
        report.low_expected_warning = chi.low_expected_warning;
    } else {
        report.low_expected_warning = true;
    }
    return report;
}

namespace {

void append_u32(std::string& out, std::uint32_t value) {
    out.push_back(static_cast<char>((value >> 24) & 0xff));
    out.push_back(static_cast<char>((value >> 16) & 0xff));
    out.push_back(static_cast<char>((value >> 8) & 0xff));
    out.push_back(static_cast<char>(value & 0xff));
}

void append_chunk(std::string& out, const char type[4], const std::string& data) {
    append_u32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                           static_cast<uInt>(body.size()));
    append_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_black_png(const std::string& path, int width, int height) {
    if (width < 1 || height < 1) throw PreconditionError("png dimensions must be positive");

    std::string ihdr;
    append_u32(ihdr, static_cast<std::uint32_t>(width));
    append_u32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(0);   // grayscale
    ihdr.push_back(0);   // deflate
    ihdr.push_back(0);   // adaptive filtering
    ihdr.push_back(0);   // no interlace

    // one filter byte + width zero samples per scanline
    const std::string raw(static_cast<size_t>(height) * (static_cast<size_t>(width) + 1), '\0');
    uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
    std::string compressed(compressed_size, '\0');
    if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &compressed_size,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                  Z_BEST_COMPRESSION) != Z_OK) {
        throw VistaError("png scanline compression failed");
    }
    compressed.resize(compressed_size);

    std::string png("\x89PNG\r\n\x1a\n", 8);
    append_chunk(png, "IHDR", ihdr);
    append_chunk(png, "IDAT", compressed);
    append_chunk(png, "IEND", "");
    write_file(path, png);
}

std::string fact_extraction_prompt(const MCQItem& item) {
    item.validate();
    if (!item.gold) {
        throw PreconditionError("fact extraction prompt needs the item's gold answer");
    }
    const std::string gold_text = item.option_text(*item.gold).value_or("");
    return substitute_slots(assets::kFactExtractionPrompt,
                            {{"question", item.question},
                             {"gold_answer", std::string(1, *item.gold) + ". " + gold_text}},
                            "fact_extraction_prompt");
}

}  // namespace vista
