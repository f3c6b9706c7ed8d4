#include "vista/prompt_forge.hpp"

#include "vista/assets.hpp"
#include "vista/errors.hpp"
#include "vista/util.hpp"

namespace vista {

namespace {

// drops leading/trailing blank lines, keeps interior ones
std::string join_text_lines(const std::vector<std::string>& lines) {
    size_t begin = 0;
    size_t end = lines.size();
    while (begin < end && trim(lines[begin]).empty()) ++begin;
    while (end > begin && trim(lines[end - 1]).empty()) --end;
    std::string out;
    for (size_t i = begin; i < end; ++i) {
        if (i > begin) out.push_back('\n');
        out += lines[i];
    }
    return out;
}

const PromptTemplate& standard_template() {
    static const PromptTemplate t =
        PromptTemplate::parse(assets::kStandardInference, "standard_inference");
    return t;
}

const PromptTemplate& anchoring_template(bool with_focus) {
    static const PromptTemplate focused =
        PromptTemplate::parse(assets::kVisualAnchoring, "visual_anchoring");
    static const PromptTemplate plain =
        PromptTemplate::parse(assets::kVisualAnchoringPlain, "visual_anchoring_plain");
    return with_focus ? focused : plain;
}

const PromptTemplate& deduction_template(bool with_cot) {
    static const PromptTemplate cot =
        PromptTemplate::parse(assets::kEvidenceDeduction, "evidence_deduction");
    static const PromptTemplate plain =
        PromptTemplate::parse(assets::kEvidenceDeductionPlain, "evidence_deduction_plain");
    return with_cot ? cot : plain;
}

const PromptTemplate& refinement_template() {
    static const PromptTemplate t =
        PromptTemplate::parse(assets::kRefinedResponse, "refined_response");
    return t;
}

const PromptTemplate& naive_verify_template() {
    static const PromptTemplate t = PromptTemplate::parse(assets::kNaiveVerify, "naive_verify");
    return t;
}

void require_renderable(const MCQItem& item) {
    item.validate();
    if (item.media.empty()) {
        throw PreconditionError("item '" + item.id + "' has no frame references");
    }
}

}  // namespace

std::string substitute_slots(std::string_view text,
                             const std::map<std::string, std::string>& slots,
                             const std::string& template_name) {
    std::string out;
    out.reserve(text.size());
    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '{') {
            if (i + 1 < text.size() && text[i + 1] == '{') {
                out.push_back('{');
                ++i;
                continue;
            }
            const size_t close = text.find('}', i + 1);
            if (close == std::string_view::npos) {
                throw SchemaError("template '" + template_name + "': unterminated slot marker");
            }
            const std::string slot(text.substr(i + 1, close - i - 1));
            auto it = slots.find(slot);
            if (it == slots.end()) {
                throw SchemaError("template '" + template_name + "': unknown slot {" + slot + "}");
            }
            out += it->second;
            i = close;
            continue;
        }
        if (c == '}') {
            if (i + 1 < text.size() && text[i + 1] == '}') {
                out.push_back('}');
                ++i;
                continue;
            }
            throw SchemaError("template '" + template_name + "': stray '}' outside a slot");
        }
        out.push_back(c);
    }
    return out;
}

PromptTemplate PromptTemplate::parse(std::string_view source, const std::string& name) {
    PromptTemplate tpl;
    tpl.name_ = name;

    std::vector<std::string> pending_text;
    TemplateTurn* current = nullptr;
    auto flush_text = [&] {
        if (current != nullptr) current->text = join_text_lines(pending_text);
        pending_text.clear();
    };

    for (const auto& line : split_lines(source)) {
        if (line.rfind("@turn", 0) == 0) {
            flush_text();
            const std::string role = trim(std::string_view(line).substr(5));
            tpl.turns_.push_back(TemplateTurn{parse_role(role), false, {}});
            current = &tpl.turns_.back();
            continue;
        }
        if (trim(line) == "@media") {
            if (current == nullptr) {
                throw SchemaError("template '" + name + "': @media before any @turn");
            }
            if (current->has_media || !pending_text.empty()) {
                throw SchemaError("template '" + name +
                                  "': @media must appear once, before the turn text");
            }
            current->has_media = true;
            continue;
        }
        if (current == nullptr) {
            if (trim(line).empty()) continue;
            throw SchemaError("template '" + name + "': text before the first @turn");
        }
        pending_text.push_back(line);
    }
    flush_text();

    if (tpl.turns_.empty()) {
        throw SchemaError("template '" + name + "' declares no turns");
    }
    for (const auto& turn : tpl.turns_) {
        if (turn.role == Role::System && turn.has_media) {
            throw SchemaError("template '" + name + "': system turns cannot carry media");
        }
    }
    return tpl;
}

ChatTranscript PromptTemplate::render(const std::map<std::string, std::string>& slots,
                                      const std::vector<std::string>& media_refs) const {
    ChatTranscript transcript;
    for (const auto& turn : turns_) {
        ChatTurn rendered;
        rendered.role = turn.role;
        if (turn.has_media) {
            for (const auto& ref : media_refs) {
                rendered.segments.push_back(Segment::media(ref));
            }
        }
        rendered.segments.push_back(Segment::text(substitute_slots(turn.text, slots, name_)));
        transcript.turns.push_back(std::move(rendered));
    }
    return transcript;
}

ChatTranscript render_standard(const MCQItem& item) {
    require_renderable(item);
    return standard_template().render(
        {{"question", item.question}, {"options", render_options(item)}}, item.media);
}

ChatTranscript render_anchoring(const MCQItem& item, const PromptConfig& config) {
    require_renderable(item);
    if (config.with_question_focus) {
        return anchoring_template(true).render({{"question", item.question}}, item.media);
    }
    return anchoring_template(false).render({}, item.media);
}

ChatTranscript render_deduction(const MCQItem& item, const std::string& summary,
                                const PromptConfig& config) {
    require_renderable(item);
    if (trim(summary).empty()) {
        throw PreconditionError("render_deduction: summary must be nonempty");
    }
    return deduction_template(config.with_cot_trigger)
        .render({{"question", item.question},
                 {"options", render_options(item)},
                 {"summary", summary}},
                item.media);
}

ChatTranscript render_refinement(const MCQItem& item, const std::string& summary,
                                 const std::string& reasoning) {
    require_renderable(item);
    if (trim(summary).empty()) {
        throw PreconditionError("render_refinement: summary must be nonempty");
    }
    if (trim(reasoning).empty()) {
        throw PreconditionError("render_refinement: reasoning must be nonempty");
    }
    return refinement_template().render({{"question", item.question},
                                         {"options", render_options(item)},
                                         {"summary", summary},
                                         {"reasoning", reasoning}},
                                        item.media);
}

ChatTranscript render_naive_verify(const MCQItem& item, const std::string& prior_answer) {
    require_renderable(item);
    if (trim(prior_answer).empty()) {
        throw PreconditionError("render_naive_verify: prior answer must be nonempty");
    }
    return naive_verify_template().render({{"question", item.question},
                                           {"options", render_options(item)},
                                           {"prior_answer", prior_answer}},
                                          item.media);
}

}  // namespace vista
