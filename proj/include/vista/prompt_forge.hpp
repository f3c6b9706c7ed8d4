#pragma once

#include "vista/chat.hpp"

#include <map>
#include <string>

namespace vista {

/// Ablation toggles. Defaults reproduce the best-performing configuration.
struct PromptConfig {
    bool with_question_focus = true;
    bool with_cot_trigger = true;
};

/// A role-structured prompt template with named substitution slots.
///
/// Template source format, one directive per line:
///   @turn <role>   starts a turn (system|user|assistant)
///   @media         placeholder expanded to the item's ordered frame refs
/// All other lines are turn text. {name} marks a slot; literal braces are
/// escaped by doubling ({{ and }}). Substituted values are inserted after the
/// turn structure is parsed, so slot content can never alter it.
class PromptTemplate {
public:
    static PromptTemplate parse(std::string_view source, const std::string& name);

    /// Substitutes slots and expands @media to one media segment per frame.
    /// Unknown slot references and missing values throw SchemaError.
    ChatTranscript render(const std::map<std::string, std::string>& slots,
                          const std::vector<std::string>& media_refs) const;

    const std::string& name() const { return name_; }

private:
    struct TemplateTurn {
        Role role;
        bool has_media = false;   // at most one @media per turn, before the text
        std::string text;         // with slot markers still in place
    };

    std::string name_;
    std::vector<TemplateTurn> turns_;
};

/// Substitutes {slot} markers in flat template text (used for the offline
/// fact-extraction prompt asset, which is not turn-structured).
std::string substitute_slots(std::string_view text,
                             const std::map<std::string, std::string>& slots,
                             const std::string& template_name);

/// Single-call question answering over the frames.
ChatTranscript render_standard(const MCQItem& item);

/// Question-focused summary request (evidence materialization stage).
ChatTranscript render_anchoring(const MCQItem& item, const PromptConfig& config = {});

/// Step-by-step deduction over a previously produced summary.
ChatTranscript render_deduction(const MCQItem& item, const std::string& summary,
                                const PromptConfig& config = {});

/// Final-answer elicitation conditioned on summary and chosen reasoning.
ChatTranscript render_refinement(const MCQItem& item, const std::string& summary,
                                 const std::string& reasoning);

/// Reliability self-check over a prior answer.
ChatTranscript render_naive_verify(const MCQItem& item, const std::string& prior_answer);

}  // namespace vista
