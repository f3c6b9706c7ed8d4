#include "vista/chat.hpp"

#include "vista/errors.hpp"
#include "vista/util.hpp"

#include <json.hpp>

namespace vista {

using nlohmann::json;

std::string_view role_name(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

Role parse_role(std::string_view name) {
    if (name == "system") return Role::System;
    if (name == "user") return Role::User;
    if (name == "assistant") return Role::Assistant;
    throw SchemaError("unknown chat role: '" + std::string(name) + "'");
}

std::string ChatTurn::text() const {
    std::string out;
    for (const auto& seg : segments) {
        if (seg.kind != Segment::Kind::Text) continue;
        if (!out.empty()) out.push_back('\n');
        out += seg.payload;
    }
    return out;
}

std::vector<std::string> ChatTurn::media_refs() const {
    std::vector<std::string> refs;
    for (const auto& seg : segments) {
        if (seg.kind == Segment::Kind::Media) refs.push_back(seg.payload);
    }
    return refs;
}

int ChatTranscript::media_count() const {
    int count = 0;
    for (const auto& turn : turns) {
        for (const auto& seg : turn.segments) {
            if (seg.kind == Segment::Kind::Media) ++count;
        }
    }
    return count;
}

std::string ChatTranscript::last_user_text() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
        if (it->role == Role::User) return it->text();
    }
    return {};
}

std::string ChatTranscript::all_text() const {
    std::string out;
    for (const auto& turn : turns) {
        const std::string text = turn.text();
        if (text.empty()) continue;
        if (!out.empty()) out.push_back('\n');
        out += text;
    }
    return out;
}

json to_json(const ChatTurn& turn) {
    json segments = json::array();
    for (const auto& seg : turn.segments) {
        json s;
        s["kind"] = seg.kind == Segment::Kind::Media ? "media" : "text";
        s["payload"] = seg.payload;
        segments.push_back(std::move(s));
    }
    json j;
    j["role"] = std::string(role_name(turn.role));
    j["segments"] = std::move(segments);
    return j;
}

ChatTurn turn_from_json(const json& j) {
    ChatTurn turn;
    turn.role = parse_role(j.at("role").get<std::string>());
    for (const auto& s : j.at("segments")) {
        const std::string kind = s.at("kind").get<std::string>();
        if (kind == "text") {
            turn.segments.push_back(Segment::text(s.at("payload").get<std::string>()));
        } else if (kind == "media") {
            turn.segments.push_back(Segment::media(s.at("payload").get<std::string>()));
        } else {
            throw SchemaError("unknown segment kind: '" + kind + "'");
        }
    }
    return turn;
}

json to_json(const ChatTranscript& transcript) {
    json turns = json::array();
    for (const auto& turn : transcript.turns) turns.push_back(to_json(turn));
    json j;
    j["turns"] = std::move(turns);
    return j;
}

ChatTranscript transcript_from_json(const json& j) {
    ChatTranscript transcript;
    for (const auto& t : j.at("turns")) transcript.turns.push_back(turn_from_json(t));
    return transcript;
}

std::string fingerprint(const ChatTranscript& transcript) {
    return to_hex16(fnv1a64(to_json(transcript).dump()));
}

void validate_for_completion(const ChatTranscript& transcript) {
    if (transcript.turns.empty()) {
        throw PreconditionError("transcript has no turns");
    }
    if (transcript.turns.front().role != Role::System) {
        throw PreconditionError("first turn must be system");
    }
    for (const auto& seg : transcript.turns.front().segments) {
        if (seg.kind != Segment::Kind::Text) {
            throw PreconditionError("system turn must contain only text segments");
        }
    }
    Role expected = Role::User;
    for (size_t i = 1; i < transcript.turns.size(); ++i) {
        if (transcript.turns[i].role != expected) {
            throw PreconditionError("turns after system must alternate user/assistant");
        }
        expected = expected == Role::User ? Role::Assistant : Role::User;
    }
    if (transcript.turns.back().role != Role::User) {
        throw PreconditionError("transcript submitted for completion must end on a user turn");
    }
}

void MCQItem::validate() const {
    if (id.empty()) throw SchemaError("item has empty id");
    if (trim(question).empty()) throw SchemaError("item '" + id + "' has empty question");
    if (options.size() < 2) {
        throw SchemaError("item '" + id + "' needs at least 2 options, got " +
                          std::to_string(options.size()));
    }
    for (size_t i = 0; i < options.size(); ++i) {
        const char expected = static_cast<char>('A' + i);
        if (options[i].first != expected) {
            throw SchemaError("item '" + id + "': option letters must run consecutively from A");
        }
    }
    if (gold) {
        const char last = static_cast<char>('A' + options.size() - 1);
        if (*gold < 'A' || *gold > last) {
            throw SchemaError("item '" + id + "': gold letter '" + std::string(1, *gold) +
                              "' outside option range A-" + std::string(1, last));
        }
    }
}

std::optional<std::string> MCQItem::option_text(char letter) const {
    for (const auto& [l, text] : options) {
        if (l == letter) return text;
    }
    return std::nullopt;
}

std::string render_options(const MCQItem& item) {
    std::string out;
    for (const auto& [letter, text] : item.options) {
        if (!out.empty()) out.push_back('\n');
        out.push_back(letter);
        out += ". ";
        out += text;
    }
    return out;
}

json to_json(const MCQItem& item) {
    json j;
    j["id"] = item.id;
    j["question"] = item.question;
    j["frames"] = item.media;
    json opts = json::array();
    for (const auto& [letter, text] : item.options) opts.push_back(text);
    j["options"] = std::move(opts);
    if (item.gold) j["answer"] = std::string(1, *item.gold);
    return j;
}

MCQItem mcq_item_from_json(const json& j) {
    MCQItem item;
    item.id = j.at("id").get<std::string>();
    item.question = j.at("question").get<std::string>();
    if (j.contains("frames")) {
        item.media = j.at("frames").get<std::vector<std::string>>();
    }
    const auto& opts = j.at("options");
    if (!opts.is_array()) throw SchemaError("item '" + item.id + "': options must be an array");
    char letter = 'A';
    for (const auto& o : opts) {
        item.options.emplace_back(letter++, o.get<std::string>());
    }
    if (j.contains("answer") && !j.at("answer").is_null()) {
        const std::string answer = j.at("answer").get<std::string>();
        if (answer.size() != 1) {
            throw SchemaError("item '" + item.id + "': answer must be a single letter");
        }
        item.gold = answer[0];
    }
    item.validate();
    return item;
}

}  // namespace vista
