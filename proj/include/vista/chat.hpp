#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace vista {

enum class Role { System, User, Assistant };

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

/// One ordered piece of a chat turn: either text or a reference to a key
/// frame (file path or URI).
struct Segment {
    enum class Kind { Text, Media };

    Kind kind = Kind::Text;
    std::string payload;

    static Segment text(std::string t) { return {Kind::Text, std::move(t)}; }
    static Segment media(std::string ref) { return {Kind::Media, std::move(ref)}; }

    bool operator==(const Segment&) const = default;
};

struct ChatTurn {
    Role role = Role::User;
    std::vector<Segment> segments;

    /// All text segments joined with newlines; media segments skipped.
    std::string text() const;
    /// Media references in order.
    std::vector<std::string> media_refs() const;

    bool operator==(const ChatTurn&) const = default;
};

struct ChatTranscript {
    std::vector<ChatTurn> turns;

    int media_count() const;

    /// Last user turn's text; empty if there is none.
    std::string last_user_text() const;

    /// Every text segment in turn order, newline joined.
    std::string all_text() const;

    bool operator==(const ChatTranscript&) const = default;
};

nlohmann::json to_json(const ChatTurn& turn);
ChatTurn turn_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ChatTranscript& transcript);
ChatTranscript transcript_from_json(const nlohmann::json& j);

/// Stable identity of a transcript: FNV-1a 64 over the canonical JSON dump,
/// as a 16-hex-char string. Used by the scripted backend and trace logs.
std::string fingerprint(const ChatTranscript& transcript);

/// Enforces the submission shape: first turn system (text-only), then
/// user/assistant alternation ending on a user turn. Throws PreconditionError.
void validate_for_completion(const ChatTranscript& transcript);

/// One benchmark sample.
struct MCQItem {
    std::string id;
    std::string question;
    std::vector<std::string> media;  // ordered frame refs
    std::vector<std::pair<char, std::string>> options;
    std::optional<char> gold;

    /// Throws SchemaError unless there are >= 2 options with letters
    /// consecutive from 'A' and gold (when present) is a valid letter.
    void validate() const;

    std::optional<std::string> option_text(char letter) const;
};

/// "A. text" lines, newline separated.
std::string render_options(const MCQItem& item);

nlohmann::json to_json(const MCQItem& item);
MCQItem mcq_item_from_json(const nlohmann::json& j);

}  // namespace vista
