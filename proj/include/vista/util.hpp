#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vista {

/// FNV-1a 64-bit hash; used for transcript fingerprints and seeded mocks.
std::uint64_t fnv1a64(std::string_view data);

/// Hex rendering of a 64-bit value, zero-padded to 16 chars.
std::string to_hex16(std::uint64_t value);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

bool is_word_char(char c);

/// Lowercases, strips punctuation from token edges, splits on whitespace.
/// Tokens that are pure punctuation are dropped.
std::vector<std::string> split_words(std::string_view text);

/// Case-insensitive containment.
bool contains_ci(std::string_view haystack, std::string_view needle);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

std::vector<std::string> split_lines(std::string_view text);

}  // namespace vista
