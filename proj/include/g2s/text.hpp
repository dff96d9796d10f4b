#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace g2s::text {

/// Strips leading and trailing ASCII whitespace.
std::string trim(std::string_view s);

/// True when `s` holds nothing but whitespace.
bool is_blank(std::string_view s);

/// NFC-normalizes, collapses every run of Unicode whitespace to one space
/// and trims. Two element texts are "the same" iff their normalized forms
/// are byte-equal.
std::string normalize(std::string_view s);

/// Lowercased first word of `s` with surrounding punctuation removed.
std::string first_token(std::string_view s);

/// Whitespace token count after ASCII punctuation is stripped; tokens that
/// were pure punctuation do not count.
std::size_t word_count(std::string_view s);

std::uint64_t fnv1a64(std::string_view s);

/// Replaces anything outside [A-Za-z0-9._-] with '_'.
std::string sanitize_filename(std::string_view s);

}  // namespace g2s::text
