#include "g2s/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace g2s::text {

namespace {

bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::string trim(std::string_view s) {
    auto b = s.begin();
    auto e = s.end();
    while (b != e && is_ascii_space(*b)) ++b;
    while (e != b && is_ascii_space(*(e - 1))) --e;
    return std::string(b, e);
}

bool is_blank(std::string_view s) {
    return normalize(s).empty();
}

std::string normalize(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");

    icu::UnicodeString src = icu::UnicodeString::fromUTF8(
        icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    icu::UnicodeString nf = nfc->normalize(src, status);
    if (U_FAILURE(status)) throw std::runtime_error("NFC normalization failed");

    icu::UnicodeString out;
    bool pending_space = false;
    for (int32_t i = 0; i < nf.length();) {
        UChar32 c = nf.char32At(i);
        i += U16_LENGTH(c);
        if (u_isUWhiteSpace(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space && out.length() > 0) out.append(static_cast<UChar>(' '));
        pending_space = false;
        out.append(c);
    }
    std::string result;
    out.toUTF8String(result);
    return result;
}

std::string first_token(std::string_view s) {
    std::string t = trim(s);
    auto end = std::find_if(t.begin(), t.end(), is_ascii_space);
    std::string tok(t.begin(), end);
    while (!tok.empty() && is_ascii_punct(tok.front())) tok.erase(tok.begin());
    while (!tok.empty() && is_ascii_punct(tok.back())) tok.pop_back();
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return tok;
}

std::size_t word_count(std::string_view s) {
    std::size_t count = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_ascii_space(c)) {
            in_word = false;
        } else if (!is_ascii_punct(c)) {
            if (!in_word) ++count;
            in_word = true;
        }
    }
    return count;
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string sanitize_filename(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
        out.push_back(ok ? c : '_');
    }
    return out;
}

}  // namespace g2s::text
