#include "mraglab/text.hpp"

#include <stdexcept>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

namespace mraglab::text {

namespace {

icu::UnicodeString from_utf8_checked(std::string_view utf8) {
    // ICU silently substitutes U+FFFD, so validate up front.
    const auto* bytes = reinterpret_cast<const uint8_t*>(utf8.data());
    const auto length = static_cast<int32_t>(utf8.size());
    int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(bytes, i, length, c);
        if (c < 0) {
            throw std::invalid_argument("invalid UTF-8 sequence at byte " + std::to_string(i));
        }
    }
    return icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), length));
}

std::string to_std(const icu::UnicodeString& s) {
    std::string out;
    s.toUTF8String(out);
    return out;
}

const icu::Normalizer2& nfc_instance() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || n == nullptr) {
        throw std::runtime_error("ICU NFC normalizer unavailable");
    }
    return *n;
}

}  // namespace

std::string nfc(std::string_view utf8) {
    const icu::UnicodeString src = from_utf8_checked(utf8);
    UErrorCode status = U_ZERO_ERROR;
    const icu::UnicodeString out = nfc_instance().normalize(src, status);
    if (U_FAILURE(status)) {
        throw std::runtime_error(std::string("NFC normalization failed: ") + u_errorName(status));
    }
    return to_std(out);
}

std::string casefold(std::string_view utf8) {
    icu::UnicodeString s = from_utf8_checked(utf8);
    s.foldCase(U_FOLD_CASE_DEFAULT);
    UErrorCode status = U_ZERO_ERROR;
    const icu::UnicodeString out = nfc_instance().normalize(s, status);
    if (U_FAILURE(status)) {
        throw std::runtime_error(std::string("NFC normalization failed: ") + u_errorName(status));
    }
    return to_std(out);
}

std::string trim(std::string_view utf8) {
    const std::u32string cps = to_codepoints(utf8);
    std::size_t begin = 0;
    std::size_t end = cps.size();
    while (begin < end && u_isUWhiteSpace(static_cast<UChar32>(cps[begin]))) ++begin;
    while (end > begin && u_isUWhiteSpace(static_cast<UChar32>(cps[end - 1]))) --end;
    return to_utf8(std::u32string_view(cps).substr(begin, end - begin));
}

std::u32string to_codepoints(std::string_view utf8) {
    std::u32string out;
    out.reserve(utf8.size());
    const auto* bytes = reinterpret_cast<const uint8_t*>(utf8.data());
    const auto length = static_cast<int32_t>(utf8.size());
    int32_t i = 0;
    while (i < length) {
        UChar32 c;
        U8_NEXT(bytes, i, length, c);
        if (c < 0) {
            throw std::invalid_argument("invalid UTF-8 sequence at byte " + std::to_string(i));
        }
        out.push_back(static_cast<char32_t>(c));
    }
    return out;
}

std::string to_utf8(std::u32string_view codepoints) {
    std::string out;
    out.reserve(codepoints.size() * 2);
    for (char32_t c : codepoints) {
        uint8_t buf[U8_MAX_LENGTH];
        int32_t n = 0;
        UBool error = false;
        U8_APPEND(buf, n, U8_MAX_LENGTH, static_cast<UChar32>(c), error);
        if (error) {
            throw std::invalid_argument("code point out of range");
        }
        out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
    }
    return out;
}

std::size_t codepoint_length(std::string_view utf8) {
    return to_codepoints(utf8).size();
}

std::string truncate_codepoints(std::string_view utf8, std::size_t max_codepoints) {
    const std::u32string cps = to_codepoints(utf8);
    if (cps.size() <= max_codepoints) return std::string(utf8);
    return to_utf8(std::u32string_view(cps).substr(0, max_codepoints));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            break;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out.append(sep);
        out.append(parts[i]);
    }
    return out;
}

}  // namespace mraglab::text
