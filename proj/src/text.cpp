#include "aspectrl/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <cstdint>

namespace aspectrl::text {

namespace {

const icu::Normalizer2& nfc_instance() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || norm == nullptr) {
        throw std::runtime_error("ICU NFC normalizer unavailable");
    }
    return *norm;
}

// Calls fn(code_point, begin_offset, end_offset) for every scalar value.
template <typename Fn>
void for_each_code_point(std::string_view s, Fn&& fn) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
    const auto n = static_cast<std::int32_t>(s.size());
    std::int32_t i = 0;
    while (i < n) {
        const std::int32_t start = i;
        UChar32 c = 0;
        U8_NEXT(bytes, i, n, c);
        if (c < 0) {
            throw EncodingError("ill-formed UTF-8 at byte " + std::to_string(start));
        }
        fn(static_cast<char32_t>(c), static_cast<std::size_t>(start), static_cast<std::size_t>(i));
    }
}

}  // namespace

bool is_valid_utf8(std::string_view s) noexcept {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
    const auto n = static_cast<std::int32_t>(s.size());
    std::int32_t i = 0;
    while (i < n) {
        UChar32 c = 0;
        U8_NEXT(bytes, i, n, c);
        if (c < 0) return false;
    }
    return true;
}

std::string nfc(std::string_view s) {
    if (!is_valid_utf8(s)) {
        throw EncodingError("ill-formed UTF-8");
    }
    bool ascii = true;
    for (const char ch : s) {
        if (static_cast<unsigned char>(ch) >= 0x80) {
            ascii = false;
            break;
        }
    }
    if (ascii) return std::string(s);

    const auto& norm = nfc_instance();
    UErrorCode status = U_ZERO_ERROR;
    const icu::UnicodeString in = icu::UnicodeString::fromUTF8(
        icu::StringPiece(s.data(), static_cast<std::int32_t>(s.size())));
    if (norm.isNormalized(in, status) && U_SUCCESS(status)) {
        return std::string(s);
    }
    status = U_ZERO_ERROR;
    const icu::UnicodeString out = norm.normalize(in, status);
    if (U_FAILURE(status)) {
        throw EncodingError(std::string("NFC normalization failed: ") + u_errorName(status));
    }
    std::string result;
    out.toUTF8String(result);
    return result;
}

std::u32string code_points(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for_each_code_point(s, [&](char32_t c, std::size_t, std::size_t) { out.push_back(c); });
    return out;
}

std::string to_utf8(std::u32string_view cps) {
    std::string out;
    out.reserve(cps.size());
    for (const char32_t c : cps) {
        std::uint8_t buf[U8_MAX_LENGTH];
        std::int32_t len = 0;
        UBool error = false;
        U8_APPEND(buf, len, U8_MAX_LENGTH, static_cast<UChar32>(c), error);
        if (error) {
            throw EncodingError("code point is not a Unicode scalar value");
        }
        out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(len));
    }
    return out;
}

std::size_t length(std::string_view s) {
    std::size_t n = 0;
    for_each_code_point(s, [&](char32_t, std::size_t, std::size_t) { ++n; });
    return n;
}

std::string_view trim(std::string_view s) {
    std::size_t first = s.size();
    std::size_t last = 0;
    bool any = false;
    for_each_code_point(s, [&](char32_t c, std::size_t begin, std::size_t end) {
        if (u_isUWhiteSpace(static_cast<UChar32>(c))) return;
        if (!any) first = begin;
        any = true;
        last = end;
    });
    if (!any) return s.substr(0, 0);
    return s.substr(first, last - first);
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& ch : out) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    return out;
}

std::string lower(std::string_view s) {
    if (!is_valid_utf8(s)) {
        throw EncodingError("ill-formed UTF-8");
    }
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(
        icu::StringPiece(s.data(), static_cast<std::int32_t>(s.size())));
    u.toLower(icu::Locale::getRoot());
    std::string out;
    u.toUTF8String(out);
    return out;
}

}  // namespace aspectrl::text
