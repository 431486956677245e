#include "aspectrl/language.hpp"

#include "aspectrl/text.hpp"

#include <string>
#include <utility>

namespace aspectrl {

namespace {

constexpr std::array<std::string_view, 13> kCodes = {"en", "zh", "pt", "ar", "tr", "ru", "de",
                                                     "fr", "it", "ja", "ko", "th", "vi"};

struct Alias {
    std::string_view name;
    LanguageCode code;
};

// ISO 639-2/3 codes, English names, endonyms, and a few country-code slips.
constexpr Alias kAliases[] = {
    {"eng", LanguageCode::en},     {"english", LanguageCode::en},
    {"zho", LanguageCode::zh},     {"chi", LanguageCode::zh},
    {"cmn", LanguageCode::zh},     {"chinese", LanguageCode::zh},
    {"mandarin", LanguageCode::zh}, {"cn", LanguageCode::zh},
    {"中文", LanguageCode::zh},    {"汉语", LanguageCode::zh},
    {"por", LanguageCode::pt},     {"portuguese", LanguageCode::pt},
    {"português", LanguageCode::pt}, {"ara", LanguageCode::ar},
    {"arabic", LanguageCode::ar},  {"العربية", LanguageCode::ar},
    {"tur", LanguageCode::tr},     {"turkish", LanguageCode::tr},
    {"türkçe", LanguageCode::tr},  {"rus", LanguageCode::ru},
    {"russian", LanguageCode::ru}, {"русский", LanguageCode::ru},
    {"deu", LanguageCode::de},     {"ger", LanguageCode::de},
    {"german", LanguageCode::de},  {"deutsch", LanguageCode::de},
    {"fra", LanguageCode::fr},     {"fre", LanguageCode::fr},
    {"french", LanguageCode::fr},  {"français", LanguageCode::fr},
    {"ita", LanguageCode::it},     {"italian", LanguageCode::it},
    {"italiano", LanguageCode::it}, {"jpn", LanguageCode::ja},
    {"japanese", LanguageCode::ja}, {"jp", LanguageCode::ja},
    {"日本語", LanguageCode::ja},  {"kor", LanguageCode::ko},
    {"korean", LanguageCode::ko},  {"kr", LanguageCode::ko},
    {"한국어", LanguageCode::ko},  {"tha", LanguageCode::th},
    {"thai", LanguageCode::th},    {"ไทย", LanguageCode::th},
    {"vie", LanguageCode::vi},     {"vietnamese", LanguageCode::vi},
    {"vn", LanguageCode::vi},      {"tiếng việt", LanguageCode::vi},
};

}  // namespace

std::string_view to_string(LanguageCode code) noexcept {
    return kCodes[static_cast<std::size_t>(code)];
}

std::optional<LanguageCode> language_from_code(std::string_view code) noexcept {
    for (std::size_t i = 0; i < kCodes.size(); ++i) {
        if (kCodes[i] == code) return static_cast<LanguageCode>(i);
    }
    return std::nullopt;
}

std::optional<LanguageCode> normalize_language(std::string_view raw) {
    if (!text::is_valid_utf8(raw)) return std::nullopt;
    const std::string cleaned = text::nfc(text::lower(text::trim(raw)));
    if (cleaned.empty()) return std::nullopt;

    if (auto exact = language_from_code(cleaned)) return exact;
    for (const auto& alias : kAliases) {
        if (alias.name == cleaned) return alias.code;
    }

    // BCP-47-ish tags: keep the primary subtag.
    const auto sep = cleaned.find_first_of("-_");
    if (sep != std::string::npos && sep > 0) {
        const std::string_view primary = std::string_view(cleaned).substr(0, sep);
        if (auto exact = language_from_code(primary)) return exact;
        for (const auto& alias : kAliases) {
            if (alias.name == primary) return alias.code;
        }
    }
    return std::nullopt;
}

}  // namespace aspectrl
