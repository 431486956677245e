#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace aspectrl {

// The closed set of language labels a reference record may carry.
enum class LanguageCode : std::uint8_t { en, zh, pt, ar, tr, ru, de, fr, it, ja, ko, th, vi };

inline constexpr std::array<LanguageCode, 13> kAllLanguages = {
    LanguageCode::en, LanguageCode::zh, LanguageCode::pt, LanguageCode::ar, LanguageCode::tr,
    LanguageCode::ru, LanguageCode::de, LanguageCode::fr, LanguageCode::it, LanguageCode::ja,
    LanguageCode::ko, LanguageCode::th, LanguageCode::vi};

std::string_view to_string(LanguageCode code) noexcept;

// Exact two-letter lookup, no normalization. Used for stored data.
std::optional<LanguageCode> language_from_code(std::string_view code) noexcept;

// Lenient lookup for model output: trims, lowercases, drops region/script
// subtags ("zh-CN", "pt_BR") and maps common aliases ("chinese", "jpn").
// Unknown values yield nullopt.
std::optional<LanguageCode> normalize_language(std::string_view raw);

}  // namespace aspectrl
