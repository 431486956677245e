#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

// UTF-8 helpers shared by the parser, the reward engine and the curation
// pipeline. Everything that compares text goes through nfc() first.
namespace aspectrl::text {

class EncodingError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

bool is_valid_utf8(std::string_view s) noexcept;

// Canonical composition (NFC). Throws EncodingError on ill-formed UTF-8.
std::string nfc(std::string_view s);

// Decodes to Unicode scalar values. Throws EncodingError on ill-formed UTF-8.
std::u32string code_points(std::string_view s);

std::string to_utf8(std::u32string_view cps);

// Number of scalar values in a well-formed UTF-8 string.
std::size_t length(std::string_view s);

// Strips leading/trailing characters with the Unicode White_Space property.
std::string_view trim(std::string_view s);

std::string ascii_lower(std::string_view s);

// Full Unicode lowercase mapping (root locale).
std::string lower(std::string_view s);

}  // namespace aspectrl::text
