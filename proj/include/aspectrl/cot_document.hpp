#pragma once

#include "aspectrl/language.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Structured reasoning documents.
//
// Canonical layout (every stage except the answer is optional):
//
//   <segments>
//   [x_min,y_min,x_max,y_max] summary of a text region
//   ...
//   </segments>
//   \lang{ar}
//   \obj{5}
//   <caption>objects and where they are</caption>
//   <think>
//   step-by-step reasoning
//   </think>
//   <answer>final answer</answer>
//
// The parser is more lenient than the emitter: stage markup may appear in any
// order and inside the think block; the first occurrence outside the answer
// span wins.
namespace aspectrl::cot {

struct BBox {
    std::int64_t x_min = 0;
    std::int64_t y_min = 0;
    std::int64_t x_max = 0;
    std::int64_t y_max = 0;

    bool valid() const noexcept {
        return x_min >= 0 && y_min >= 0 && x_min <= x_max && y_min <= y_max;
    }
    friend bool operator==(const BBox&, const BBox&) = default;
};

struct BBoxSegment {
    BBox box;
    std::string summary;

    friend bool operator==(const BBoxSegment&, const BBoxSegment&) = default;
};

struct TagPair {
    std::string open;
    std::string close;

    friend bool operator==(const TagPair&, const TagPair&) = default;
};

// Required open/close tag pairs for the format reward.
class TagSet {
public:
    // <think></think> and <answer></answer>.
    TagSet();
    // Throws std::invalid_argument if empty or if any pair is degenerate.
    explicit TagSet(std::vector<TagPair> pairs);

    // "think" -> <think>...</think>
    static TagSet from_names(const std::vector<std::string>& names);

    const std::vector<TagPair>& pairs() const noexcept { return pairs_; }
    std::size_t size() const noexcept { return pairs_.size(); }

    friend bool operator==(const TagSet&, const TagSet&) = default;

private:
    std::vector<TagPair> pairs_;
};

enum class FormatMode {
    strict,       // each open tag occurs and is followed by its close tag
    containment,  // both tags occur anywhere
};

struct CoTDocument {
    std::vector<BBoxSegment> segments;
    std::optional<LanguageCode> language;
    std::optional<std::uint64_t> object_count;
    std::string caption;
    std::string reasoning;
    std::string final_answer;
    std::string raw;
    // Recoverable oddities seen while parsing (skipped lines, unknown codes).
    std::vector<std::string> notes;
};

// Field-wise equality, ignoring raw and notes.
bool same_content(const CoTDocument& a, const CoTDocument& b);

enum class ParseStage { encoding, segments, caption, think, answer };

std::string_view to_string(ParseStage stage) noexcept;

struct ParseFailure {
    ParseStage stage = ParseStage::answer;
    std::string message;
};

using ParseResult = std::variant<CoTDocument, ParseFailure>;

// Never throws on bad input; ill-formed text is reported as a ParseFailure.
ParseResult parse_document(std::string_view text);

std::string serialize_document(const CoTDocument& doc);

// Reasons the document would not survive a serialize/parse round trip.
// Empty means the document is valid.
std::vector<std::string> validate_document(const CoTDocument& doc);

bool check_format(std::string_view text, const TagSet& tags, FormatMode mode = FormatMode::strict);

// One "[x1,y1,x2,y2] summary" entry (surrounding whitespace allowed).
std::optional<BBoxSegment> parse_segment_line(std::string_view line);

// Value of the first well-formed \obj{N} tag in text, if any.
std::optional<std::uint64_t> find_object_count(std::string_view text);

}  // namespace aspectrl::cot
