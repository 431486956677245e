#include "aspectrl/cot_document.hpp"

#include "aspectrl/text.hpp"

#include <array>
#include <charconv>
#include <stdexcept>
#include <utility>

namespace aspectrl::cot {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";
constexpr std::string_view kSegmentsOpen = "<segments>";
constexpr std::string_view kSegmentsClose = "</segments>";
constexpr std::string_view kCaptionOpen = "<caption>";
constexpr std::string_view kCaptionClose = "</caption>";
constexpr std::string_view kLangTag = "\\lang{";
constexpr std::string_view kObjTag = "\\obj{";

constexpr std::array<std::string_view, 10> kReserved = {
    kThinkOpen,   kThinkClose,   kAnswerOpen, kAnswerClose, kSegmentsOpen,
    kSegmentsClose, kCaptionOpen, kCaptionClose, kLangTag,   kObjTag};

constexpr auto npos = std::string_view::npos;

// Byte offsets of one open...close block inside the normalized text.
struct Span {
    std::size_t open_begin = 0;
    std::size_t body_begin = 0;
    std::size_t body_end = 0;
    std::size_t close_end = 0;

    bool contains(const Span& other) const noexcept {
        return open_begin <= other.open_begin && other.close_end <= close_end;
    }
    bool disjoint(const Span& other) const noexcept {
        return close_end <= other.open_begin || other.close_end <= open_begin;
    }
};

using BlockResult = std::variant<std::optional<Span>, ParseFailure>;

std::string tag_label(std::string_view tag) { return std::string(tag); }

// First open tag, first close after it. A close before the first open, an
// open without a close, or a second open before the close are fatal.
BlockResult find_block(std::string_view s, std::size_t base, std::string_view open,
                       std::string_view close, ParseStage stage) {
    const auto o = s.find(open);
    const auto first_close = s.find(close);
    if (o == npos) {
        if (first_close != npos) {
            return ParseFailure{stage, "stray " + tag_label(close) + " without " + tag_label(open)};
        }
        return std::optional<Span>{};
    }
    if (first_close != npos && first_close < o) {
        return ParseFailure{stage, tag_label(close) + " appears before " + tag_label(open)};
    }
    const auto c = s.find(close, o + open.size());
    if (c == npos) {
        return ParseFailure{stage, "unclosed " + tag_label(open) + " tag"};
    }
    const auto again = s.find(open, o + open.size());
    if (again != npos && again < c) {
        return ParseFailure{stage, "nested " + tag_label(open) + " tag"};
    }
    return std::optional<Span>{
        Span{base + o, base + o + open.size(), base + c, base + c + close.size()}};
}

// Same as find_block but ignores the answer span: looks before it first,
// then after it.
BlockResult find_block_outside(std::string_view s, const Span& answer, std::string_view open,
                               std::string_view close, ParseStage stage) {
    const std::string_view before = s.substr(0, answer.open_begin);
    auto result = find_block(before, 0, open, close, stage);
    if (std::holds_alternative<ParseFailure>(result)) return result;
    if (std::get<std::optional<Span>>(result).has_value()) return result;
    const std::string_view after = s.substr(answer.close_end);
    return find_block(after, answer.close_end, open, close, stage);
}

// Position of the first inline tag outside the answer span.
std::size_t find_outside(std::string_view s, const Span& answer, std::string_view needle) {
    const auto pos = s.substr(0, answer.open_begin).find(needle);
    if (pos != npos) return pos;
    const auto after = s.substr(answer.close_end).find(needle);
    return after == npos ? npos : answer.close_end + after;
}

std::string body_of(std::string_view s, const Span& span) {
    return std::string(text::trim(s.substr(span.body_begin, span.body_end - span.body_begin)));
}

bool is_ascii_space(char c) { return c == ' ' || c == '\t'; }

std::string_view strip_ascii(std::string_view v) {
    while (!v.empty() && is_ascii_space(v.front())) v.remove_prefix(1);
    while (!v.empty() && is_ascii_space(v.back())) v.remove_suffix(1);
    return v;
}

template <typename Int>
std::optional<Int> parse_digits(std::string_view v, std::size_t max_digits) {
    if (v.empty() || v.size() > max_digits) return std::nullopt;
    for (const char c : v) {
        if (c < '0' || c > '9') return std::nullopt;
    }
    Int value{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
    if (ec != std::errc{} || ptr != v.data() + v.size()) return std::nullopt;
    return value;
}

// "[x1,y1,x2,y2] summary"
std::optional<BBoxSegment> parse_segment_line(std::string_view line, std::string& why) {
    if (line.empty() || line.front() != '[') {
        why = "missing '['";
        return std::nullopt;
    }
    const auto close = line.find(']');
    if (close == npos) {
        why = "missing ']'";
        return std::nullopt;
    }
    std::string_view coords = line.substr(1, close - 1);
    std::array<std::int64_t, 4> values{};
    for (std::size_t k = 0; k < 4; ++k) {
        const auto comma = coords.find(',');
        const bool last = k == 3;
        if (last != (comma == npos)) {
            why = "expected four comma-separated coordinates";
            return std::nullopt;
        }
        const std::string_view item = strip_ascii(last ? coords : coords.substr(0, comma));
        const auto v = parse_digits<std::int64_t>(item, 9);
        if (!v) {
            why = "coordinate is not a non-negative integer";
            return std::nullopt;
        }
        values[k] = *v;
        if (!last) coords.remove_prefix(comma + 1);
    }
    BBoxSegment seg{BBox{values[0], values[1], values[2], values[3]},
                    std::string(text::trim(line.substr(close + 1)))};
    if (!seg.box.valid()) {
        why = "bounding box has min > max";
        return std::nullopt;
    }
    if (seg.summary.empty()) {
        why = "empty summary";
        return std::nullopt;
    }
    return seg;
}

void parse_segments(std::string_view body, CoTDocument& doc) {
    std::size_t line_no = 0;
    while (!body.empty()) {
        const auto nl = body.find('\n');
        const std::string_view raw_line = body.substr(0, nl);
        body = nl == npos ? std::string_view{} : body.substr(nl + 1);
        ++line_no;
        const std::string_view line = text::trim(raw_line);
        if (line.empty()) continue;
        std::string why;
        if (auto seg = parse_segment_line(line, why)) {
            doc.segments.push_back(std::move(*seg));
        } else {
            doc.notes.push_back("segments line " + std::to_string(line_no) + " skipped: " + why);
        }
    }
}

// Content of an inline \tag{...}, or nullopt if unterminated.
std::optional<std::string_view> inline_tag_body(std::string_view s, std::size_t pos,
                                                std::string_view tag) {
    const auto start = pos + tag.size();
    const auto end = s.find('}', start);
    if (end == npos) return std::nullopt;
    return s.substr(start, end - start);
}

ParseResult parse_normalized(std::string_view s, std::string_view raw) {
    CoTDocument doc;
    doc.raw = std::string(raw);

    const auto answer_res = find_block(s, 0, kAnswerOpen, kAnswerClose, ParseStage::answer);
    if (const auto* f = std::get_if<ParseFailure>(&answer_res)) return *f;
    const auto& answer_opt = std::get<std::optional<Span>>(answer_res);
    if (!answer_opt) return ParseFailure{ParseStage::answer, "missing <answer> span"};
    const Span answer = *answer_opt;
    if (s.find(kAnswerOpen, answer.close_end) != npos) {
        doc.notes.push_back("extra <answer> blocks ignored");
    }
    doc.final_answer = body_of(s, answer);

    const auto think_res = find_block(s, 0, kThinkOpen, kThinkClose, ParseStage::think);
    if (const auto* f = std::get_if<ParseFailure>(&think_res)) return *f;
    const auto& think = std::get<std::optional<Span>>(think_res);
    if (think) {
        if (!think->disjoint(answer) && !think->contains(answer) && !answer.contains(*think)) {
            return ParseFailure{ParseStage::think, "<think> and <answer> blocks interleave"};
        }
        doc.reasoning = body_of(s, *think);
    }

    const auto seg_res =
        find_block_outside(s, answer, kSegmentsOpen, kSegmentsClose, ParseStage::segments);
    if (const auto* f = std::get_if<ParseFailure>(&seg_res)) return *f;
    if (const auto& seg = std::get<std::optional<Span>>(seg_res)) {
        if (think && !think->disjoint(*seg) && !think->contains(*seg)) {
            return ParseFailure{ParseStage::segments, "<segments> and <think> blocks interleave"};
        }
        parse_segments(s.substr(seg->body_begin, seg->body_end - seg->body_begin), doc);
    }

    const auto cap_res =
        find_block_outside(s, answer, kCaptionOpen, kCaptionClose, ParseStage::caption);
    if (const auto* f = std::get_if<ParseFailure>(&cap_res)) return *f;
    if (const auto& cap = std::get<std::optional<Span>>(cap_res)) {
        if (think && !think->disjoint(*cap) && !think->contains(*cap)) {
            return ParseFailure{ParseStage::caption, "<caption> and <think> blocks interleave"};
        }
        doc.caption = body_of(s, *cap);
    }

    if (const auto pos = find_outside(s, answer, kLangTag); pos != npos) {
        const auto body = inline_tag_body(s, pos, kLangTag);
        if (!body) {
            doc.notes.push_back("unterminated \\lang{ tag");
        } else if (auto code = normalize_language(*body)) {
            doc.language = code;
        } else {
            doc.notes.push_back("unknown language code '" + std::string(*body) + "'");
        }
    }

    if (const auto pos = find_outside(s, answer, kObjTag); pos != npos) {
        const auto body = inline_tag_body(s, pos, kObjTag);
        if (!body) {
            doc.notes.push_back("unterminated \\obj{ tag");
        } else if (auto n = parse_digits<std::uint64_t>(strip_ascii(*body), 18)) {
            doc.object_count = n;
        } else {
            doc.notes.push_back("object count '" + std::string(*body) + "' is not an integer");
        }
    }

    return doc;
}

}  // namespace

TagSet::TagSet() : pairs_{{"<think>", "</think>"}, {"<answer>", "</answer>"}} {}

TagSet::TagSet(std::vector<TagPair> pairs) : pairs_(std::move(pairs)) {
    if (pairs_.empty()) throw std::invalid_argument("tag set must not be empty");
    for (const auto& p : pairs_) {
        if (p.open.empty() || p.close.empty() || p.open == p.close) {
            throw std::invalid_argument("tag pair needs distinct non-empty open and close tags");
        }
    }
}

TagSet TagSet::from_names(const std::vector<std::string>& names) {
    std::vector<TagPair> pairs;
    pairs.reserve(names.size());
    for (const auto& name : names) {
        if (name.empty()) throw std::invalid_argument("empty tag name");
        pairs.push_back({"<" + name + ">", "</" + name + ">"});
    }
    return TagSet(std::move(pairs));
}

bool same_content(const CoTDocument& a, const CoTDocument& b) {
    return a.segments == b.segments && a.language == b.language &&
           a.object_count == b.object_count && a.caption == b.caption &&
           a.reasoning == b.reasoning && a.final_answer == b.final_answer;
}

std::string_view to_string(ParseStage stage) noexcept {
    switch (stage) {
        case ParseStage::encoding: return "encoding";
        case ParseStage::segments: return "segments";
        case ParseStage::caption: return "caption";
        case ParseStage::think: return "think";
        case ParseStage::answer: return "answer";
    }
    return "unknown";
}

ParseResult parse_document(std::string_view text) {
    if (!text::is_valid_utf8(text)) {
        return ParseFailure{ParseStage::encoding, "input is not well-formed UTF-8"};
    }
    const std::string normalized = text::nfc(text);
    return parse_normalized(normalized, text);
}

std::string serialize_document(const CoTDocument& doc) {
    std::string out;
    if (!doc.segments.empty()) {
        out += kSegmentsOpen;
        out += '\n';
        for (const auto& seg : doc.segments) {
            out += '[';
            out += std::to_string(seg.box.x_min) + ',' + std::to_string(seg.box.y_min) + ',' +
                   std::to_string(seg.box.x_max) + ',' + std::to_string(seg.box.y_max);
            out += "] ";
            out += seg.summary;
            out += '\n';
        }
        out += kSegmentsClose;
        out += '\n';
    }
    if (doc.language) {
        out += kLangTag;
        out += to_string(*doc.language);
        out += "}\n";
    }
    if (doc.object_count) {
        out += kObjTag;
        out += std::to_string(*doc.object_count);
        out += "}\n";
    }
    if (!doc.caption.empty()) {
        out += kCaptionOpen;
        out += doc.caption;
        out += kCaptionClose;
        out += '\n';
    }
    out += kThinkOpen;
    out += '\n';
    if (!doc.reasoning.empty()) {
        out += doc.reasoning;
        out += '\n';
    }
    out += kThinkClose;
    out += '\n';
    out += kAnswerOpen;
    out += doc.final_answer;
    out += kAnswerClose;
    return out;
}

std::vector<std::string> validate_document(const CoTDocument& doc) {
    std::vector<std::string> problems;
    auto check_text = [&](std::string_view name, const std::string& value) {
        if (!text::is_valid_utf8(value)) {
            problems.push_back(std::string(name) + " is not well-formed UTF-8");
            return;
        }
        if (text::nfc(value) != value) problems.push_back(std::string(name) + " is not NFC");
        if (text::trim(value) != value) {
            problems.push_back(std::string(name) + " has surrounding whitespace");
        }
        for (const auto reserved : kReserved) {
            if (value.find(reserved) != std::string::npos) {
                problems.push_back(std::string(name) + " contains reserved markup " +
                                   std::string(reserved));
            }
        }
    };
    for (std::size_t i = 0; i < doc.segments.size(); ++i) {
        const auto& seg = doc.segments[i];
        const std::string name = "segment " + std::to_string(i + 1);
        if (!seg.box.valid()) problems.push_back(name + " has an invalid bounding box");
        if (seg.box.x_max > 999'999'999 || seg.box.y_max > 999'999'999) {
            problems.push_back(name + " coordinates exceed nine digits");
        }
        if (seg.summary.empty()) problems.push_back(name + " has an empty summary");
        if (seg.summary.find_first_of("\r\n") != std::string::npos) {
            problems.push_back(name + " summary spans lines");
        }
        check_text(name + " summary", seg.summary);
    }
    if (doc.object_count && *doc.object_count > 999'999'999'999'999'999ULL) {
        problems.push_back("object count exceeds eighteen digits");
    }
    check_text("caption", doc.caption);
    check_text("reasoning", doc.reasoning);
    check_text("final answer", doc.final_answer);
    return problems;
}

std::optional<BBoxSegment> parse_segment_line(std::string_view line) {
    if (!text::is_valid_utf8(line)) return std::nullopt;
    std::string why;
    return parse_segment_line(text::trim(line), why);
}

std::optional<std::uint64_t> find_object_count(std::string_view text) {
    std::size_t from = 0;
    while (true) {
        const auto pos = text.find(kObjTag, from);
        if (pos == npos) return std::nullopt;
        if (const auto body = inline_tag_body(text, pos, kObjTag)) {
            if (auto n = parse_digits<std::uint64_t>(strip_ascii(*body), 18)) return n;
        }
        from = pos + kObjTag.size();
    }
}

bool check_format(std::string_view text, const TagSet& tags, FormatMode mode) {
    for (const auto& pair : tags.pairs()) {
        const auto o = text.find(pair.open);
        if (o == npos) return false;
        const auto c = mode == FormatMode::strict ? text.find(pair.close, o + pair.open.size())
                                                  : text.find(pair.close);
        if (c == npos) return false;
    }
    return true;
}

}  // namespace aspectrl::cot
