#include "aspectrl/reward.hpp"

#include "aspectrl/text.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <variant>

namespace aspectrl::reward {

void RewardWeights::validate() const {
    const std::pair<const char*, double> items[] = {
        {"language", language}, {"count", count}, {"answer", answer}, {"format", format}};
    for (const auto& [name, value] : items) {
        if (!std::isfinite(value) || value < 0.0) {
            throw std::invalid_argument(std::string(name) + ": must be a finite non-negative number");
        }
    }
}

double language_reward(LanguageCode label, std::optional<LanguageCode> predicted) noexcept {
    return predicted && *predicted == label ? 1.0 : 0.0;
}

double count_reward(CountPair reference, CountPair predicted, CountMode mode) noexcept {
    __extension__ typedef __int128 Wide;
    const Wide denominator = Wide{reference.text_segments} + Wide{reference.objects};
    if (denominator == 0) {
        return predicted.text_segments == 0 && predicted.objects == 0 ? 1.0 : 0.0;
    }
    const Wide d_ts = Wide{reference.text_segments} - Wide{predicted.text_segments};
    const Wide d_obj = Wide{reference.objects} - Wide{predicted.objects};
    auto abs = [](Wide v) { return v < 0 ? -v : v; };
    const Wide error = mode == CountMode::literal ? abs(d_ts + d_obj) : abs(d_ts) + abs(d_obj);
    if (error >= denominator) return 0.0;
    // One rounding in the division while both operands stay below 2^53.
    return static_cast<double>(denominator - error) / static_cast<double>(denominator);
}

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
    // Common prefix and suffix never change the distance.
    while (!a.empty() && !b.empty() && a.front() == b.front()) {
        a.remove_prefix(1);
        b.remove_prefix(1);
    }
    while (!a.empty() && !b.empty() && a.back() == b.back()) {
        a.remove_suffix(1);
        b.remove_suffix(1);
    }
    if (a.size() < b.size()) std::swap(a, b);
    if (b.empty()) return a.size();

    // Single row over the shorter string.
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diagonal = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t above = row[j];
            const std::size_t substitute = diagonal + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({above + 1, row[j - 1] + 1, substitute});
            diagonal = above;
        }
    }
    return row[b.size()];
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    return edit_distance(text::code_points(text::nfc(a)), text::code_points(text::nfc(b)));
}

double answer_reward(std::string_view reference, std::string_view prediction) {
    const std::u32string ref = text::code_points(text::nfc(text::trim(reference)));
    const std::u32string pred = text::code_points(text::nfc(text::trim(prediction)));
    const std::size_t longest = std::max(ref.size(), pred.size());
    if (longest == 0) return 1.0;
    const std::size_t distance = edit_distance(ref, pred);
    return static_cast<double>(longest - distance) / static_cast<double>(longest);
}

double format_reward(std::string_view text, const cot::TagSet& tags,
                     cot::FormatMode mode) noexcept {
    return cot::check_format(text, tags, mode) ? 1.0 : 0.0;
}

double combine(const RewardWeights& w, double r_lang, double r_count, double r_answer,
               double r_format) noexcept {
    double total = w.language * r_lang;
    total += w.count * r_count;
    total += w.answer * r_answer;
    total += w.format * r_format;
    return total;
}

namespace {

// Answer span straight from the raw text, for outputs whose other stages did
// not parse.
std::optional<std::string> salvage_answer(std::string_view raw) {
    if (!text::is_valid_utf8(raw)) return std::nullopt;
    const std::string s = text::nfc(raw);
    const auto open = s.find("<answer>");
    if (open == std::string::npos) return std::nullopt;
    const auto body = open + std::string_view("<answer>").size();
    const auto close = s.find("</answer>", body);
    if (close == std::string::npos) return std::nullopt;
    return std::string(text::trim(std::string_view(s).substr(body, close - body)));
}

}  // namespace

RewardReport score_record(std::string_view prediction, const ScoringReference& reference,
                          const RewardWeights& weights, const cot::TagSet& tags,
                          const ScoringOptions& options) {
    RewardReport report;
    report.weights = weights;
    report.r_format = format_reward(prediction, tags, options.format_mode);
    if (report.r_format == 0.0) report.diagnostics.emplace_back("format: required tags missing");

    const cot::ParseResult parsed = cot::parse_document(prediction);
    if (const auto* failure = std::get_if<cot::ParseFailure>(&parsed)) {
        report.diagnostics.push_back("parse failure (" + std::string(cot::to_string(failure->stage)) +
                                     "): " + failure->message);
        report.diagnostics.emplace_back("language: unparseable, scored 0");
        report.diagnostics.emplace_back("count: unparseable, scored 0");
        std::optional<std::string> answer;
        if (failure->stage != cot::ParseStage::encoding) answer = salvage_answer(prediction);
        if (answer) {
            report.r_answer = answer_reward(reference.answer, *answer);
            report.diagnostics.emplace_back("answer: taken from raw answer span");
        } else {
            report.diagnostics.emplace_back("answer: no usable answer span");
        }
    } else {
        const auto& doc = std::get<cot::CoTDocument>(parsed);
        for (const auto& note : doc.notes) report.diagnostics.push_back("parse note: " + note);

        report.r_lang = language_reward(reference.language, doc.language);
        if (!doc.language) report.diagnostics.emplace_back("language: no \\lang{} tag");

        if (doc.object_count) {
            const CountPair predicted{doc.segments.size(), *doc.object_count};
            report.r_count = count_reward(reference.counts, predicted, options.count_mode);
        } else {
            report.diagnostics.emplace_back("count: no \\obj{} tag, scored 0");
        }
        report.r_answer = answer_reward(reference.answer, doc.final_answer);
    }

    report.total = combine(weights, report.r_lang, report.r_count, report.r_answer, report.r_format);
    return report;
}

}  // namespace aspectrl::reward
