#pragma once

#include "aspectrl/cot_document.hpp"
#include "aspectrl/language.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aspectrl::reward {

// Coefficients of the weighted multi-aspect reward. All non-negative.
struct RewardWeights {
    double language = 0.25;
    double count = 0.25;
    double answer = 0.25;
    double format = 0.25;

    // Throws std::invalid_argument naming the offending coefficient.
    void validate() const;
    double sum() const noexcept { return language + count + answer + format; }

    friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

struct CountPair {
    std::uint64_t text_segments = 0;
    std::uint64_t objects = 0;

    friend bool operator==(const CountPair&, const CountPair&) = default;
};

enum class CountMode {
    // 1 - |(N_ts - N^_ts) + (N_obj - N^_obj)| / (N_ts + N_obj); opposite-sign
    // errors cancel.
    literal,
    // 1 - (|N_ts - N^_ts| + |N_obj - N^_obj|) / (N_ts + N_obj). Ablation only.
    absolute_sum,
};

struct ScoringOptions {
    CountMode count_mode = CountMode::literal;
    cot::FormatMode format_mode = cot::FormatMode::strict;
};

// The ground-truth fields a prediction is scored against.
struct ScoringReference {
    LanguageCode language = LanguageCode::en;
    CountPair counts;
    std::string answer;
};

struct RewardReport {
    double r_lang = 0.0;
    double r_count = 0.0;
    double r_answer = 0.0;
    double r_format = 0.0;
    double total = 0.0;
    RewardWeights weights;
    std::vector<std::string> diagnostics;
};

double language_reward(LanguageCode label, std::optional<LanguageCode> predicted) noexcept;

// Clamped to [0, 1]. With an all-zero reference, 1 iff the prediction is
// all-zero too.
double count_reward(CountPair reference, CountPair predicted,
                    CountMode mode = CountMode::literal) noexcept;

// Levenshtein distance over Unicode scalar values.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);

// NFC-normalizes both UTF-8 inputs first. Throws text::EncodingError.
std::size_t edit_distance(std::string_view a, std::string_view b);

// 1 - D(Y, Y^) / max(len Y, len Y^) over trimmed NFC text; 1 when both are
// empty. Throws text::EncodingError on ill-formed UTF-8.
double answer_reward(std::string_view reference, std::string_view prediction);

double format_reward(std::string_view text, const cot::TagSet& tags,
                     cot::FormatMode mode = cot::FormatMode::strict) noexcept;

// language*r_lang + count*r_count + answer*r_answer + format*r_format,
// evaluated left to right.
double combine(const RewardWeights& w, double r_lang, double r_count, double r_answer,
               double r_format) noexcept;

// Scores one raw model output. Pure: identical inputs give identical reports.
// Unparseable fields score 0; the reason lands in diagnostics.
RewardReport score_record(std::string_view prediction, const ScoringReference& reference,
                          const RewardWeights& weights, const cot::TagSet& tags,
                          const ScoringOptions& options = {});

}  // namespace aspectrl::reward
