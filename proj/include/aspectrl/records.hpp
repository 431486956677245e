#pragma once

#include "aspectrl/language.hpp"
#include "aspectrl/reward.hpp"

#include <json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Records produced and consumed by the curation pipeline, with their JSONL
// mappings. Field names on the wire match the struct members.
namespace aspectrl::curation {

class RecordError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RawSample {
    std::string id;
    std::string image_ref;  // opaque, forwarded to clients untouched
    std::string question;
    std::string answer;
    LanguageCode language = LanguageCode::en;

    // Throws RecordError: empty id/question/answer or ill-formed UTF-8.
    void validate() const;
};

struct CoTStep {
    std::size_t index = 1;  // 1-based
    std::string content;
    std::optional<double> score;
};

struct VerifiedCoT {
    std::vector<CoTStep> steps;

    std::vector<std::string> contents() const;
};

// Half-open range of Unicode scalar values inside a step.
struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const TextSpan&, const TextSpan&) = default;
};

// One locate -> correct -> re-evaluate round on a single step.
struct CorrectionCycle {
    std::size_t step = 1;
    std::size_t cycle = 1;
    double score_before = 0.0;
    TextSpan span;
    std::string critique;
    std::string replacement;
    std::string content_after;
    double score_after = 0.0;
};

struct CurationTrace {
    std::vector<std::string> initial_steps;
    std::vector<double> initial_scores;
    std::vector<CorrectionCycle> cycles;
    std::size_t client_calls = 0;
    std::vector<std::string> notes;

    std::size_t cycles_for_step(std::size_t step) const;
};

struct ReferenceRecord {
    RawSample sample;
    VerifiedCoT cot;
    reward::CountPair reference_counts;
    CurationTrace trace;

    reward::ScoringReference scoring_reference() const;
};

enum class RejectReason { transport, protocol, incorrigible, internal };

std::string_view to_string(RejectReason reason) noexcept;

struct RejectedSample {
    RawSample sample;
    RejectReason reason = RejectReason::internal;
    std::string message;
    std::string raw_payload;
    CurationTrace trace;
};

// content with the [span.begin, span.end) scalar values replaced. The span is
// clamped to the content.
std::string splice(std::string_view content, TextSpan span, std::string_view replacement);

// Applies every recorded correction to the initial steps, in order.
// Throws RecordError if a recorded content_after does not match.
std::vector<std::string> replay_trace(const CurationTrace& trace);

// Bounding-box lines and the first \obj{N} tag across all steps; an absent
// tag counts as zero objects.
reward::CountPair extract_reference_counts(const VerifiedCoT& cot);

// JSON mappings. from_json throws RecordError naming the missing/bad field.
nlohmann::json to_json(const RawSample& s);
nlohmann::json to_json(const ReferenceRecord& r);
nlohmann::json to_json(const RejectedSample& r);
nlohmann::json to_json(const CurationTrace& t);

RawSample raw_sample_from_json(const nlohmann::json& j);
ReferenceRecord reference_record_from_json(const nlohmann::json& j);
CurationTrace trace_from_json(const nlohmann::json& j);

// Only the fields scoring needs: id, language, answer, reference_counts.
struct ScoringRecord {
    std::string id;
    reward::ScoringReference reference;
};
ScoringRecord scoring_record_from_json(const nlohmann::json& j);

}  // namespace aspectrl::curation
