#pragma once

#include "aspectrl/clients.hpp"
#include "aspectrl/records.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

// Verified reasoning-data generation: generate an initial step list, score
// every step, and locate/correct/re-score failing steps until they clear the
// threshold or the iteration budget runs out.
namespace aspectrl::curation {

struct CurationConfig {
    double threshold = 0.7;
    std::size_t max_correction_iters = 5;
    std::size_t concurrency = 4;
    std::size_t retries = 2;            // extra attempts after a transport failure
    std::size_t retry_backoff_ms = 500; // multiplied by the attempt number

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct Clients {
    ChatClient& generator;
    ChatClient& evaluator;
};

// Response parsers, exposed for tests.
// "Step k: ..." lines; continuation lines join the previous step.
std::optional<std::vector<std::string>> parse_step_list(std::string_view response);
// {"score": x} or a bare number, in [0, 1].
std::optional<double> parse_score(std::string_view response);

struct Located {
    TextSpan span;
    std::string critique;
    bool fell_back = false;  // reply unusable; span covers the whole step
};
Located parse_locate(std::string_view response, std::size_t step_length);

struct Rejected {
    std::size_t cycles = 0;
    std::optional<ClientError> error;  // empty when the iteration budget ran out
};

using StepsOrError = std::variant<std::vector<CoTStep>, ClientError>;
using RefineResult = std::variant<CoTStep, Rejected>;
using SampleOutcome = std::variant<ReferenceRecord, RejectedSample>;

StepsOrError generate_initial_cot(ChatClient& generator, const RawSample& sample,
                                  const CurationConfig& config, CurationTrace& trace);

// chain holds the current text of every step and is updated in place.
// Requires step.score < threshold; a passing step is returned unchanged.
RefineResult refine_step(CoTStep step, const RawSample& sample, std::vector<std::string>& chain,
                         Clients clients, const CurationConfig& config, CurationTrace& trace);

SampleOutcome curate_sample(const RawSample& sample, Clients clients, const CurationConfig& config);

struct CurationStats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t skipped = 0;  // already present in the output on resume
    std::map<std::string, std::size_t> rejected_by_reason;
    std::map<std::size_t, std::size_t> cycles_per_sample;  // cycles -> samples
    std::map<std::size_t, std::size_t> cycles_per_step;    // cycles -> steps (accepted records)

    nlohmann::json to_json() const;
};

class CurationIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunOptions {
    std::filesystem::path input;
    std::filesystem::path output;
    // Defaults to "<output>.rejected.jsonl".
    std::filesystem::path rejected_output;
    bool resume = false;
    // Stop after this many new samples, leaving a resumable output.
    std::optional<std::size_t> max_new_samples;
};

// Records are written in input order, one JSON object per line, flushed as
// they complete. On resume, ids already in either output file are skipped and
// a torn final line is dropped. Throws CurationIoError / RecordError.
CurationStats run_curation(const RunOptions& options, Clients clients, const CurationConfig& config);

}  // namespace aspectrl::curation
