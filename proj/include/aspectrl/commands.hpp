#pragma once

#include "aspectrl/config.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

// The aspectrl command-line tool. Each command writes JSONL (one object per
// line) and returns an exit status.
namespace aspectrl::cli {

enum ExitCode : int {
    kOk = 0,
    kFatal = 1,
    kPartial = 2,  // finished, but some inputs were rejected
    kUsage = 64,
};

// The JSON object `score` writes for one scored prediction.
nlohmann::json score_line(const std::string& id, const reward::RewardReport& report);

// The JSON object `advantage` writes for one input group ({"id", "rewards"}
// or a bare array), minus the line number. Failures yield an "error" key.
nlohmann::json advantage_line(const nlohmann::json& group, double epsilon);

struct ScoreOptions {
    std::filesystem::path predictions;  // {"id", "output"} per line
    std::filesystem::path references;   // {"id", "language", "answer", "reference_counts"} per line
    std::filesystem::path output;       // empty -> out stream
    std::filesystem::path summary;      // empty -> err stream
    reward::RewardWeights weights;
    cot::TagSet tags;
    reward::ScoringOptions scoring;
};
int cmd_score(const ScoreOptions& options, std::ostream& out, std::ostream& err);

struct AdvantageOptions {
    std::filesystem::path input;   // {"id", "rewards": [...]} or a bare array per line
    std::filesystem::path output;  // empty -> out stream
    double epsilon = 1e-8;
};
int cmd_advantage(const AdvantageOptions& options, std::ostream& out, std::ostream& err);

struct CurateOptions {
    config::CurationSection curation;
    bool resume = false;
    std::optional<std::size_t> limit;  // stop after this many new samples
};
int cmd_curate(const CurateOptions& options, std::ostream& out, std::ostream& err);

enum class MetricsFormat { csv, jsonl, both };

struct TrainToyOptions {
    toy::TrainingConfig training;
    bool grid = false;
    std::filesystem::path out_dir = ".";
    MetricsFormat format = MetricsFormat::csv;
};
int cmd_train_toy(const TrainToyOptions& options, std::ostream& out, std::ostream& err);

// Parses argv and dispatches. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aspectrl::cli
