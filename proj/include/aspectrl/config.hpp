#pragma once

#include "aspectrl/clients.hpp"
#include "aspectrl/cot_document.hpp"
#include "aspectrl/curation.hpp"
#include "aspectrl/grpo.hpp"
#include "aspectrl/reward.hpp"
#include "aspectrl/toy_trainer.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

// One JSON file configures every command:
//
//   {
//     "weights":  {"language": .25, "count": .25, "answer": .25, "format": .25},
//     "tags":     ["think", "answer"]  or  [{"open": "<a>", "close": "</a>"}, ...],
//     "scoring":  {"count_mode": "literal", "format_mode": "strict"},
//     "grpo":     {"clip_epsilon": .2, "kl_coefficient": .04, "advantage_epsilon": 1e-8, "group_size": 4},
//     "curation": {"input": ..., "output": ..., "threshold": .7, ..., "generator": {...}, "evaluator": {...}},
//     "toy":      {"steps": 2000, "seed": 7, ...}
//   }
//
// Every section and key is optional; unknown keys are errors. Relative paths
// resolve against the directory holding the file.
namespace aspectrl::config {

// Message starts with the dotted path of the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CurationSection {
    curation::CurationConfig run;
    std::filesystem::path input;
    std::filesystem::path output;
    std::filesystem::path rejected_output;  // empty -> default next to output
    curation::EndpointConfig generator;
    curation::EndpointConfig evaluator;
};

struct AppConfig {
    reward::RewardWeights weights;
    cot::TagSet tags;
    reward::ScoringOptions scoring;
    grpo::GrpoConfig grpo;
    CurationSection curation;
    toy::TrainingConfig toy;  // weights and grpo mirror the sections above
};

AppConfig parse_config(const nlohmann::json& document, const std::filesystem::path& base_dir);
AppConfig load_config(const std::filesystem::path& path);

// Flag-style parsers shared with the command line.
reward::CountMode parse_count_mode(const std::string& text);
cot::FormatMode parse_format_mode(const std::string& text);
// "0.25,0.25,0.25,0.25" in language,count,answer,format order.
reward::RewardWeights parse_weights(const std::string& text);
// "think,answer"
cot::TagSet parse_tag_names(const std::string& text);

std::string_view to_string(reward::CountMode mode) noexcept;
std::string_view to_string(cot::FormatMode mode) noexcept;

}  // namespace aspectrl::config
