#pragma once

#include "aspectrl/cot_document.hpp"
#include "aspectrl/grpo.hpp"
#include "aspectrl/reward.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

// Small GRPO demonstration: a position-indexed softmax policy emits one token
// per slot, the tokens are concatenated into a document, and the document is
// scored with the multi-aspect reward.
namespace aspectrl::toy {

class ToyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Deterministic across platforms: mt19937_64 plus a hand-rolled 53-bit
// uniform, so no distribution implementation details leak in.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

struct Slot {
    std::string name;
    std::vector<std::string> tokens;  // rendered text of each choice
    // Empty, or one entry per token appended after all later slots.
    std::vector<std::string> closers;
};

struct ToyTaskParams {
    LanguageCode language = LanguageCode::ar;
    reward::CountPair counts{3, 2};
    std::string answer = "4271";  // digits only
    std::uint64_t max_segments = 5;
    std::uint64_t max_objects = 5;
};

struct ToyTask {
    std::vector<Slot> slots;
    reward::ScoringReference reference;
    cot::TagSet tags;
    reward::ScoringOptions options;

    // Tag slots are binary (present / blank), so format is the easiest
    // aspect, then the single language slot, then the two count slots, then
    // one digit slot per answer character.
    static ToyTask structured(const ToyTaskParams& params = {});

    std::size_t length() const noexcept { return slots.size(); }
    std::string render(const std::vector<std::size_t>& sequence) const;
    // Sequence that earns every reward component, if the task has one.
    std::vector<std::size_t> best_sequence() const;
    void validate() const;
};

class SoftmaxPolicy {
public:
    // All-zero logits.
    SoftmaxPolicy(const ToyTask& task, double temperature = 1.0);
    // Logits uniform in [-scale, scale].
    static SoftmaxPolicy random(const ToyTask& task, double temperature, double scale, Rng& rng);

    std::vector<std::vector<double>> logits;
    double temperature;

    std::vector<double> probabilities(std::size_t slot) const;
    std::vector<double> log_probabilities(std::size_t slot) const;
    double log_prob(const std::vector<std::size_t>& sequence) const;

    std::size_t parameter_count() const noexcept;
    double& parameter(std::size_t flat_index);
    double parameter(std::size_t flat_index) const;

    // JSON with temperature and logits, for error reports.
    std::string state_dump() const;
};

using Gradient = std::vector<std::vector<double>>;

struct SampledGroup {
    grpo::PolicyGroup group;  // rewards left at 0
    std::vector<std::vector<std::size_t>> sequences;
    std::vector<std::string> texts;
};

// Samples G sequences from policy. logp_new and logp_old are the policy's
// log-probabilities; logp_ref comes from reference when given, else equals
// logp_old.
SampledGroup sample_group(const SoftmaxPolicy& policy, const ToyTask& task, std::size_t G, Rng& rng,
                          const SoftmaxPolicy* reference = nullptr);

// grpo_objective with logp_new recomputed from policy; the other group
// fields are held fixed.
double objective_at(const SoftmaxPolicy& policy, const std::vector<std::vector<std::size_t>>& sequences,
                    const grpo::PolicyGroup& group, const grpo::GrpoConfig& config);

// Gradient of objective_at with respect to the logits, advantages held
// constant. group.logp_new must match policy.
Gradient objective_gradient(const SoftmaxPolicy& policy,
                            const std::vector<std::vector<std::size_t>>& sequences,
                            const grpo::PolicyGroup& group, const grpo::GrpoConfig& config);

struct TrainRow {
    std::size_t step = 0;
    // Group means of the weighted components.
    double language = 0.0;
    double count = 0.0;
    double answer = 0.0;
    double format = 0.0;
    double total = 0.0;
    double kl = 0.0;
    double objective = 0.0;
    // Group mean under balanced weights, comparable across weightings.
    double eval_total = 0.0;
};

TrainRow train_step(SoftmaxPolicy& policy, const SoftmaxPolicy& reference, const ToyTask& task,
                    const grpo::GrpoConfig& config, const reward::RewardWeights& weights,
                    double learning_rate, Rng& rng, std::size_t step = 0);

struct TrainingConfig {
    reward::RewardWeights weights;
    grpo::GrpoConfig grpo;
    ToyTaskParams task;
    std::size_t steps = 2000;
    std::uint64_t seed = 7;
    double learning_rate = 0.1;
    double temperature = 1.0;
    double init_scale = 0.5;
    std::size_t smoothing_window = 10;

    void validate() const;
};

struct TrainingResult {
    std::vector<TrainRow> rows;
    SoftmaxPolicy initial;
    SoftmaxPolicy final;
};

TrainingResult run_training(const TrainingConfig& config);

// Trailing moving average; the first window-1 entries average what exists.
std::vector<double> smooth(const std::vector<double>& series, std::size_t window);

enum class Series { language, count, answer, format, total, kl, objective, eval_total };
std::vector<double> series(const std::vector<TrainRow>& rows, Series which);

struct GridEntry {
    std::string name;  // used as the metrics file stem
    reward::RewardWeights weights;
};
// The five reward-ratio configurations swept in grid mode.
std::vector<GridEntry> weight_grid();

void write_metrics_csv(const std::filesystem::path& path, const std::vector<TrainRow>& rows,
                       std::size_t window);
void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<TrainRow>& rows,
                         std::size_t window);

}  // namespace aspectrl::toy
