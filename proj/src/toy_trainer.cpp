#include "aspectrl/toy_trainer.hpp"

#include "aspectrl/language.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

namespace aspectrl::toy {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Task

ToyTask ToyTask::structured(const ToyTaskParams& params) {
    if (params.answer.empty() ||
        !std::all_of(params.answer.begin(), params.answer.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw ToyError("toy.answer: must be a non-empty string of digits");
    }
    if (params.counts.text_segments > params.max_segments) {
        throw ToyError("toy.text_segments: exceeds toy.max_segments");
    }
    if (params.counts.objects > params.max_objects) throw ToyError("toy.objects: exceeds toy.max_objects");
    if (params.max_segments > 64) throw ToyError("toy.max_segments: at most 64");
    if (params.max_objects > 1000) throw ToyError("toy.max_objects: at most 1000");

    ToyTask task;
    task.reference = {params.language, params.counts, params.answer};

    Slot segments{"segments", {}, {}};
    for (std::uint64_t k = 0; k <= params.max_segments; ++k) {
        std::string block;
        if (k > 0) {
            block = "<segments>\n";
            for (std::uint64_t i = 0; i < k; ++i) {
                const auto x = std::to_string(10 * i);
                block += "[" + x + ",0," + std::to_string(10 * i + 8) + ",8] text " + std::to_string(i + 1) + "\n";
            }
            block += "</segments>\n";
        }
        segments.tokens.push_back(std::move(block));
    }
    task.slots.push_back(std::move(segments));

    Slot lang{"language", {}, {}};
    for (const auto code : kAllLanguages) lang.tokens.push_back("\\lang{" + std::string(to_string(code)) + "}\n");
    lang.tokens.emplace_back();
    task.slots.push_back(std::move(lang));

    Slot obj{"objects", {}, {}};
    for (std::uint64_t d = 0; d <= params.max_objects; ++d) obj.tokens.push_back("\\obj{" + std::to_string(d) + "}\n");
    obj.tokens.emplace_back();
    task.slots.push_back(std::move(obj));

    // Tag pairs are single choices: a lone open or close tag would only add
    // a parse failure the policy has to unlearn in two coordinated moves.
    task.slots.push_back(Slot{"think", {"<think>\nread the regions, then count\n</think>\n", ""}, {}});
    task.slots.push_back(Slot{"answer_tags", {"<answer>", ""}, {"</answer>", ""}});
    for (std::size_t i = 0; i < params.answer.size(); ++i) {
        Slot digit{"answer_" + std::to_string(i + 1), {}, {}};
        for (char c = '0'; c <= '9'; ++c) digit.tokens.emplace_back(1, c);
        task.slots.push_back(std::move(digit));
    }
    task.validate();
    return task;
}

void ToyTask::validate() const {
    if (slots.empty()) throw ToyError("toy task has no slots");
    for (const auto& s : slots) {
        if (s.tokens.empty()) throw ToyError("slot '" + s.name + "' has no tokens");
        if (!s.closers.empty() && s.closers.size() != s.tokens.size()) {
            throw ToyError("slot '" + s.name + "' needs one closer per token");
        }
    }
}

std::string ToyTask::render(const std::vector<std::size_t>& sequence) const {
    if (sequence.size() != slots.size()) throw ToyError("sequence length does not match the task");
    std::string out;
    std::vector<const std::string*> open;
    for (std::size_t s = 0; s < slots.size(); ++s) {
        out += slots[s].tokens.at(sequence[s]);
        if (!slots[s].closers.empty()) open.push_back(&slots[s].closers[sequence[s]]);
    }
    for (auto it = open.rbegin(); it != open.rend(); ++it) out += **it;
    return out;
}

std::vector<std::size_t> ToyTask::best_sequence() const {
    std::vector<std::size_t> best(slots.size(), 0);
    const reward::RewardWeights balanced;
    for (std::size_t s = 0; s < slots.size(); ++s) {
        // Greedy coordinate search is enough for the structured task: every
        // slot contributes independently once the tags are in place.
        double top = -1.0;
        for (std::size_t t = 0; t < slots[s].tokens.size(); ++t) {
            auto trial = best;
            trial[s] = t;
            const double r = reward::score_record(render(trial), reference, balanced, tags, options).total;
            if (r > top) {
                top = r;
                best[s] = t;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Policy

SoftmaxPolicy::SoftmaxPolicy(const ToyTask& task, double temperature_) : temperature(temperature_) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ToyError("temperature must be positive");
    for (const auto& s : task.slots) logits.emplace_back(s.tokens.size(), 0.0);
}

SoftmaxPolicy SoftmaxPolicy::random(const ToyTask& task, double temperature, double scale, Rng& rng) {
    SoftmaxPolicy p(task, temperature);
    for (auto& row : p.logits) {
        for (double& v : row) v = scale * (2.0 * rng.uniform() - 1.0);
    }
    return p;
}

std::vector<double> SoftmaxPolicy::log_probabilities(std::size_t slot) const {
    const auto& row = logits.at(slot);
    std::vector<double> out(row.size());
    const double top = *std::max_element(row.begin(), row.end()) / temperature;
    double sum = 0.0;
    for (std::size_t t = 0; t < row.size(); ++t) {
        out[t] = row[t] / temperature - top;
        sum += std::exp(out[t]);
    }
    const double log_sum = std::log(sum);
    for (double& v : out) v -= log_sum;
    return out;
}

std::vector<double> SoftmaxPolicy::probabilities(std::size_t slot) const {
    auto out = log_probabilities(slot);
    for (double& v : out) v = std::exp(v);
    return out;
}

double SoftmaxPolicy::log_prob(const std::vector<std::size_t>& sequence) const {
    if (sequence.size() != logits.size()) throw ToyError("sequence length does not match the policy");
    double total = 0.0;
    for (std::size_t s = 0; s < sequence.size(); ++s) total += log_probabilities(s).at(sequence[s]);
    return total;
}

std::size_t SoftmaxPolicy::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& row : logits) n += row.size();
    return n;
}

double& SoftmaxPolicy::parameter(std::size_t flat_index) {
    for (auto& row : logits) {
        if (flat_index < row.size()) return row[flat_index];
        flat_index -= row.size();
    }
    throw std::out_of_range("policy parameter index");
}

double SoftmaxPolicy::parameter(std::size_t flat_index) const {
    return const_cast<SoftmaxPolicy*>(this)->parameter(flat_index);
}

std::string SoftmaxPolicy::state_dump() const {
    return json{{"temperature", temperature}, {"logits", logits}}.dump();
}

// ---------------------------------------------------------------------------
// Sampling and gradient

SampledGroup sample_group(const SoftmaxPolicy& policy, const ToyTask& task, std::size_t G, Rng& rng,
                          const SoftmaxPolicy* reference) {
    if (G < 2) throw grpo::GrpoError("group size must be at least 2");
    if (policy.logits.size() != task.slots.size()) throw ToyError("policy does not match the task");

    std::vector<std::vector<double>> cdf(task.length());
    for (std::size_t s = 0; s < task.length(); ++s) {
        const auto p = policy.probabilities(s);
        cdf[s].resize(p.size());
        std::partial_sum(p.begin(), p.end(), cdf[s].begin());
    }

    SampledGroup out;
    for (std::size_t i = 0; i < G; ++i) {
        std::vector<std::size_t> seq(task.length());
        for (std::size_t s = 0; s < task.length(); ++s) {
            const double u = rng.uniform();
            const auto it = std::upper_bound(cdf[s].begin(), cdf[s].end(), u);
            // Rounding can leave the last cdf entry just below 1.
            seq[s] = std::min<std::size_t>(static_cast<std::size_t>(it - cdf[s].begin()), cdf[s].size() - 1);
        }
        grpo::PolicySample sample;
        sample.logp_new = policy.log_prob(seq);
        sample.logp_old = sample.logp_new;
        sample.logp_ref = reference ? reference->log_prob(seq) : sample.logp_old;
        out.group.outputs.push_back(sample);
        out.texts.push_back(task.render(seq));
        out.sequences.push_back(std::move(seq));
    }
    return out;
}

double objective_at(const SoftmaxPolicy& policy, const std::vector<std::vector<std::size_t>>& sequences,
                    const grpo::PolicyGroup& group, const grpo::GrpoConfig& config) {
    grpo::PolicyGroup moved = group;
    for (std::size_t i = 0; i < sequences.size(); ++i) moved.outputs.at(i).logp_new = policy.log_prob(sequences[i]);
    return grpo::grpo_objective(moved, config);
}

Gradient objective_gradient(const SoftmaxPolicy& policy,
                            const std::vector<std::vector<std::size_t>>& sequences,
                            const grpo::PolicyGroup& group, const grpo::GrpoConfig& config) {
    config.validate();
    group.validate();
    if (sequences.size() != group.outputs.size()) throw ToyError("sequence count does not match group");

    const auto advantages = grpo::group_advantages(group.rewards(), config.advantage_epsilon);
    const double G = static_cast<double>(group.outputs.size());

    // dJ/dlogp_new for each sample.
    std::vector<double> coeff(group.outputs.size());
    for (std::size_t i = 0; i < group.outputs.size(); ++i) {
        const auto& o = group.outputs[i];
        const double ratio = grpo::importance_ratio(o, i);
        const double clipped = std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon);
        const double a = advantages[i];
        const double surrogate = ratio * a <= clipped * a ? a * ratio : 0.0;
        const double kl = 1.0 - std::exp(o.logp_ref - o.logp_new);
        coeff[i] = (surrogate - config.kl_coefficient * kl) / G;
    }

    Gradient grad;
    for (std::size_t s = 0; s < policy.logits.size(); ++s) {
        const auto p = policy.probabilities(s);
        std::vector<double> row(p.size(), 0.0);
        for (std::size_t i = 0; i < sequences.size(); ++i) {
            if (coeff[i] == 0.0) continue;
            const std::size_t chosen = sequences[i].at(s);
            for (std::size_t t = 0; t < p.size(); ++t) {
                row[t] += coeff[i] * ((t == chosen ? 1.0 : 0.0) - p[t]) / policy.temperature;
            }
        }
        grad.push_back(std::move(row));
    }
    return grad;
}

TrainRow train_step(SoftmaxPolicy& policy, const SoftmaxPolicy& reference, const ToyTask& task,
                    const grpo::GrpoConfig& config, const reward::RewardWeights& weights,
                    double learning_rate, Rng& rng, std::size_t step) {
    SampledGroup sampled = sample_group(policy, task, config.group_size, rng, &reference);

    TrainRow row;
    row.step = step;
    const reward::RewardWeights balanced;
    for (std::size_t i = 0; i < sampled.texts.size(); ++i) {
        const auto report = reward::score_record(sampled.texts[i], task.reference, weights, task.tags, task.options);
        sampled.group.outputs[i].reward = report.total;
        row.language += weights.language * report.r_lang;
        row.count += weights.count * report.r_count;
        row.answer += weights.answer * report.r_answer;
        row.format += weights.format * report.r_format;
        row.total += report.total;
        row.eval_total += reward::combine(balanced, report.r_lang, report.r_count, report.r_answer, report.r_format);
    }
    const double G = static_cast<double>(sampled.texts.size());
    for (double* v : {&row.language, &row.count, &row.answer, &row.format, &row.total, &row.eval_total}) *v /= G;

    Gradient grad;
    try {
        row.objective = grpo::grpo_objective(sampled.group, config);
        row.kl = grpo::kl_penalty(sampled.group);
        grad = objective_gradient(policy, sampled.sequences, sampled.group, config);
    } catch (const grpo::GrpoError& e) {
        throw ToyError("step " + std::to_string(step) + ": " + e.what() + "; policy state: " + policy.state_dump());
    }
    for (const auto& g_row : grad) {
        for (const double g : g_row) {
            if (!std::isfinite(g)) {
                throw ToyError("non-finite gradient at step " + std::to_string(step) +
                               "; policy state: " + policy.state_dump());
            }
        }
    }
    for (std::size_t s = 0; s < grad.size(); ++s) {
        for (std::size_t t = 0; t < grad[s].size(); ++t) policy.logits[s][t] += learning_rate * grad[s][t];
    }
    return row;
}

// ---------------------------------------------------------------------------
// Training runs

void TrainingConfig::validate() const {
    try {
        weights.validate();
    } catch (const std::exception& e) {
        throw ToyError(std::string("weights: ") + e.what());
    }
    try {
        grpo.validate();
    } catch (const std::exception& e) {
        throw ToyError(std::string("grpo: ") + e.what());
    }
    if (steps == 0) throw ToyError("toy.steps: must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ToyError("toy.learning_rate: must be positive");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ToyError("toy.temperature: must be positive");
    if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw ToyError("toy.init_scale: must be >= 0");
    if (smoothing_window == 0) throw ToyError("toy.smoothing_window: must be at least 1");
}

TrainingResult run_training(const TrainingConfig& config) {
    config.validate();
    const ToyTask task = ToyTask::structured(config.task);
    Rng rng(config.seed);
    SoftmaxPolicy policy = SoftmaxPolicy::random(task, config.temperature, config.init_scale, rng);
    const SoftmaxPolicy reference = policy;

    TrainingResult result{{}, policy, policy};
    result.rows.reserve(config.steps);
    for (std::size_t step = 0; step < config.steps; ++step) {
        result.rows.push_back(
            train_step(policy, reference, task, config.grpo, config.weights, config.learning_rate, rng, step));
    }
    result.final = std::move(policy);
    return result;
}

std::vector<double> smooth(const std::vector<double>& values, std::size_t window) {
    if (window == 0) throw ToyError("smoothing window must be at least 1");
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t first = i + 1 >= window ? i + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t j = first; j <= i; ++j) sum += values[j];
        out[i] = sum / static_cast<double>(i - first + 1);
    }
    return out;
}

std::vector<double> series(const std::vector<TrainRow>& rows, Series which) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        switch (which) {
            case Series::language: out.push_back(r.language); break;
            case Series::count: out.push_back(r.count); break;
            case Series::answer: out.push_back(r.answer); break;
            case Series::format: out.push_back(r.format); break;
            case Series::total: out.push_back(r.total); break;
            case Series::kl: out.push_back(r.kl); break;
            case Series::objective: out.push_back(r.objective); break;
            case Series::eval_total: out.push_back(r.eval_total); break;
        }
    }
    return out;
}

std::vector<GridEntry> weight_grid() {
    return {
        {"weights_0_0_0_0", {0.0, 0.0, 0.0, 0.0}},
        {"weights_0_0_0_1", {0.0, 0.0, 0.0, 1.0}},
        {"weights_0_0_0.5_0.5", {0.0, 0.0, 0.5, 0.5}},
        {"weights_0_0.33_0.33_0.33", {0.0, 0.33, 0.33, 0.33}},
        {"weights_0.25_0.25_0.25_0.25", {0.25, 0.25, 0.25, 0.25}},
    };
}

namespace {

std::string number(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

const std::vector<std::pair<const char*, Series>>& columns() {
    static const std::vector<std::pair<const char*, Series>> cols = {
        {"language", Series::language}, {"count", Series::count},
        {"answer", Series::answer},     {"format", Series::format},
        {"total", Series::total},       {"kl", Series::kl},
        {"objective", Series::objective}, {"eval_total", Series::eval_total},
    };
    return cols;
}

// Raw columns followed by their smoothed counterparts.
std::vector<std::pair<std::string, std::vector<double>>> table(const std::vector<TrainRow>& rows,
                                                               std::size_t window) {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    for (const auto& [name, which] : columns()) out.emplace_back(name, series(rows, which));
    for (const auto& [name, which] : columns()) {
        if (which == Series::kl || which == Series::objective) continue;
        out.emplace_back(std::string("smoothed_") + name, smooth(series(rows, which), window));
    }
    return out;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ToyError("cannot write " + path.string());
    return out;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<TrainRow>& rows,
                       std::size_t window) {
    const auto cols = table(rows, window);
    auto out = open_output(path);
    out << "step";
    for (const auto& [name, values] : cols) out << ',' << name;
    out << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out << rows[i].step;
        for (const auto& [name, values] : cols) out << ',' << number(values[i]);
        out << '\n';
    }
    if (!out) throw ToyError("write to " + path.string() + " failed");
}

void write_metrics_jsonl(const std::filesystem::path& path, const std::vector<TrainRow>& rows,
                         std::size_t window) {
    const auto cols = table(rows, window);
    auto out = open_output(path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        nlohmann::ordered_json j;
        j["step"] = rows[i].step;
        for (const auto& [name, values] : cols) j[name] = values[i];
        out << j.dump() << '\n';
    }
    if (!out) throw ToyError("write to " + path.string() + " failed");
}

}  // namespace aspectrl::toy
