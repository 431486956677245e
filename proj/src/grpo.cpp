#include "aspectrl/grpo.hpp"

#include <algorithm>
#include <cmath>

namespace aspectrl::grpo {

std::vector<double> PolicyGroup::rewards() const {
    std::vector<double> out;
    out.reserve(outputs.size());
    for (const auto& o : outputs) out.push_back(o.reward);
    return out;
}

void PolicyGroup::validate(std::size_t min_size) const {
    if (outputs.size() < min_size) {
        throw GrpoError("group '" + prompt_id + "' has " + std::to_string(outputs.size()) +
                        " outputs, need at least " + std::to_string(min_size));
    }
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const auto& o = outputs[i];
        if (!std::isfinite(o.reward)) {
            throw GrpoError("non-finite reward", static_cast<std::ptrdiff_t>(i));
        }
        for (const double lp : {o.logp_new, o.logp_old, o.logp_ref}) {
            if (!std::isfinite(lp) || lp > 0.0) {
                throw GrpoError("log-probability must be finite and <= 0",
                                static_cast<std::ptrdiff_t>(i));
            }
        }
    }
}

void GrpoConfig::validate() const {
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
        throw GrpoError("clip_epsilon must lie in (0, 1)");
    }
    if (!(kl_coefficient >= 0.0) || !std::isfinite(kl_coefficient)) {
        throw GrpoError("kl_coefficient must be finite and >= 0");
    }
    if (!(advantage_epsilon > 0.0) || !std::isfinite(advantage_epsilon)) {
        throw GrpoError("advantage_epsilon must be finite and > 0");
    }
    if (group_size < 2) throw GrpoError("group_size must be at least 2");
}

std::vector<double> group_advantages(std::span<const double> rewards, double advantage_epsilon) {
    const std::size_t n = rewards.size();
    if (n < 2) {
        throw GrpoError("advantages need at least 2 rewards, got " + std::to_string(n));
    }
    if (!(advantage_epsilon >= 0.0) || !std::isfinite(advantage_epsilon)) {
        throw GrpoError("advantage epsilon must be finite and >= 0");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(rewards[i])) {
            throw GrpoError("non-finite reward", static_cast<std::ptrdiff_t>(i));
        }
    }

    std::vector<double> out(n, 0.0);
    const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
    if (*lo == *hi) return out;

    const double g = static_cast<double>(n);
    double sum = 0.0;
    for (const double r : rewards) sum += r;
    const double mean = sum / g;
    for (std::size_t i = 0; i < n; ++i) out[i] = rewards[i] - mean;
    // The mean itself is only good to half an ulp, which is large next to a
    // small spread; recentre the deviations instead of the mean.
    double residual = 0.0;
    for (const double d : out) residual += d;
    residual /= g;

    double squares = 0.0;
    for (double& d : out) {
        d -= residual;
        squares += d * d;
    }
    const double denominator = std::sqrt(squares / g) + advantage_epsilon;
    for (double& a : out) a /= denominator;
    return out;
}

double importance_ratio(const PolicySample& s, std::size_t index) {
    const double gap = s.logp_new - s.logp_old;
    const double ratio = std::exp(gap);
    if (!std::isfinite(gap) || !std::isfinite(ratio)) {
        throw GrpoError("importance ratio overflows (log gap " + std::to_string(gap) + ")",
                        static_cast<std::ptrdiff_t>(index));
    }
    return ratio;
}

namespace {

void check_lengths(const PolicyGroup& group, std::span<const double> advantages) {
    if (group.outputs.empty()) throw GrpoError("empty group");
    if (advantages.size() != group.outputs.size()) {
        throw GrpoError("advantage count " + std::to_string(advantages.size()) +
                        " does not match group size " + std::to_string(group.outputs.size()));
    }
}

}  // namespace

double clipped_surrogate(const PolicyGroup& group, std::span<const double> advantages,
                         double clip_epsilon) {
    check_lengths(group, advantages);
    double sum = 0.0;
    for (std::size_t i = 0; i < group.outputs.size(); ++i) {
        const double ratio = importance_ratio(group.outputs[i], i);
        const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
        sum += std::min(ratio * advantages[i], clipped * advantages[i]);
    }
    return sum / static_cast<double>(group.outputs.size());
}

double unclipped_surrogate(const PolicyGroup& group, std::span<const double> advantages) {
    check_lengths(group, advantages);
    double sum = 0.0;
    for (std::size_t i = 0; i < group.outputs.size(); ++i) {
        sum += importance_ratio(group.outputs[i], i) * advantages[i];
    }
    return sum / static_cast<double>(group.outputs.size());
}

double kl_penalty(const PolicyGroup& group) {
    if (group.outputs.empty()) throw GrpoError("empty group");
    double sum = 0.0;
    for (std::size_t i = 0; i < group.outputs.size(); ++i) {
        const auto& o = group.outputs[i];
        const double d = o.logp_ref - o.logp_new;
        // expm1 keeps the small-gap case accurate and the result >= 0.
        const double k = std::expm1(d) - d;
        if (!std::isfinite(k)) {
            throw GrpoError("KL estimator is not finite", static_cast<std::ptrdiff_t>(i));
        }
        sum += k;
    }
    return sum / static_cast<double>(group.outputs.size());
}

double grpo_objective(const PolicyGroup& group, const GrpoConfig& config) {
    config.validate();
    group.validate();
    const std::vector<double> rewards = group.rewards();
    const std::vector<double> advantages = group_advantages(rewards, config.advantage_epsilon);
    return clipped_surrogate(group, advantages, config.clip_epsilon) -
           config.kl_coefficient * kl_penalty(group);
}

}  // namespace aspectrl::grpo
