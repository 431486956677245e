#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Group-relative advantages and the clipped-ratio objective with a KL penalty
// toward a frozen reference policy. Ratios are whole-sequence: each log
// probability is the sum over the output's tokens.
namespace aspectrl::grpo {

class GrpoError : public std::runtime_error {
public:
    GrpoError(const std::string& what, std::ptrdiff_t index = -1)
        : std::runtime_error(what), index_(index) {}

    // Offending sample, or -1 when the error is not tied to one.
    std::ptrdiff_t index() const noexcept { return index_; }

private:
    std::ptrdiff_t index_;
};

struct PolicySample {
    double reward = 0.0;
    double logp_new = 0.0;  // current policy
    double logp_old = 0.0;  // policy that sampled the group
    double logp_ref = 0.0;  // frozen reference policy
};

struct PolicyGroup {
    std::string prompt_id;
    std::vector<PolicySample> outputs;

    std::vector<double> rewards() const;
    // Finite, non-positive log-probabilities and at least min_size outputs.
    void validate(std::size_t min_size = 2) const;
};

struct GrpoConfig {
    double clip_epsilon = 0.2;
    double kl_coefficient = 0.04;
    double advantage_epsilon = 1e-8;
    std::size_t group_size = 4;

    void validate() const;
};

// A_i = (r_i - mean) / (popstd + eps). Groups with identical rewards map to
// all zeros, including eps == 0. Throws GrpoError if size < 2 or eps < 0.
std::vector<double> group_advantages(std::span<const double> rewards, double advantage_epsilon);

// exp(logp_new - logp_old), computed from the log gap.
double importance_ratio(const PolicySample& s, std::size_t index);

// (1/G) sum min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i)
double clipped_surrogate(const PolicyGroup& group, std::span<const double> advantages,
                         double clip_epsilon);

// (1/G) sum rho_i A_i, for comparison against the clipped value.
double unclipped_surrogate(const PolicyGroup& group, std::span<const double> advantages);

// (1/G) sum exp(d) - d - 1 with d = logp_ref - logp_new. Never negative.
double kl_penalty(const PolicyGroup& group);

double grpo_objective(const PolicyGroup& group, const GrpoConfig& config);

}  // namespace aspectrl::grpo
