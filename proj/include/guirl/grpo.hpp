#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "guirl/policy.hpp"

namespace guirl {

struct GrpoConfig {
    int group_size = 8;
    double eps_low = 0.2;
    double eps_high = 0.28;  // asymmetric upper edge, widened for exploration
    double beta_kl = 0.0;
    double beta1 = 0.1;  // preserved-gradient scale above the band
    double beta2 = 0.1;  // preserved-gradient scale below the band
    int inner_epochs = 2;
    double learning_rate = 0.5;
    double advantage_eps = 1e-8;

    void validate() const;
};

/// Hard bound on |logp_new - logp_old| before exponentiation; hits are
/// counted, never silent.
inline constexpr double kLogRatioGuard = 30.0;

/// (r_i - mean) / (std + advantage_eps) with the population std. All-equal
/// rewards give all-zero advantages. Needs at least two rewards.
std::vector<double> group_advantages(const std::vector<double>& rewards, double advantage_eps);

double importance_ratio(double logp_new, double logp_old, std::uint64_t* clamp_events = nullptr);

/// Eq.-style clipped objective term: min(r*A, clip(r, 1-eps_low, 1+eps_high)*A).
double surrogate_term(double r, double a, const GrpoConfig& cfg);

/// Gradient-preserving factor: A*r inside the band (boundary included),
/// beta1*A*(1+eps_high) above, beta2*A*(1-eps_low) below.
double gp_gradient_factor(double r, double a, const GrpoConfig& cfg);

/// Per-token k3 contribution e^d - d - 1 with d = logp_ref - logp_new.
double kl_term(double logp_new, double logp_ref);

struct RolloutGroup {
    std::string task_id;
    std::optional<TaskSpec> task;  // carried when the group came from a live env
    bool hinted = false;
    std::vector<Trajectory> trajectories;
    std::vector<std::vector<PolicyToken>> tokens;  // one list per trajectory
    std::vector<double> rewards;
    std::vector<double> advantages;
};

struct EpochStats {
    double objective = 0.0;
    double mean_ratio = 0.0;
    double clip_fraction = 0.0;
    double kl = 0.0;
    std::uint64_t ratio_clamps = 0;
};

struct UpdateStats {
    std::vector<EpochStats> epochs;
    std::size_t token_count = 0;
};

/// Analytic ascent gradient of the group objective at the policy's current
/// parameters: mean over groups of mean over trajectories of the per-token
/// mean of gp_gradient_factor plus the KL pull-back, each through the
/// policy's logprob gradient. Reporting stats (objective, ratios, clip
/// fraction, KL) land in stats when given.
GradientTable grpo_gradient(const ToyPolicy& policy, const std::vector<RolloutGroup>& groups,
                            const GrpoConfig& cfg, EpochStats* stats);

/// K epochs of gradient ascent reusing the same rollout batch; rollout-time
/// logprobs stay fixed while the numerator policy moves.
UpdateStats grpo_update(ToyPolicy& policy, const std::vector<RolloutGroup>& groups,
                        const GrpoConfig& cfg);

/// Mean Shannon entropy (nats) over the given (state key, mask) pairs.
double policy_entropy(const ToyPolicy& policy,
                      const std::vector<std::pair<std::string, std::uint32_t>>& states);

/// Samples a full rollout group for one task: G episodes, binary verified
/// rewards, group-normalized advantages, one PolicyToken list per trajectory.
RolloutGroup collect_group(const ToyPolicy& policy, const SimEnv& env, const TaskSpec& task,
                           const GrpoConfig& cfg, std::uint64_t seed, bool hinted = false);

/// Semi-online second chance: requires an all-zero-reward group, re-rolls it
/// on the hint-augmented task and returns the hinted group.
RolloutGroup hindsight_pass(const RolloutGroup& failed_group, const SimEnv& env,
                            const ToyPolicy& policy, const GrpoConfig& cfg, std::uint64_t seed);

}  // namespace guirl
