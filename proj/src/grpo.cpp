#include "guirl/grpo.hpp"

#include <algorithm>
#include <cmath>

namespace guirl {

namespace {
constexpr const char* kOrigin = "grpo";
}

void GrpoConfig::validate() const {
    if (group_size < 1) {
        raise(ErrKind::domain, kOrigin, "group_size must be >= 1");
    }
    if (!std::isfinite(eps_low) || eps_low <= 0.0) {
        raise(ErrKind::domain, kOrigin, "eps_low must be > 0");
    }
    if (!std::isfinite(eps_high) || eps_high < eps_low) {
        raise(ErrKind::domain, kOrigin, "eps_high must be >= eps_low");
    }
    if (eps_low >= 1.0) {
        raise(ErrKind::domain, kOrigin, "eps_low must be < 1 so the band floor stays positive");
    }
    if (!std::isfinite(beta_kl) || beta_kl < 0.0) {
        raise(ErrKind::domain, kOrigin, "beta_kl must be >= 0");
    }
    if (!std::isfinite(beta1) || beta1 < 0.0 || !std::isfinite(beta2) || beta2 < 0.0) {
        raise(ErrKind::domain, kOrigin, "beta1 and beta2 must be >= 0");
    }
    if (inner_epochs < 1) {
        raise(ErrKind::domain, kOrigin, "inner_epochs must be >= 1");
    }
    if (!std::isfinite(learning_rate) || learning_rate <= 0.0) {
        raise(ErrKind::domain, kOrigin, "learning_rate must be > 0");
    }
    if (!std::isfinite(advantage_eps) || advantage_eps <= 0.0) {
        raise(ErrKind::domain, kOrigin, "advantage_eps must be > 0");
    }
}

std::vector<double> group_advantages(const std::vector<double>& rewards, double advantage_eps) {
    if (rewards.size() < 2) {
        raise(ErrKind::domain, kOrigin, "group advantages need at least two rewards");
    }
    if (!std::isfinite(advantage_eps) || advantage_eps <= 0.0) {
        raise(ErrKind::domain, kOrigin, "advantage_eps must be > 0");
    }
    double mean = 0.0;
    for (double r : rewards) {
        if (!std::isfinite(r)) {
            raise(ErrKind::domain, kOrigin, "rewards must be finite");
        }
        mean += r;
    }
    mean /= static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) {
        var += (r - mean) * (r - mean);
    }
    var /= static_cast<double>(rewards.size());
    double std_dev = std::sqrt(var);
    std::vector<double> out(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        out[i] = (rewards[i] - mean) / (std_dev + advantage_eps);
    }
    return out;
}

double importance_ratio(double logp_new, double logp_old, std::uint64_t* clamp_events) {
    if (!std::isfinite(logp_new) || !std::isfinite(logp_old)) {
        raise(ErrKind::domain, kOrigin, "log-probabilities must be finite");
    }
    double diff = logp_new - logp_old;
    if (diff > kLogRatioGuard || diff < -kLogRatioGuard) {
        diff = std::clamp(diff, -kLogRatioGuard, kLogRatioGuard);
        if (clamp_events != nullptr) {
            ++*clamp_events;
        }
    }
    return std::exp(diff);
}

double surrogate_term(double r, double a, const GrpoConfig& cfg) {
    if (r <= 0.0) {
        raise(ErrKind::domain, kOrigin, "importance ratio must be > 0");
    }
    double clipped = std::clamp(r, 1.0 - cfg.eps_low, 1.0 + cfg.eps_high);
    return std::min(r * a, clipped * a);
}

double gp_gradient_factor(double r, double a, const GrpoConfig& cfg) {
    if (r <= 0.0) {
        raise(ErrKind::domain, kOrigin, "importance ratio must be > 0");
    }
    if (r >= 1.0 - cfg.eps_low && r <= 1.0 + cfg.eps_high) {
        return a * r;
    }
    if (r > 1.0 + cfg.eps_high) {
        return cfg.beta1 * a * (1.0 + cfg.eps_high);
    }
    return cfg.beta2 * a * (1.0 - cfg.eps_low);
}

double kl_term(double logp_new, double logp_ref) {
    if (!std::isfinite(logp_new) || !std::isfinite(logp_ref)) {
        raise(ErrKind::domain, kOrigin, "log-probabilities must be finite");
    }
    double d = logp_ref - logp_new;
    return std::exp(d) - d - 1.0;
}

namespace {

void check_group(const RolloutGroup& g) {
    std::size_t n = g.rewards.size();
    if (n == 0 || g.advantages.size() != n || g.tokens.size() != n) {
        raise(ErrKind::length_mismatch, kOrigin,
              "group needs matching rewards, advantages and token lists");
    }
}

}  // namespace

GradientTable grpo_gradient(const ToyPolicy& policy, const std::vector<RolloutGroup>& groups,
                            const GrpoConfig& cfg, EpochStats* stats) {
    cfg.validate();
    if (groups.empty()) {
        raise(ErrKind::domain, kOrigin, "no rollout groups");
    }
    GradientTable gradient;
    double objective = 0.0;
    double ratio_sum = 0.0;
    double kl_sum = 0.0;
    std::uint64_t clip_hits = 0;
    std::uint64_t clamps = 0;
    std::size_t token_total = 0;
    double group_w = 1.0 / static_cast<double>(groups.size());

    for (const RolloutGroup& group : groups) {
        check_group(group);
        double traj_w = group_w / static_cast<double>(group.tokens.size());
        for (std::size_t i = 0; i < group.tokens.size(); ++i) {
            const std::vector<PolicyToken>& tokens = group.tokens[i];
            if (tokens.empty()) {
                continue;
            }
            double a = group.advantages[i];
            double token_w = traj_w / static_cast<double>(tokens.size());
            for (const PolicyToken& token : tokens) {
                double logp_new = policy.logp(token.state_key, token.mask, token.hint_role,
                                              token.role);
                double r = importance_ratio(logp_new, token.logp, &clamps);
                double factor = gp_gradient_factor(r, a, cfg);
                double k3 = kl_term(logp_new, token.logp);
                if (cfg.beta_kl > 0.0) {
                    // d(-beta*k3)/dlogp_new = beta*(e^d - 1), d = ref - new
                    factor += cfg.beta_kl * (std::exp(token.logp - logp_new) - 1.0);
                }
                GradRow row = policy.logp_grad(token);
                GradRow& slot = gradient[token.state_key];
                for (int rr = 0; rr < kRoleCount; ++rr) {
                    slot[rr] += token_w * factor * row[rr];
                }
                objective += token_w * (surrogate_term(r, a, cfg) - cfg.beta_kl * k3);
                ratio_sum += r;
                kl_sum += k3;
                if (r < 1.0 - cfg.eps_low || r > 1.0 + cfg.eps_high) {
                    ++clip_hits;
                }
                ++token_total;
            }
        }
    }
    if (stats != nullptr) {
        stats->objective = objective;
        stats->mean_ratio = token_total > 0 ? ratio_sum / static_cast<double>(token_total) : 1.0;
        stats->clip_fraction =
            token_total > 0 ? static_cast<double>(clip_hits) / static_cast<double>(token_total)
                            : 0.0;
        stats->kl = token_total > 0 ? kl_sum / static_cast<double>(token_total) : 0.0;
        stats->ratio_clamps = clamps;
    }
    return gradient;
}

UpdateStats grpo_update(ToyPolicy& policy, const std::vector<RolloutGroup>& groups,
                        const GrpoConfig& cfg) {
    cfg.validate();
    UpdateStats stats;
    for (const RolloutGroup& g : groups) {
        check_group(g);
        for (const auto& tokens : g.tokens) {
            stats.token_count += tokens.size();
        }
    }
    for (int epoch = 0; epoch < cfg.inner_epochs; ++epoch) {
        EpochStats epoch_stats;
        GradientTable gradient = grpo_gradient(policy, groups, cfg, &epoch_stats);
        if (!std::isfinite(epoch_stats.objective)) {
            raise(ErrKind::divergence, kOrigin, "objective became non-finite");
        }
        policy.apply_gradient(gradient, cfg.learning_rate);
        stats.epochs.push_back(epoch_stats);
    }
    return stats;
}

double policy_entropy(const ToyPolicy& policy,
                      const std::vector<std::pair<std::string, std::uint32_t>>& states) {
    if (states.empty()) {
        raise(ErrKind::domain, kOrigin, "entropy needs at least one state");
    }
    double sum = 0.0;
    for (const auto& [key, mask] : states) {
        sum += policy.state_entropy(key, mask);
    }
    return sum / static_cast<double>(states.size());
}

RolloutGroup collect_group(const ToyPolicy& policy, const SimEnv& env, const TaskSpec& task,
                           const GrpoConfig& cfg, std::uint64_t seed, bool hinted) {
    cfg.validate();
    RolloutGroup group;
    group.task_id = task.id;
    group.task = task;
    group.hinted = hinted;
    group.trajectories.resize(cfg.group_size);
    group.tokens.resize(cfg.group_size);
    group.rewards.resize(cfg.group_size);
    for (int i = 0; i < cfg.group_size; ++i) {
        ToyActor actor(policy, env.graph(), &group.tokens[i]);
        group.trajectories[i] = rollout(actor, env, task, mix_seed(seed, i));
        group.rewards[i] = group.trajectories[i].outcome == Outcome::success ? 1.0 : 0.0;
    }
    group.advantages = group_advantages(group.rewards, cfg.advantage_eps);
    return group;
}

RolloutGroup hindsight_pass(const RolloutGroup& failed_group, const SimEnv& env,
                            const ToyPolicy& policy, const GrpoConfig& cfg, std::uint64_t seed) {
    for (double r : failed_group.rewards) {
        if (r != 0.0) {
            raise(ErrKind::domain, kOrigin,
                  "hindsight pass requires a group with all-zero rewards");
        }
    }
    if (!failed_group.task) {
        raise(ErrKind::domain, kOrigin, "hindsight pass needs the group's task spec");
    }
    TaskSpec hinted = env.hint_augment(*failed_group.task);
    RolloutGroup out = collect_group(policy, env, hinted, cfg, seed, true);
    out.task_id = failed_group.task_id;
    return out;
}

}  // namespace guirl
