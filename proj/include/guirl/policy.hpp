#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "guirl/env.hpp"

namespace guirl {

/// Instruction-relative action roles. The policy learns a state -> role
/// table; each role resolves to a concrete Action against the current
/// observation, so what is learned transfers across tasks that share
/// structure even when widgets and coordinates differ.
enum class Role : int {
    awake_app,    // open the app the instruction names
    click_goal,   // click the first still-pending quoted target that is visible
    type_goal,    // type the requested text into the focused goal field
    slide_next,   // scroll to the next page
    click_other,  // click some visible widget that is not a goal
    wait_idle,    // do nothing
    complete,     // declare the task finished
};

inline constexpr int kRoleCount = 7;

std::string_view to_string(Role role);

/// What the instruction asks for, recovered from its fixed grammar: the app
/// after "Open ", click targets in single quotes (in order), type goals as
/// "text" into 'Field' pairs, plus any [hint] plan block.
struct InstructionFacts {
    std::string app_name;
    std::vector<std::string> click_targets;
    std::vector<std::pair<std::string, std::string>> type_goals;  // (text, field text)
    std::vector<Action> hint_plan;
};

InstructionFacts parse_instruction(const std::string& instruction);

/// Per-observation analysis: the abstract state key, which roles are
/// available, the concrete action each available role resolves to, and the
/// role the next pending hint action maps onto (-1 when none).
struct StateContext {
    std::string key;
    std::uint32_t mask = 0;
    std::array<Action, kRoleCount> actions{};
    int hint_role = -1;
};

StateContext analyze_observation(const Observation& observation, const AppGraph& graph);

inline bool role_available(std::uint32_t mask, int role) {
    return (mask >> role) & 1u;
}

/// One sampled decision, with everything needed to recompute its probability
/// and gradient later.
struct PolicyToken {
    std::string state_key;
    std::uint32_t mask = 0;
    int role = 0;
    int hint_role = -1;
    double logp = 0.0;  // under the acting policy at sampling time
};

using GradRow = std::array<double, kRoleCount>;
using GradientTable = std::map<std::string, GradRow>;

/// Tabular softmax policy over (abstract state, role) with lazily created
/// rows. Missing rows read as all-zero logits (uniform over available
/// roles). When a hint is active the acting distribution is the mixture
/// (1 - w) * softmax + w * one_hot(hint), with w = hint_adherence; gradients
/// flow through the softmax component only, so hinted successes still update
/// the base table.
class ToyPolicy {
public:
    explicit ToyPolicy(double hint_adherence = 0.9);

    double hint_adherence() const { return hint_adherence_; }
    void set_hint_adherence(double w);

    std::array<double, kRoleCount> base_probs(const std::string& key, std::uint32_t mask) const;
    std::array<double, kRoleCount> probs(const std::string& key, std::uint32_t mask,
                                         int hint_role) const;

    double logp(const std::string& key, std::uint32_t mask, int hint_role, int role) const;
    GradRow logp_grad(const PolicyToken& token) const;

    int sample(const std::string& key, std::uint32_t mask, int hint_role,
               std::mt19937_64& rng) const;
    int argmax_role(const std::string& key, std::uint32_t mask) const;

    /// Shannon entropy (nats) of the base distribution for one state.
    double state_entropy(const std::string& key, std::uint32_t mask) const;

    void apply_gradient(const GradientTable& gradient, double scale);

    double logit(const std::string& key, int role) const;
    void set_logit(const std::string& key, int role, double value);

    const std::map<std::string, GradRow>& table() const { return table_; }

    void save(const std::string& path) const;
    static ToyPolicy load(const std::string& path);

private:
    double hint_adherence_;
    std::map<std::string, GradRow> table_;
};

/// Sampling actor for rollouts. Appends one PolicyToken per step to the sink
/// when a sink is given; the policy is read-only while acting.
class ToyActor final : public Actor {
public:
    ToyActor(const ToyPolicy& policy, const AppGraph& graph,
             std::vector<PolicyToken>* sink = nullptr)
        : policy_(&policy), graph_(&graph), sink_(sink) {}

    ActResult act(const Observation& observation, std::mt19937_64& rng) override;

private:
    const ToyPolicy* policy_;
    const AppGraph* graph_;
    std::vector<PolicyToken>* sink_;
};

/// Greedy actor used for evaluation: argmax over the base distribution,
/// hints ignored.
class ArgmaxActor final : public Actor {
public:
    ArgmaxActor(const ToyPolicy& policy, const AppGraph& graph)
        : policy_(&policy), graph_(&graph) {}

    ActResult act(const Observation& observation, std::mt19937_64& rng) override;

private:
    const ToyPolicy* policy_;
    const AppGraph* graph_;
};

}  // namespace guirl
