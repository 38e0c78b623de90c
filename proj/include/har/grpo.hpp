#pragma once

#include "har/confidence_gate.hpp"
#include "har/errors.hpp"
#include "har/reward.hpp"
#include "har/verdict.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace har {

enum class AdvantageNorm { std_dev, mean_only };

struct AdvantageSet {
    std::vector<double> advantages;
    double epsilon = 1e-8;
};

// a_i = (r_i - mean) / (std_pop + eps). With mean_only the division is skipped.
inline AdvantageSet group_advantages(const std::vector<double>& rewards, double epsilon = 1e-8,
                                     AdvantageNorm norm = AdvantageNorm::std_dev) {
    if (rewards.empty()) throw EmptyGroupError();
    for (double r : rewards)
        if (!std::isfinite(r)) throw NonFiniteError(r, "non-finite reward");
    const double n = static_cast<double>(rewards.size());

    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    std::vector<double> centered(rewards.size());
    double correction = 0.0;
    for (std::size_t i = 0; i < rewards.size(); ++i) centered[i] = rewards[i] - mean;
    for (double c : centered) correction += c;
    correction /= n;  // rounding residue of the first pass
    double ss = 0.0;
    for (double& c : centered) {
        c -= correction;
        ss += c * c;
    }

    AdvantageSet out;
    out.epsilon = epsilon;
    out.advantages = centered;
    if (norm == AdvantageNorm::std_dev) {
        const double denom = std::sqrt(ss / n) + epsilon;
        for (double& a : out.advantages) a /= denom;
    }
    return out;
}

struct PromptContext {
    std::string sample_id;
    std::string prompt;
    ReasoningMode mode = ReasoningMode::heuristic_to_analytic;
};

struct Rollout {
    std::string text;
    AnswerDistribution impression;
};

// Must be a pure function of its arguments so concurrent groups never share state.
using RolloutPolicy = std::function<Rollout(const PromptContext&, std::uint64_t seed, std::size_t index)>;

struct RolloutGroup {
    std::size_t group_size = 0;
    std::vector<Rollout> rollouts;
    std::vector<double> rewards;
    std::vector<RewardBreakdown> breakdowns;
};

struct GroupResult {
    RolloutGroup group;
    AdvantageSet advantages;
};

struct GrpoConfig {
    double epsilon = 1e-8;
    AdvantageNorm norm = AdvantageNorm::std_dev;
};

inline GroupResult simulate_group(const RolloutPolicy& policy, const PromptContext& ctx, Verdict truth,
                                  std::size_t group_size, std::uint64_t seed, const RewardConfig& cfg,
                                  const GrpoConfig& gcfg = {}) {
    if (group_size == 0) throw DomainError("group size must be at least 1");
    GroupResult r;
    r.group.group_size = group_size;
    for (std::size_t i = 0; i < group_size; ++i) {
        Rollout ro = policy(ctx, seed, i);
        RewardBreakdown b = total_reward(ro.text, ctx.mode, truth, ro.impression, cfg);
        r.group.rewards.push_back(b.total);
        r.group.breakdowns.push_back(b);
        r.group.rollouts.push_back(std::move(ro));
    }
    r.advantages = group_advantages(r.group.rewards, gcfg.epsilon, gcfg.norm);
    return r;
}

} // namespace har
