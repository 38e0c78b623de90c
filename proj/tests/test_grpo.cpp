#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace har;

namespace {

std::vector<double> random_rewards(rng::Stream& s) {
    std::vector<double> r(1 + s.below(16));
    for (auto& x : r) x = s.uniform(-10, 10);
    return r;
}

} // namespace

TEST(GroupAdvantages, Examples) {
    for (double a : group_advantages({2, 2, 2, 2}).advantages) EXPECT_EQ(a, 0.0);
    const auto a = group_advantages({1, 2, 3, 4}).advantages;
    const std::vector<double> want{-1.341641, -0.447214, 0.447214, 1.341641};
    const auto o = oracle::advantages({1, 2, 3, 4}, 1e-8);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(a[i], want[i], 1e-5);
        EXPECT_NEAR(a[i], o[i], 1e-12);
    }
    EXPECT_EQ(group_advantages({7.5}).advantages, std::vector<double>{0.0});
}

TEST(GroupAdvantages, Errors) {
    EXPECT_THROW(group_advantages({}), EmptyGroupError);
    EXPECT_THROW(group_advantages({1.0, std::nan("")}), NonFiniteError);
    EXPECT_THROW(group_advantages({1.0, INFINITY}), NonFiniteError);
}

TEST(GroupAdvantages, MeanOnly) {
    const auto a = group_advantages({1, 2, 3, 4}, 1e-8, AdvantageNorm::mean_only).advantages;
    EXPECT_EQ(a, (std::vector<double>{-1.5, -0.5, 0.5, 1.5}));
}

TEST(GroupAdvantages, PropertiesAgainstOracle) {
    rng::Stream s(9);
    for (int i = 0; i < 2000; ++i) {
        const auto r = random_rewards(s);
        const auto a = group_advantages(r).advantages;
        EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), 0.0, 1e-9);
        const auto o = oracle::advantages(r, 1e-8);
        for (std::size_t k = 0; k < r.size(); ++k) EXPECT_NEAR(a[k], o[k], 1e-9);

        const double c = s.uniform(-10, 10);
        std::vector<double> shifted = r, scaled = r;
        for (auto& x : shifted) x += c;
        const double k = s.uniform(0.1, 10);
        for (auto& x : scaled) x *= k;
        const auto as = group_advantages(shifted).advantages;
        const auto ak = group_advantages(scaled).advantages;
        // Scaling is exact up to epsilon, which does not scale: |a| * eps * |1/sd - 1/(k sd)|.
        double mean = 0, ss = 0;
        for (double x : r) mean += x / static_cast<double>(r.size());
        for (double x : r) ss += (x - mean) * (x - mean);
        const double sd = std::sqrt(ss / static_cast<double>(r.size()));
        for (std::size_t j = 0; j < r.size(); ++j) {
            EXPECT_NEAR(as[j], a[j], 1e-9);
            if (sd > 0) { EXPECT_NEAR(ak[j], a[j], std::abs(a[j]) * 1e-8 * std::abs(1 / sd - 1 / (k * sd)) * 1.01 + 1e-9); }
            for (std::size_t m = 0; m < r.size(); ++m)
                if (r[j] < r[m]) { EXPECT_LT(a[j], a[m]); }
        }
    }
}

TEST(SimulateGroup, SingleRolloutHasZeroAdvantage) {
    const auto policy = fixed_policy({{"<impression>fake</impression>\n<reason>r</reason>\n<reflection>f</reflection>\n"
                                       "<answer>fake</answer>",
                                       AnswerDistribution::from_p_fake(0.8)}});
    const auto r = simulate_group(policy, {"x", "", ReasoningMode::heuristic_to_analytic}, Verdict::fake, 1, 0,
                                  RewardConfig{});
    ASSERT_EQ(r.advantages.advantages.size(), 1u);
    EXPECT_EQ(r.advantages.advantages[0], 0.0);
}

TEST(SimulateGroup, CorrectRolloutRanksFirst) {
    auto text = [](Verdict v) { return render(HarResponse{v, "same reasons", "same check", v, {}}); };
    const auto d = AnswerDistribution::from_p_fake(0.5);
    const auto policy = fixed_policy({{text(Verdict::real), d}, {text(Verdict::fake), d}, {text(Verdict::real), d},
                                      {text(Verdict::real), d}});
    const auto r = simulate_group(policy, {"x", "", ReasoningMode::heuristic_to_analytic}, Verdict::fake, 4, 0,
                                  RewardConfig{});
    const auto& a = r.advantages.advantages;
    // Brute-force ordering on the raw rewards agrees with the advantages.
    const auto best_r = std::max_element(r.group.rewards.begin(), r.group.rewards.end()) - r.group.rewards.begin();
    EXPECT_EQ(best_r, 1);
    for (std::size_t i = 0; i < 4; ++i)
        if (i != 1) { EXPECT_GT(a[1], a[i]); }
}

TEST(SimulateGroup, DeterministicPerSeed) {
    const PromptContext ctx{"sample-7", "", ReasoningMode::heuristic_to_analytic};
    auto run = [&](std::uint64_t seed) {
        const auto r = simulate_group(scripted_policy(Verdict::fake), ctx, Verdict::fake, 8, seed, RewardConfig{});
        std::string out;
        for (const auto& ro : r.group.rollouts) out += ro.text + "|";
        for (double a : r.advantages.advantages) out += std::to_string(a) + ",";
        return out;
    };
    EXPECT_EQ(run(3), run(3));
    EXPECT_NE(run(3), run(4));
    EXPECT_THROW(simulate_group(scripted_policy(Verdict::fake), ctx, Verdict::fake, 0, 1, RewardConfig{}), DomainError);
}

TEST(ScriptedPolicy, StatelessAcrossCallOrder) {
    const auto p = scripted_policy(Verdict::real);
    const PromptContext ctx{"s", "", ReasoningMode::heuristic_to_analytic};
    const auto a = p(ctx, 1, 3).text;
    p(ctx, 1, 0);
    EXPECT_EQ(p(ctx, 1, 3).text, a);
}
