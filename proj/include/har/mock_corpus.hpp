#pragma once

#include "har/confidence_gate.hpp"
#include "har/grammar.hpp"
#include "har/grpo.hpp"
#include "har/mock_model.hpp"
#include "har/random.hpp"
#include "har/records.hpp"

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace har {

struct MockCorpusOptions {
    double tau = 0.96;                  // band that defines "uncertain"
    double uncertain_fraction = 0.10;
    double confident_wrong = 0.03;      // confident impressions on the wrong side
    double deep_correct_confident = 0.92;
};

struct MockCorpus {
    std::vector<ManifestRecord> manifest;
    std::vector<MockScript> scripts;
};

// Uncertain samples sit strictly inside the gate band and get a correct deep
// answer; confident ones sit far outside it and are mostly right on the fast path.
inline MockCorpus make_mock_corpus(std::size_t n, std::uint64_t seed, const MockCorpusOptions& opt = {}) {
    constexpr std::array<Split, 10> cycle{Split::id_test, Split::ood_c, Split::t2i, Split::ip_op, Split::ie,
                                          Split::fs,      Split::cb,    Split::vto, Split::rmg,   Split::pcmg};
    const EntropyBand band = entropy_band(opt.tau);
    const double margin = std::min(0.01, (band.p_hi - band.p_lo) / 4.0);
    rng::Stream s(seed);
    MockCorpus c;
    c.manifest.reserve(n);
    c.scripts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "s%05zu", i);
        const Verdict truth = (i / cycle.size()) % 2 ? Verdict::fake : Verdict::real;
        const Split split = cycle[i % cycle.size()];

        MockScript m;
        m.sample_id = id;
        m.seed = s.next();
        if (s.bernoulli(opt.uncertain_fraction) && band.p_hi - band.p_lo > 2 * margin) {
            m.fast_p_fake = s.uniform(band.p_lo + margin, band.p_hi - margin);
            m.deep_verdict = truth;
        } else {
            const bool wrong = s.bernoulli(opt.confident_wrong);
            const Verdict side = wrong ? flip(truth) : truth;
            m.fast_p_fake = side == Verdict::fake ? s.uniform(0.7, 0.999) : s.uniform(0.001, 0.3);
            m.deep_verdict = s.bernoulli(opt.deep_correct_confident) ? truth : flip(truth);
        }
        c.manifest.push_back({id, truth, split, split == Split::ood_c ? "curated" : "synthetic",
                              std::string("img://") + id + ".png", std::nullopt});
        c.scripts.push_back(std::move(m));
    }
    return c;
}

inline std::string mock_scripts_jsonl(const std::vector<MockScript>& scripts) {
    std::string out;
    for (const auto& s : scripts) out += jsonl::dump(to_json(s)) + "\n";
    return out;
}

// ---- rollout policies for group simulation ----

// Replays rollouts by index; index wraps around.
inline RolloutPolicy fixed_policy(std::vector<Rollout> rollouts) {
    if (rollouts.empty()) throw DomainError("fixed policy needs at least one rollout");
    return [r = std::move(rollouts)](const PromptContext&, std::uint64_t, std::size_t i) { return r[i % r.size()]; };
}

struct ScriptedPolicyOptions {
    double correct_rate = 0.5;
    double malformed_rate = 0.1;
    double repeat_rate = 0.2;  // chance of copying a reason sentence verbatim
    std::size_t max_sentences = 40;
};

// Seeded stochastic HA-R writer. Every draw is keyed by (seed, sample_id, index),
// so the policy holds no state and groups can run concurrently.
inline RolloutPolicy scripted_policy(Verdict truth, ScriptedPolicyOptions opt = {}) {
    return [truth, opt](const PromptContext& ctx, std::uint64_t seed, std::size_t index) {
        rng::Stream s(rng::mix(rng::mix(seed, ctx.sample_id), static_cast<std::uint64_t>(index)));
        const bool correct = s.bernoulli(opt.correct_rate);
        const Verdict answer = correct ? truth : flip(truth);
        const double p_truth = s.uniform();
        const double p_fake = truth == Verdict::fake ? p_truth : 1.0 - p_truth;
        const Verdict impression = p_fake >= 0.5 ? Verdict::fake : Verdict::real;

        std::string reason;
        const std::size_t sentences = 1 + static_cast<std::size_t>(s.below(opt.max_sentences));
        std::string last;
        for (std::size_t k = 0; k < sentences; ++k) {
            std::string sentence = (!last.empty() && s.bernoulli(opt.repeat_rate))
                                       ? last
                                       : std::string(mock::reason_bank[s.below(mock::reason_bank.size())]);
            if (k) reason += ' ';
            reason += sentence;
            last = std::move(sentence);
        }
        const std::string reflection(mock::reflection_bank[s.below(mock::reflection_bank.size())]);

        HarResponse h{impression, reason, reflection, answer, {}};
        std::string text = render(h);
        if (s.bernoulli(opt.malformed_rate)) {
            // Drop the reflection block: still carries a recoverable <answer>.
            text = "<impression>" + std::string(to_string(impression)) + "</impression>\n<reason>" + reason +
                   "</reason>\n<answer>" + std::string(to_string(answer)) + "</answer>";
        }
        return Rollout{std::move(text), AnswerDistribution::from_p_fake(p_fake)};
    };
}

} // namespace har
