#pragma once

#include "har/errors.hpp"
#include "har/verdict.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

namespace har {

// Two-class distribution over {real, fake}; p_real is derived so the pair sums to 1.
class AnswerDistribution {
public:
    AnswerDistribution() = default;

    static AnswerDistribution from_p_fake(double p_fake) {
        if (!(p_fake >= 0.0 && p_fake <= 1.0))
            throw DomainError("p_fake outside [0,1]: " + std::to_string(p_fake));
        AnswerDistribution d;
        d.p_fake_ = p_fake;
        return d;
    }

    double p_fake() const noexcept { return p_fake_; }
    double p_real() const noexcept { return 1.0 - p_fake_; }
    double mass(Verdict v) const noexcept { return v == Verdict::fake ? p_fake() : p_real(); }

private:
    double p_fake_ = 0.5;
};

struct GateConfig {
    double tau = 0.96;
    double fake_threshold = 0.58;

    void validate() const {
        if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("tau outside [0,1]");
        if (!(fake_threshold > 0.0 && fake_threshold < 1.0)) throw DomainError("fake_threshold outside (0,1)");
    }
};

enum class GatePath { fast, deep };

inline constexpr const char* to_string(GatePath p) noexcept { return p == GatePath::deep ? "deep" : "fast"; }

struct GateDecision {
    GatePath path = GatePath::fast;
    double entropy_bits = 0.0;
};

inline double binary_entropy(double p) noexcept {
    auto term = [](double x) { return x > 0.0 ? -x * std::log2(x) : 0.0; };
    const double h = term(p) + term(1.0 - p);
    return std::clamp(h, 0.0, 1.0);
}

inline double binary_entropy(const AnswerDistribution& d) noexcept { return binary_entropy(d.p_fake()); }

// Ties go fast: deep only when the entropy strictly exceeds tau.
inline GateDecision gate(const AnswerDistribution& d, const GateConfig& cfg) noexcept {
    const double h = binary_entropy(d);
    return {h > cfg.tau ? GatePath::deep : GatePath::fast, h};
}

struct EntropyBand {
    double p_lo;
    double p_hi;
    bool contains(double p) const noexcept { return p_lo < p && p < p_hi; }
};

// Open interval of p_fake values routed deep at this tau. Bisection on [0.5, 1]
// runs until the bracket can no longer shrink, keeping H(hi) <= tau so the
// returned boundary is itself a fast point.
inline EntropyBand entropy_band(double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("tau outside [0,1]");
    if (tau == 1.0) return {0.5, 0.5};
    if (tau == 0.0) return {0.0, 1.0};
    double lo = 0.5, hi = 1.0;
    for (;;) {
        const double mid = lo + (hi - lo) / 2.0;
        if (mid <= lo || mid >= hi) break;
        (binary_entropy(mid) > tau ? lo : hi) = mid;
    }
    return {1.0 - hi, hi};
}

inline Verdict verdict_from(const AnswerDistribution& d, double fake_threshold) noexcept {
    return d.p_fake() >= fake_threshold ? Verdict::fake : Verdict::real;
}

// Stable two-class softmax over the verdict candidates' log-probabilities.
inline AnswerDistribution extract_distribution(double lp_fake, double lp_real) {
    if (!std::isfinite(lp_fake)) throw NonFiniteError(lp_fake, "non-finite log-probability for fake");
    if (!std::isfinite(lp_real)) throw NonFiniteError(lp_real, "non-finite log-probability for real");
    const double m = std::max(lp_fake, lp_real);
    const double ef = std::exp(lp_fake - m), er = std::exp(lp_real - m);
    return AnswerDistribution::from_p_fake(std::clamp(ef / (ef + er), 0.0, 1.0));
}

inline AnswerDistribution extract_distribution(const std::map<Verdict, double>& candidates) {
    auto f = candidates.find(Verdict::fake);
    if (f == candidates.end()) throw MissingCandidateError("fake");
    auto r = candidates.find(Verdict::real);
    if (r == candidates.end()) throw MissingCandidateError("real");
    return extract_distribution(f->second, r->second);
}

} // namespace har
