#pragma once

// Independent reference implementations. Nothing here calls into the library
// under test; the formulas are evaluated in 50-digit decimal arithmetic or by
// exhaustive comparison.

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/cpp_dec_float.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

using mp = boost::multiprecision::cpp_dec_float_50;

inline mp pi() { return boost::math::constants::pi<mp>(); }

inline double entropy_bits(double p_in) {
    const mp p(p_in), q = mp(1) - p;
    const mp ln2 = boost::multiprecision::log(mp(2));
    mp h = 0;
    if (p > 0) h -= p * boost::multiprecision::log(p) / ln2;
    if (q > 0) h -= q * boost::multiprecision::log(q) / ln2;
    return h.convert_to<double>();
}

inline mp entropy_mp(const mp& p) {
    const mp q = mp(1) - p;
    const mp ln2 = boost::multiprecision::log(mp(2));
    mp h = 0;
    if (p > 0) h -= p * boost::multiprecision::log(p) / ln2;
    if (q > 0) h -= q * boost::multiprecision::log(q) / ln2;
    return h;
}

// 1 - cos(pi p / 2)
inline double confidence(double p) {
    return (mp(1) - boost::multiprecision::cos(pi() * mp(p) / 2)).convert_to<double>();
}

// (1 - cos(pi l / E)) / 2, with l clamped to E.
inline double length(std::size_t l, std::size_t e, bool correct, bool clamp = true) {
    if (!correct) return 0.0;
    if (clamp && l > e) l = e;
    const mp x = pi() * mp(static_cast<unsigned long long>(l)) / mp(static_cast<unsigned long long>(e));
    return ((mp(1) - boost::multiprecision::cos(x)) / 2).convert_to<double>();
}

// exp(a) / (exp(a) + exp(b))
inline double logistic(double a, double b) {
    return (mp(1) / (mp(1) + boost::multiprecision::exp(mp(b) - mp(a)))).convert_to<double>();
}

// Upper boundary of {p : H(p) > tau} on [0.5, 1], to ~1e-40.
inline double band_hi(double tau) {
    mp lo = 0.5, hi = 1, t(tau);
    for (int i = 0; i < 140; ++i) {
        const mp mid = (lo + hi) / 2;
        if (entropy_mp(mid) > t) lo = mid;
        else hi = mid;
    }
    return hi.convert_to<double>();
}

// Windows of length n that equal some earlier window, by pairwise comparison.
inline std::size_t repeated_windows(const std::vector<std::string>& t, std::size_t n) {
    if (n == 0 || t.size() < n) return 0;
    const std::size_t w = t.size() - n + 1;
    std::size_t dup = 0;
    for (std::size_t i = 0; i < w; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            bool same = true;
            for (std::size_t k = 0; k < n && same; ++k) same = t[i + k] == t[j + k];
            if (same) {
                ++dup;
                break;
            }
        }
    }
    return dup;
}

inline double repetition(const std::vector<std::string>& t, std::size_t n, double scale) {
    return -static_cast<double>(repeated_windows(t, n)) / scale;
}

// Population mean / std in 50 digits; advantage = (r - mean) / (std + eps).
inline std::vector<double> advantages(const std::vector<double>& r, double eps) {
    mp mean = 0;
    for (double x : r) mean += mp(x);
    mean /= mp(static_cast<unsigned long long>(r.size()));
    mp ss = 0;
    for (double x : r) ss += (mp(x) - mean) * (mp(x) - mean);
    const mp sd = boost::multiprecision::sqrt(ss / mp(static_cast<unsigned long long>(r.size())));
    std::vector<double> out;
    for (double x : r) out.push_back(((mp(x) - mean) / (sd + mp(eps))).convert_to<double>());
    return out;
}

// Confusion counts with fake as the positive class; a missing prediction is wrong.
struct Counts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

inline Counts confusion(const std::vector<std::pair<std::optional<bool>, bool>>& pred_truth_is_fake) {
    Counts c;
    for (const auto& [pred, fake] : pred_truth_is_fake) {
        const bool p = pred ? *pred : !fake;
        if (fake && p) ++c.tp;
        else if (fake && !p) ++c.fn;
        else if (!fake && p) ++c.fp;
        else ++c.tn;
    }
    return c;
}

} // namespace oracle
