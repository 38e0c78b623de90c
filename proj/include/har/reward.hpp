#pragma once

#include "har/confidence_gate.hpp"
#include "har/errors.hpp"
#include "har/grammar.hpp"
#include "har/text_util.hpp"
#include "har/verdict.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace har {

enum class RepetitionScope { full_transcript, reasoning_bodies };

using Tokenizer = std::function<std::vector<std::string>(std::string_view)>;

struct RewardConfig {
    std::size_t expected_length_tokens = 512;
    std::size_t ngram_size = 16;
    double repetition_scale = 20.0;
    bool length_clamp = true;
    RepetitionScope rep_scope = RepetitionScope::full_transcript;
    // acc, conf, len, rep, fmt
    std::array<double, 5> weights{1.0, 1.0, 1.0, 1.0, 1.0};
    Tokenizer tokenizer;  // empty: whitespace split

    void validate() const {
        if (expected_length_tokens == 0) throw DomainError("expected_length_tokens must be positive");
        if (ngram_size == 0) throw DomainError("ngram_size must be positive");
        if (!(repetition_scale > 0.0) || !std::isfinite(repetition_scale))
            throw DomainError("repetition_scale must be positive");
        for (double w : weights)
            if (!std::isfinite(w)) throw NonFiniteError(w, "non-finite reward weight");
    }

    std::vector<std::string> tokenize(std::string_view s) const {
        return tokenizer ? tokenizer(s) : text::split_whitespace(s);
    }
};

struct RewardBreakdown {
    double acc = 0.0;
    double conf = 0.0;
    double len = 0.0;
    double rep = 0.0;
    double fmt = 0.0;
    double total = 0.0;
    std::size_t length_tokens = 0;
};

inline double accuracy_reward(Verdict final_answer, Verdict truth) noexcept {
    return final_answer == truth ? 1.0 : 0.0;
}

// 1 - cos(pi p / 2), written as 2 sin^2(pi p / 4) to keep precision near p = 0.
inline double confidence_reward(double p_truth) {
    if (!(p_truth >= 0.0 && p_truth <= 1.0)) throw DomainError("p_truth outside [0,1]");
    if (p_truth == 1.0) return 1.0;
    const double s = std::sin(std::numbers::pi * p_truth / 4.0);
    return std::min(2.0 * s * s, 1.0);
}

// (1 - cos(l pi / E)) / 2 == sin^2(l pi / 2E).
inline double length_reward(std::size_t length_tokens, bool final_correct, const RewardConfig& cfg) {
    if (!final_correct) return 0.0;
    const std::size_t e = cfg.expected_length_tokens;
    const std::size_t l = cfg.length_clamp ? std::min(length_tokens, e) : length_tokens;
    if (cfg.length_clamp && l == e) return 1.0;
    const double s = std::sin(std::numbers::pi * static_cast<double>(l) / (2.0 * static_cast<double>(e)));
    return std::min(s * s, 1.0);
}

namespace detail {

struct WindowKey {
    const std::vector<std::string>* tokens;
    std::size_t n;
    std::size_t start;
};

struct WindowHash {
    std::size_t operator()(const WindowKey& k) const noexcept {
        std::size_t h = 1469598103934665603ull;
        std::hash<std::string> hs;
        for (std::size_t i = 0; i < k.n; ++i) h = (h ^ hs((*k.tokens)[k.start + i])) * 1099511628211ull;
        return h;
    }
};

struct WindowEq {
    bool operator()(const WindowKey& a, const WindowKey& b) const noexcept {
        for (std::size_t i = 0; i < a.n; ++i)
            if ((*a.tokens)[a.start + i] != (*b.tokens)[b.start + i]) return false;
        return true;
    }
};

} // namespace detail

// Duplicate n-gram occurrences beyond the first: windows - distinct windows.
inline std::size_t repeated_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
    if (n == 0 || tokens.size() < n) return 0;
    const std::size_t windows = tokens.size() - n + 1;
    std::unordered_set<detail::WindowKey, detail::WindowHash, detail::WindowEq> seen;
    seen.reserve(windows);
    for (std::size_t i = 0; i < windows; ++i) seen.insert({&tokens, n, i});
    return windows - seen.size();
}

inline double repetition_penalty(const std::vector<std::string>& tokens, const RewardConfig& cfg) {
    const std::size_t n = repeated_ngrams(tokens, cfg.ngram_size);
    if (n == 0) return 0.0;
    return -static_cast<double>(n) / cfg.repetition_scale;
}

inline double format_reward(std::string_view text, ReasoningMode mode) noexcept {
    return is_well_formed(text, mode) ? 1.0 : 0.0;
}

namespace detail {

inline std::vector<std::string> repetition_tokens(std::string_view text, ReasoningMode mode,
                                                  const RewardConfig& cfg) {
    if (cfg.rep_scope == RepetitionScope::reasoning_bodies && mode != ReasoningMode::without_reasoning) {
        try {
            const ParsedResponse p = parse_mode(text, mode);
            std::vector<std::string> out;
            for (const auto& s : p.segments) {
                if (s.verdict) continue;
                auto t = cfg.tokenize(s.body);
                out.insert(out.end(), t.begin(), t.end());
            }
            return out;
        } catch (const ParseError&) {
            // malformed: no reliable bodies, score the whole text
        }
    }
    return cfg.tokenize(text);
}

} // namespace detail

inline RewardBreakdown total_reward(std::string_view text, ReasoningMode mode, Verdict truth,
                                    const AnswerDistribution& impression, const RewardConfig& cfg) {
    RewardBreakdown b;
    const auto tokens = cfg.tokenize(text);
    b.length_tokens = tokens.size();

    std::optional<Verdict> final_answer;
    if (is_well_formed(text, mode)) {
        b.fmt = 1.0;
        final_answer = parse_mode(text, mode).answer();
    } else {
        final_answer = lenient_answer(text, mode);
    }
    const bool correct = final_answer && *final_answer == truth;
    b.acc = correct ? 1.0 : 0.0;
    b.len = length_reward(b.length_tokens, correct, cfg);
    b.conf = confidence_reward(impression.mass(truth));
    b.rep = cfg.rep_scope == RepetitionScope::full_transcript
                ? repetition_penalty(tokens, cfg)
                : repetition_penalty(detail::repetition_tokens(text, mode, cfg), cfg);

    const auto& w = cfg.weights;
    b.total = w[0] * b.acc + w[1] * b.conf + w[2] * b.len + w[3] * b.rep + w[4] * b.fmt;
    return b;
}

} // namespace har
