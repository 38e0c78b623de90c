#pragma once

#include "har/errors.hpp"
#include "har/text_util.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace har {

enum class Verdict { real, fake };

inline constexpr std::string_view to_string(Verdict v) noexcept {
    return v == Verdict::fake ? "fake" : "real";
}

inline constexpr Verdict flip(Verdict v) noexcept {
    return v == Verdict::fake ? Verdict::real : Verdict::fake;
}

// Case-insensitive, surrounding ASCII whitespace ignored.
inline std::optional<Verdict> try_parse_verdict(std::string_view token) {
    std::string t = text::to_lower(text::trim(token));
    if (t == "real") return Verdict::real;
    if (t == "fake") return Verdict::fake;
    return std::nullopt;
}

inline Verdict parse_verdict(std::string_view token) {
    if (auto v = try_parse_verdict(token)) return *v;
    throw DomainError("not a verdict: '" + std::string(token) + "'");
}

enum class ReasoningMode {
    without_reasoning,
    heuristic,              // H-R: answer, reason
    analytic,               // A-R: think, answer
    guess_reason_answer,    // G-R-A: impression|guess, think, answer
    heuristic_to_analytic,  // HA-R: impression, reason, reflection, answer
};

inline constexpr std::string_view to_string(ReasoningMode m) noexcept {
    switch (m) {
    case ReasoningMode::without_reasoning: return "without_reasoning";
    case ReasoningMode::heuristic: return "heuristic";
    case ReasoningMode::analytic: return "analytic";
    case ReasoningMode::guess_reason_answer: return "guess_reason_answer";
    case ReasoningMode::heuristic_to_analytic: return "heuristic_to_analytic";
    }
    return "heuristic_to_analytic";
}

inline std::optional<ReasoningMode> try_parse_mode(std::string_view s) {
    for (auto m : {ReasoningMode::without_reasoning, ReasoningMode::heuristic, ReasoningMode::analytic,
                   ReasoningMode::guess_reason_answer, ReasoningMode::heuristic_to_analytic})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

} // namespace har
