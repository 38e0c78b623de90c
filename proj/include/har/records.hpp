#pragma once

#include "har/confidence_gate.hpp"
#include "har/errors.hpp"
#include "har/json_util.hpp"
#include "har/verdict.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace har {

enum class Split { train, dev, id_test, ood_c, t2i, ip_op, ie, fs, cb, vto, rmg, pcmg };

inline constexpr std::array<Split, 12> all_splits{Split::train, Split::dev, Split::id_test, Split::ood_c,
                                                  Split::t2i,   Split::ip_op, Split::ie,    Split::fs,
                                                  Split::cb,    Split::vto,   Split::rmg,   Split::pcmg};

// Generation-pattern splits averaged into the headline mean.
inline constexpr std::array<Split, 8> pattern_splits{Split::t2i, Split::ip_op, Split::ie,  Split::fs,
                                                     Split::cb,  Split::vto,   Split::rmg, Split::pcmg};

inline constexpr std::string_view to_string(Split s) noexcept {
    constexpr std::array<std::string_view, 12> names{"train", "dev", "id_test", "ood_c", "t2i", "ip_op",
                                                     "ie",    "fs",  "cb",      "vto",   "rmg", "pcmg"};
    return names[static_cast<std::size_t>(s)];
}

inline std::optional<Split> try_parse_split(std::string_view s) {
    for (Split sp : all_splits)
        if (to_string(sp) == s) return sp;
    return std::nullopt;
}

struct ManifestRecord {
    std::string sample_id;
    Verdict label = Verdict::real;
    Split split = Split::dev;
    std::string source;
    std::string image_ref;
    std::optional<std::string> prompt_override;
    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

inline jsonl::json to_json(const ManifestRecord& r) {
    jsonl::json j{{"sample_id", r.sample_id},
                  {"label", std::string(to_string(r.label))},
                  {"split", std::string(to_string(r.split))},
                  {"source", r.source},
                  {"image_ref", r.image_ref}};
    if (r.prompt_override) j["prompt_override"] = *r.prompt_override;
    return j;
}

// Inference strategies: adaptive gating plus the fixed ablation rows.
enum class InferMode { adaptive, fast_only, deep_only, hr, ar, gra, none };

inline constexpr std::string_view to_string(InferMode m) noexcept {
    switch (m) {
    case InferMode::adaptive: return "adaptive";
    case InferMode::fast_only: return "fast";
    case InferMode::deep_only: return "deep";
    case InferMode::hr: return "hr";
    case InferMode::ar: return "ar";
    case InferMode::gra: return "gra";
    case InferMode::none: return "none";
    }
    return "adaptive";
}

inline std::optional<InferMode> try_parse_infer_mode(std::string_view s) {
    for (auto m : {InferMode::adaptive, InferMode::fast_only, InferMode::deep_only, InferMode::hr, InferMode::ar,
                   InferMode::gra, InferMode::none})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

inline constexpr ReasoningMode grammar_of(InferMode m) noexcept {
    switch (m) {
    case InferMode::hr: return ReasoningMode::heuristic;
    case InferMode::ar: return ReasoningMode::analytic;
    case InferMode::gra: return ReasoningMode::guess_reason_answer;
    case InferMode::none: return ReasoningMode::without_reasoning;
    default: return ReasoningMode::heuristic_to_analytic;
    }
}

struct PhaseTiming {
    double phase1_ms = 0.0;
    double phase2_ms = 0.0;
};

struct InferenceRecord {
    std::string sample_id;
    InferMode mode = InferMode::adaptive;
    GatePath path = GatePath::fast;
    std::optional<Verdict> impression;        // verdict token as written in the transcript
    std::optional<double> impression_p_fake;
    std::optional<double> entropy_bits;
    std::optional<Verdict> fast_verdict;      // verdict_from(impression distribution, threshold)
    std::optional<Verdict> final_verdict;     // nullopt only when nothing was recoverable
    std::string transcript;
    std::size_t generated_tokens = 0;
    int attempts = 1;
    std::optional<std::string> error;         // set on flagged records
    std::optional<PhaseTiming> timing;

    bool flagged() const noexcept { return error.has_value(); }
};

namespace detail {
template <class T, class F>
jsonl::json opt(const std::optional<T>& v, F f) {
    return v ? jsonl::json(f(*v)) : jsonl::json(nullptr);
}
inline std::string vs(Verdict v) { return std::string(to_string(v)); }
} // namespace detail

inline jsonl::json to_json(const InferenceRecord& r) {
    using jsonl::round9;
    jsonl::json j;
    j["sample_id"] = r.sample_id;
    j["mode"] = std::string(to_string(r.mode));
    j["path"] = to_string(r.path);
    j["impression"] = detail::opt(r.impression, detail::vs);
    j["impression_p_fake"] = detail::opt(r.impression_p_fake, round9);
    j["entropy_bits"] = detail::opt(r.entropy_bits, round9);
    j["fast_verdict"] = detail::opt(r.fast_verdict, detail::vs);
    j["final"] = detail::opt(r.final_verdict, detail::vs);
    j["transcript"] = r.transcript;
    j["generated_tokens"] = r.generated_tokens;
    j["attempts"] = r.attempts;
    j["error"] = r.error ? jsonl::json(*r.error) : jsonl::json(nullptr);
    if (r.timing)
        j["timing"] = {{"phase1_ms", round9(r.timing->phase1_ms)}, {"phase2_ms", round9(r.timing->phase2_ms)}};
    return j;
}

namespace detail {

inline const jsonl::json& require(const jsonl::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError(line, key, "missing");
    return *it;
}

inline std::string req_string(const jsonl::json& j, const char* key, std::size_t line) {
    const auto& v = require(j, key, line);
    if (!v.is_string()) throw SchemaError(line, key, "expected string");
    return v.get<std::string>();
}

inline std::optional<Verdict> opt_verdict(const jsonl::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(line, key, "expected verdict string");
    auto v = try_parse_verdict(it->get<std::string>());
    if (!v) throw SchemaError(line, key, "not a verdict");
    return v;
}

inline std::optional<double> opt_number(const jsonl::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw SchemaError(line, key, "expected number");
    return it->get<double>();
}

} // namespace detail

inline InferenceRecord inference_record_from_json(const jsonl::json& j, std::size_t line = 0) {
    InferenceRecord r;
    r.sample_id = detail::req_string(j, "sample_id", line);
    if (auto it = j.find("mode"); it != j.end()) {
        auto m = it->is_string() ? try_parse_infer_mode(it->get<std::string>()) : std::nullopt;
        if (!m) throw SchemaError(line, "mode", "unknown inference mode");
        r.mode = *m;
    }
    if (auto it = j.find("path"); it != j.end()) {
        if (*it == "deep") r.path = GatePath::deep;
        else if (*it == "fast") r.path = GatePath::fast;
        else throw SchemaError(line, "path", "expected fast or deep");
    }
    r.impression = detail::opt_verdict(j, "impression", line);
    r.impression_p_fake = detail::opt_number(j, "impression_p_fake", line);
    r.entropy_bits = detail::opt_number(j, "entropy_bits", line);
    r.fast_verdict = detail::opt_verdict(j, "fast_verdict", line);
    r.final_verdict = detail::opt_verdict(j, "final", line);
    if (auto it = j.find("transcript"); it != j.end() && it->is_string()) r.transcript = it->get<std::string>();
    if (auto n = detail::opt_number(j, "generated_tokens", line)) r.generated_tokens = static_cast<std::size_t>(*n);
    if (auto n = detail::opt_number(j, "attempts", line)) r.attempts = static_cast<int>(*n);
    if (auto it = j.find("error"); it != j.end() && it->is_string()) r.error = it->get<std::string>();
    return r;
}

inline std::vector<InferenceRecord> read_inference_records(const std::string& path) {
    std::vector<InferenceRecord> out;
    for (const auto& l : jsonl::read(path)) out.push_back(inference_record_from_json(l.value, l.number));
    return out;
}

} // namespace har
