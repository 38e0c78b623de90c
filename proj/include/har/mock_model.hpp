#pragma once

#include "har/errors.hpp"
#include "har/json_util.hpp"
#include "har/model_client.hpp"
#include "har/random.hpp"
#include "har/records.hpp"
#include "har/verdict.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace har {

struct MockScript {
    std::string sample_id;
    double fast_p_fake = 0.5;
    std::optional<Verdict> fast_verdict;  // token written after <impression>; default argmax
    Verdict deep_verdict = Verdict::real;
    std::optional<std::string> reason;
    std::optional<std::string> reflection;
    std::uint64_t seed = 0;
    std::map<InferMode, Verdict> answers;  // per-ablation final answers (hr, ar, gra, none)
    int transient_failures = 0;            // first N calls for this sample throw TransientError
    std::optional<std::string> deep_override;  // raw text after </impression> on the deep path
    bool omit_alternative = false;         // verdict token lists only the sampled candidate
    bool scorable = true;                  // score_continuation answers for this sample

    Verdict impression_verdict() const {
        return fast_verdict.value_or(fast_p_fake >= 0.5 ? Verdict::fake : Verdict::real);
    }

    Verdict answer_for(InferMode m) const {
        if (auto it = answers.find(m); it != answers.end()) return it->second;
        return (m == InferMode::hr || m == InferMode::none) ? impression_verdict() : deep_verdict;
    }

    void validate() const {
        if (sample_id.empty()) throw DomainError("mock script without sample_id");
        if (!(fast_p_fake >= 0.0 && fast_p_fake <= 1.0))
            throw DomainError("mock script " + sample_id + ": fast_p_fake outside [0,1]");
    }
};

namespace mock {

inline constexpr std::array<std::string_view, 8> reason_bank{
    "The lighting falls consistently from one side and the shadows agree with it.",
    "Edges around the subject look cut out against the background.",
    "Skin texture is smooth but still shows pores and fine wrinkles.",
    "The fingers are complete and the pose is anatomically plausible.",
    "The printed text on the garment is legible and correctly spelled.",
    "Colors are balanced without any strange cast.",
    "Fabric folds follow the bending of the body.",
    "Background blur has a natural optical falloff.",
};

inline constexpr std::array<std::string_view, 4> reflection_bank{
    "On a second look the earlier observation about the edges was too hasty.",
    "Checking the hands again confirms the first reading.",
    "The suspicious texture turns out to be ordinary retouching.",
    "The shadow under the subject grounds it firmly in the scene.",
};

inline std::string pick_sentences(std::uint64_t seed, std::string_view key, std::span<const std::string_view> bank,
                                  std::size_t count) {
    rng::Stream s(rng::mix(seed, key));
    std::vector<std::size_t> idx(bank.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::string out;
    for (std::size_t k = 0; k < count && k < idx.size(); ++k) {
        const std::size_t j = k + static_cast<std::size_t>(s.below(idx.size() - k));
        std::swap(idx[k], idx[j]);
        if (k) out += ' ';
        out += bank[idx[k]];
    }
    return out;
}

// Tags are single tokens; everything else is a whitespace run glued to the next word.
inline std::vector<std::string> chunk(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t j = i;
        while (j < text.size() && text::is_space(text[j])) ++j;
        if (j == text.size()) {
            out.emplace_back(text.substr(i));
            break;
        }
        if (text[j] == '<') {
            std::size_t k = j + 1;
            while (k < text.size() && text[k] != '>' && text[k] != '<' && !text::is_space(text[k])) ++k;
            j = (k < text.size() && text[k] == '>') ? k + 1 : j + 1;
        } else {
            while (j < text.size() && !text::is_space(text[j]) && text[j] != '<') ++j;
        }
        out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

inline double safe_log(double p) { return std::log(std::clamp(p, 1e-12, 1.0)); }

} // namespace mock

// Deterministic ModelClient driven by per-sample scripts. Only the transient
// failure counters are mutable, and they are guarded.
class MockModel final : public ModelClient {
public:
    explicit MockModel(std::vector<MockScript> scripts) {
        for (auto& s : scripts) {
            s.validate();
            const std::string id = s.sample_id;
            if (!scripts_.emplace(id, std::move(s)).second) throw DomainError("duplicate mock script " + id);
        }
    }

    const MockScript& script(const std::string& id) const {
        auto it = scripts_.find(id);
        if (it == scripts_.end()) throw ProtocolError("mock model has no script for sample '" + id + "'");
        return it->second;
    }

    // Full assistant output for a grammar, before any stop sequence is applied.
    std::string full_text(const MockScript& s, ReasoningMode mode, bool deep) const {
        const std::string imp(to_string(s.impression_verdict()));
        const std::string reason = s.reason.value_or(mock::pick_sentences(s.seed, s.sample_id, mock::reason_bank, 3));
        const std::string refl =
            s.reflection.value_or(mock::pick_sentences(s.seed, s.sample_id, mock::reflection_bank, 2));
        auto v = [&](InferMode m) { return std::string(to_string(s.answer_for(m))); };
        switch (mode) {
        case ReasoningMode::heuristic_to_analytic: {
            const std::string head = "<impression>" + imp + "</impression>";
            if (deep && s.deep_override) return head + *s.deep_override;
            return head + "\n<reason>" + reason + "</reason>\n<reflection>" + refl + "</reflection>\n<answer>" +
                   std::string(to_string(s.deep_verdict)) + "</answer>";
        }
        case ReasoningMode::guess_reason_answer:
            return "<impression>" + imp + "</impression>\n<think>" + reason + " " + refl + "</think>\n<answer>" +
                   v(InferMode::gra) + "</answer>";
        case ReasoningMode::heuristic:
            return "<answer>" + v(InferMode::hr) + "</answer>\n<reason>" + reason + "</reason>";
        case ReasoningMode::analytic:
            return "<think>" + reason + " " + refl + "</think>\n<answer>" + v(InferMode::ar) + "</answer>";
        case ReasoningMode::without_reasoning:
            return v(InferMode::none);
        }
        return {};
    }

    Generation generate(const GenerationRequest& req) override {
        const MockScript& s = script(req.sample_id);
        maybe_fail(s);
        return make_generation(s, full_text(s, req.mode, false), req);
    }

    Generation continue_generation(const GenerationRequest& req, std::string_view prefix) override {
        const MockScript& s = script(req.sample_id);
        maybe_fail(s);
        const std::string full = full_text(s, req.mode, true);
        if (full.compare(0, prefix.size(), prefix) != 0)
            throw ProtocolError("committed prefix does not match the scripted transcript for " + s.sample_id);
        return make_generation(s, full.substr(prefix.size()), req);
    }

    std::optional<double> score_continuation(const GenerationRequest& req, std::string_view /*prefix*/,
                                             std::string_view continuation) override {
        const MockScript& s = script(req.sample_id);
        if (!s.scorable) return std::nullopt;
        auto v = try_parse_verdict(continuation);
        if (!v) return std::nullopt;
        return mock::safe_log(*v == Verdict::fake ? s.fast_p_fake : 1.0 - s.fast_p_fake);
    }

private:
    void maybe_fail(const MockScript& s) {
        if (s.transient_failures <= 0) return;
        std::lock_guard lock(mu_);
        int& n = calls_[s.sample_id];
        if (n++ < s.transient_failures) throw TransientError("injected transient failure for " + s.sample_id);
    }

    Generation make_generation(const MockScript& s, std::string text, const GenerationRequest& req) const {
        std::size_t cut = text.size();
        for (const auto& stop : req.stop) {
            if (stop.empty()) continue;
            cut = std::min(cut, text.find(stop));
        }
        text.resize(cut);

        Generation g;
        const Verdict sampled = s.impression_verdict();
        const double p_sampled = sampled == Verdict::fake ? s.fast_p_fake : 1.0 - s.fast_p_fake;
        bool after_impression = false, verdict_done = false;
        for (auto& tok : mock::chunk(text)) {
            TokenLogprob t{tok, 0.0, {}};
            if (!verdict_done && after_impression && !text::is_blank(tok)) {
                verdict_done = true;
                if (try_parse_verdict(tok) == sampled) {
                    t.logprob = mock::safe_log(p_sampled);
                    t.top.push_back({tok, t.logprob});
                    if (!s.omit_alternative)
                        t.top.push_back({std::string(to_string(flip(sampled))), mock::safe_log(1.0 - p_sampled)});
                    std::stable_sort(t.top.begin(), t.top.end(),
                                     [](const TopCandidate& a, const TopCandidate& b) { return a.logprob > b.logprob; });
                }
            }
            if (t.top.empty()) t.top.push_back({tok, t.logprob});
            if (text::trim(tok) == "<impression>" || text::trim(tok) == "<guess>") after_impression = true;
            g.tokens.push_back(std::move(t));
        }
        g.text = std::move(text);
        g.completion_tokens = g.tokens.size();
        return g;
    }

    std::unordered_map<std::string, MockScript> scripts_;
    std::mutex mu_;
    std::unordered_map<std::string, int> calls_;
};

inline jsonl::json to_json(const MockScript& s) {
    jsonl::json j{{"sample_id", s.sample_id},
                  {"fast_p_fake", jsonl::round9(s.fast_p_fake)},
                  {"deep_verdict", std::string(to_string(s.deep_verdict))},
                  {"seed", s.seed}};
    if (s.fast_verdict) j["fast_verdict"] = std::string(to_string(*s.fast_verdict));
    if (s.reason) j["reason"] = *s.reason;
    if (s.reflection) j["reflection"] = *s.reflection;
    if (!s.answers.empty()) {
        jsonl::json a = jsonl::json::object();
        for (const auto& [m, v] : s.answers) a[std::string(to_string(m))] = std::string(to_string(v));
        j["answers"] = a;
    }
    if (s.transient_failures) j["transient_failures"] = s.transient_failures;
    if (s.deep_override) j["deep_override"] = *s.deep_override;
    if (s.omit_alternative) j["omit_alternative"] = true;
    if (!s.scorable) j["scorable"] = false;
    return j;
}

inline MockScript mock_script_from_json(const jsonl::json& j, std::size_t line) {
    MockScript s;
    s.sample_id = detail::req_string(j, "sample_id", line);
    auto p = detail::opt_number(j, "fast_p_fake", line);
    if (!p) throw SchemaError(line, "fast_p_fake", "missing");
    if (!(*p >= 0.0 && *p <= 1.0)) throw SchemaError(line, "fast_p_fake", "outside [0,1]");
    s.fast_p_fake = *p;
    s.fast_verdict = detail::opt_verdict(j, "fast_verdict", line);
    auto dv = detail::opt_verdict(j, "deep_verdict", line);
    if (!dv) throw SchemaError(line, "deep_verdict", "missing");
    s.deep_verdict = *dv;
    if (auto it = j.find("reason"); it != j.end() && it->is_string()) s.reason = it->get<std::string>();
    if (auto it = j.find("reflection"); it != j.end() && it->is_string()) s.reflection = it->get<std::string>();
    if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned() && !it->is_number_integer()) throw SchemaError(line, "seed", "expected integer");
        s.seed = it->get<std::uint64_t>();
    }
    if (auto it = j.find("answers"); it != j.end()) {
        if (!it->is_object()) throw SchemaError(line, "answers", "expected object");
        for (auto a = it->begin(); a != it->end(); ++a) {
            auto m = try_parse_infer_mode(a.key());
            auto v = a->is_string() ? try_parse_verdict(a->get<std::string>()) : std::nullopt;
            if (!m || !v) throw SchemaError(line, "answers", "bad entry '" + a.key() + "'");
            s.answers[*m] = *v;
        }
    }
    if (auto n = detail::opt_number(j, "transient_failures", line)) s.transient_failures = static_cast<int>(*n);
    if (auto it = j.find("deep_override"); it != j.end() && it->is_string()) s.deep_override = it->get<std::string>();
    if (auto it = j.find("omit_alternative"); it != j.end() && it->is_boolean()) s.omit_alternative = it->get<bool>();
    if (auto it = j.find("scorable"); it != j.end() && it->is_boolean()) s.scorable = it->get<bool>();
    return s;
}

inline std::vector<MockScript> load_mock_scripts(const std::string& path) {
    std::vector<MockScript> out;
    for (const auto& l : jsonl::read(path)) out.push_back(mock_script_from_json(l.value, l.number));
    return out;
}

} // namespace har
