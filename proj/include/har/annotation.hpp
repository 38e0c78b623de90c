#pragma once

#include "har/errors.hpp"
#include "har/grammar.hpp"
#include "har/json_util.hpp"
#include "har/prompt_templates.hpp"
#include "har/random.hpp"
#include "har/records.hpp"
#include "har/text_util.hpp"
#include "har/verdict.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace har {

enum class AnnotationStrategy { two_turn, single_turn_simulated };

inline constexpr std::string_view to_string(AnnotationStrategy s) noexcept {
    return s == AnnotationStrategy::two_turn ? "two_turn" : "single_turn_simulated";
}

// ---- impression plan ----

struct PlannedImpression {
    std::string sample_id;
    Verdict truth;
    Verdict impression;
    double draw;
    bool wrong() const noexcept { return impression != truth; }
};

struct ImpressionPlan {
    double wrong_proportion = 0.7;
    std::uint64_t seed = 0;
    std::vector<PlannedImpression> assignments;  // manifest order

    double wrong_rate() const {
        if (assignments.empty()) return 0.0;
        std::size_t w = 0;
        for (const auto& a : assignments) w += a.wrong();
        return static_cast<double>(w) / static_cast<double>(assignments.size());
    }
};

// Draws are keyed by (seed, sample_id), so reordering the manifest changes nothing.
inline PlannedImpression plan_one(const std::string& sample_id, Verdict truth, double wrong_proportion,
                                  std::uint64_t seed) {
    const double draw = rng::keyed_uniform(seed, sample_id);
    return {sample_id, truth, draw < wrong_proportion ? flip(truth) : truth, draw};
}

inline ImpressionPlan plan_impressions(const std::vector<ManifestRecord>& manifest, double wrong_proportion,
                                       std::uint64_t seed) {
    if (!(wrong_proportion >= 0.0 && wrong_proportion <= 1.0)) throw DomainError("wrong_proportion outside [0,1]");
    ImpressionPlan plan{wrong_proportion, seed, {}};
    plan.assignments.reserve(manifest.size());
    for (const auto& m : manifest) plan.assignments.push_back(plan_one(m.sample_id, m.label, wrong_proportion, seed));
    return plan;
}

// ---- prompts ----

struct Message {
    std::string role;  // "user" | "assistant"
    std::string content;
    friend bool operator==(const Message&, const Message&) = default;
};

struct Conversation {
    std::vector<Message> messages;
    std::string image_ref;
};

inline Prompt build_strategy2_prompt(const TemplateStore& store, Verdict truth, Verdict impression,
                                     std::string image_ref) {
    const std::string instruction = store.get(tmpl::instruction);
    return {fill(store.get(tmpl::strategy2(impression, truth)), {{"Instruction", instruction}}), std::move(image_ref)};
}

struct Strategy1Prompts {
    Prompt round1;
    std::string round2_text;
    // History for round 2: round-1 prompt, the model's round-1 reply, then round 2.
    Conversation round2(const std::string& round1_response) const {
        return {{{"user", round1.text}, {"assistant", round1_response}, {"user", round2_text}}, round1.image_ref};
    }
};

inline Strategy1Prompts build_strategy1_prompts(const TemplateStore& store, Verdict truth, std::string image_ref) {
    const std::string instruction = store.get(tmpl::instruction);
    Strategy1Prompts p;
    p.round1 = {fill(store.get(tmpl::strategy1_round1), {{"Instruction", instruction}}), std::move(image_ref)};
    p.round2_text = fill(store.get(tmpl::strategy1_round2), {{"Ground Truth", label_text(truth)}});
    return p;
}

inline Prompt build_judge_prompt(const TemplateStore& store, Verdict truth, std::string_view explanation,
                                 std::string image_ref) {
    if (text::is_blank(explanation)) throw ValidationError("judge explanation is empty");
    const std::string instruction = store.get(tmpl::instruction);
    std::string t = fill(store.get(tmpl::judge), {{"Instruction", instruction}, {"Ground Truth", label_text(truth)}});
    t += "\n\n## Explanation\n\n";
    t += explanation;
    return {std::move(t), std::move(image_ref)};
}

// ---- bracket-header responses ----

enum class Section { impression, reasons, reflection, answer };

inline constexpr std::string_view header_of(Section s) noexcept {
    constexpr std::array<std::string_view, 4> h{"[Impression]", "[Reasons]", "[Reflection]", "[Answer]"};
    return h[static_cast<std::size_t>(s)];
}

struct SectionText {
    Section section;
    std::string body;  // trimmed, bold markers around the header removed
};

struct BracketParse {
    std::vector<SectionText> sections;  // text order
    bool malformed = false;
    std::string problem;

    const SectionText* find(Section s) const {
        for (const auto& x : sections)
            if (x.section == s) return &x;
        return nullptr;
    }
};

namespace detail {

inline std::optional<Verdict> bracket_verdict(std::string_view body) {
    std::string t;
    for (char c : body)
        if (c != '*' && c != '.' && c != '"' && c != '\'' && c != ':') t += c;
    return try_parse_verdict(t);
}

} // namespace detail

// Splits text at the four headers (optionally wrapped in **). Preamble before the
// first header is ignored; every expected header must appear exactly once, in order.
inline BracketParse parse_bracket_sections(std::string_view text, const std::vector<Section>& expected) {
    struct Hit {
        std::size_t start, body_at;
        Section s;
    };
    std::vector<Hit> hits;
    for (Section s : {Section::impression, Section::reasons, Section::reflection, Section::answer}) {
        const std::string_view h = header_of(s);
        for (std::size_t p = text.find(h); p != std::string_view::npos; p = text.find(h, p + 1)) {
            std::size_t start = p, body = p + h.size();
            if (start >= 2 && text.substr(start - 2, 2) == "**") start -= 2;
            if (text.substr(body, 2) == "**") body += 2;
            hits.push_back({start, body, s});
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.start < b.start; });

    BracketParse out;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const std::size_t end = i + 1 < hits.size() ? hits[i + 1].start : text.size();
        std::string_view body = text::trim(text.substr(hits[i].body_at, end - hits[i].body_at));
        if (!body.empty() && body.front() == ':') body = text::trim(body.substr(1));
        out.sections.push_back({hits[i].s, std::string(body)});
    }

    auto fail = [&](std::string why) {
        out.malformed = true;
        out.problem = std::move(why);
        return out;
    };
    if (out.sections.size() != expected.size()) {
        for (Section s : expected)
            if (!out.find(s)) return fail("missing " + std::string(header_of(s)));
        return fail("unexpected or repeated section headers");
    }
    for (std::size_t i = 0; i < expected.size(); ++i)
        if (out.sections[i].section != expected[i]) return fail("sections out of order");
    for (const auto& s : out.sections) {
        const bool verdict = s.section == Section::impression || s.section == Section::answer;
        if (verdict && !detail::bracket_verdict(s.body))
            return fail(std::string(header_of(s.section)) + " is not real/fake");
        if (!verdict && s.body.empty()) return fail(std::string(header_of(s.section)) + " is empty");
    }
    return out;
}

inline const std::vector<Section>& single_turn_sections() {
    static const std::vector<Section> s{Section::impression, Section::reasons, Section::reflection, Section::answer};
    return s;
}
inline const std::vector<Section>& round1_sections() {
    static const std::vector<Section> s{Section::answer, Section::reasons};
    return s;
}
inline const std::vector<Section>& round2_sections() {
    static const std::vector<Section> s{Section::reflection, Section::answer};
    return s;
}

enum class Rejection { none, wrong_answer, malformed };

inline constexpr std::string_view to_string(Rejection r) noexcept {
    return r == Rejection::none ? "accepted" : r == Rejection::wrong_answer ? "WrongAnswer" : "Malformed";
}

struct Validation {
    Rejection rejection = Rejection::none;
    std::string detail;
    std::optional<Verdict> final_answer;
    bool accepted() const noexcept { return rejection == Rejection::none; }
};

// For two_turn, response_text is the round-2 reply ([Reflection], [Answer]).
inline Validation validate_annotation(std::string_view response_text, Verdict truth, AnnotationStrategy strategy) {
    const auto& expected = strategy == AnnotationStrategy::two_turn ? round2_sections() : single_turn_sections();
    const BracketParse p = parse_bracket_sections(response_text, expected);
    if (p.malformed) return {Rejection::malformed, p.problem, std::nullopt};
    const Verdict answer = *detail::bracket_verdict(p.find(Section::answer)->body);
    if (answer != truth) return {Rejection::wrong_answer, "final answer " + std::string(to_string(answer)), answer};
    return {Rejection::none, {}, answer};
}

struct AnnotationRecord {
    std::string sample_id;
    AnnotationStrategy strategy = AnnotationStrategy::single_turn_simulated;
    Verdict truth = Verdict::real;
    std::optional<Verdict> impression;
    std::vector<std::string> prompts;
    std::vector<std::string> raw_responses;  // accepted attempt (or the last one tried)
    std::optional<HarResponse> parsed;
    bool accepted = false;
    int attempts = 0;
};

namespace detail {

struct Assembled {
    std::optional<HarResponse> har;
    std::optional<Verdict> impression;
    std::string problem;
};

inline Assembled assemble(const std::vector<std::string>& responses, AnnotationStrategy strategy) {
    Assembled a;
    if (strategy == AnnotationStrategy::single_turn_simulated) {
        if (responses.size() != 1) return {std::nullopt, std::nullopt, "expected one response"};
        const auto p = parse_bracket_sections(responses[0], single_turn_sections());
        if (p.malformed) return {std::nullopt, std::nullopt, p.problem};
        HarResponse h;
        h.impression = *bracket_verdict(p.find(Section::impression)->body);
        h.reason = p.find(Section::reasons)->body;
        h.reflection = p.find(Section::reflection)->body;
        h.answer = *bracket_verdict(p.find(Section::answer)->body);
        return {h, h.impression, {}};
    }
    if (responses.size() != 2) return {std::nullopt, std::nullopt, "expected round-1 and round-2 responses"};
    const auto r1 = parse_bracket_sections(responses[0], round1_sections());
    if (r1.malformed) return {std::nullopt, std::nullopt, "round 1: " + r1.problem};
    const auto r2 = parse_bracket_sections(responses[1], round2_sections());
    if (r2.malformed) return {std::nullopt, bracket_verdict(r1.find(Section::answer)->body), "round 2: " + r2.problem};
    HarResponse h;
    h.impression = *bracket_verdict(r1.find(Section::answer)->body);
    h.reason = r1.find(Section::reasons)->body;
    h.reflection = r2.find(Section::reflection)->body;
    h.answer = *bracket_verdict(r2.find(Section::answer)->body);
    return {h, h.impression, {}};
}

} // namespace detail

// Responses for one attempt: {reply} for single-turn, {round1, round2} for two-turn.
using AnnotationGenerator = std::function<std::vector<std::string>(int attempt)>;

inline AnnotationRecord rejection_loop(const std::string& sample_id, const AnnotationGenerator& generator, Verdict truth,
                                       AnnotationStrategy strategy, int max_attempts = 5,
                                       std::vector<std::string> prompts = {}) {
    if (max_attempts < 1) throw DomainError("max_attempts must be at least 1");
    AnnotationRecord rec;
    rec.sample_id = sample_id;
    rec.strategy = strategy;
    rec.truth = truth;
    rec.prompts = std::move(prompts);
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        rec.attempts = attempt;
        rec.raw_responses = generator(attempt);
        const auto a = detail::assemble(rec.raw_responses, strategy);
        rec.impression = a.impression;
        if (!a.har) continue;
        const std::string& final_text = rec.raw_responses.back();
        if (!validate_annotation(final_text, truth, strategy).accepted()) continue;
        rec.parsed = a.har;
        rec.accepted = true;
        return rec;
    }
    throw ExhaustedError(sample_id, max_attempts);
}

struct SftRecord {
    std::string sample_id;
    Prompt prompt;
    std::string target;  // angle-tag transcript
    ReasoningMode grammar = ReasoningMode::heuristic_to_analytic;
};

inline SftRecord to_sft_record(const AnnotationRecord& rec, ReasoningMode target_grammar, const TemplateStore& store,
                               std::string image_ref = {}) {
    if (!rec.accepted) throw ConversionError("record '" + rec.sample_id + "' was not accepted");
    if (!rec.parsed) throw ConversionError("record '" + rec.sample_id + "' has no parsed sections");
    const HarResponse& h = *rec.parsed;
    if (text::is_blank(h.reason)) throw ConversionError("missing [Reasons]");
    if (text::is_blank(h.reflection)) throw ConversionError("missing [Reflection]");

    SftRecord out;
    out.sample_id = rec.sample_id;
    out.grammar = target_grammar;
    if (target_grammar == ReasoningMode::heuristic_to_analytic) {
        out.target = render(h);
    } else if (target_grammar == ReasoningMode::guess_reason_answer) {
        ParsedResponse p;
        p.mode = target_grammar;
        p.segments = {{"impression", "", h.impression, {}},
                      {"think", h.reason + "\n\n" + h.reflection, std::nullopt, {}},
                      {"answer", "", h.answer, {}}};
        out.target = render(p);
    } else {
        throw ConversionError("unsupported SFT grammar " + std::string(to_string(target_grammar)));
    }
    try {
        parse_mode(out.target, target_grammar);
    } catch (const ParseError& e) {
        throw ConversionError(std::string("converted transcript does not parse: ") + e.what());
    }
    out.prompt = inference_prompt(store, target_grammar, std::move(image_ref));
    return out;
}

// Convenience for callers holding raw section text rather than a record.
inline AnnotationRecord record_from_sections(const std::string& sample_id, Verdict truth,
                                             const std::vector<std::string>& responses, AnnotationStrategy strategy) {
    AnnotationRecord rec;
    rec.sample_id = sample_id;
    rec.truth = truth;
    rec.strategy = strategy;
    rec.raw_responses = responses;
    rec.attempts = 1;
    const auto a = detail::assemble(responses, strategy);
    if (!a.har) throw ConversionError("cannot convert '" + sample_id + "': " + a.problem);
    rec.parsed = a.har;
    rec.impression = a.impression;
    rec.accepted = a.har->answer == truth;
    return rec;
}

inline jsonl::json to_json(const AnnotationRecord& r, const std::optional<std::string>& sft_text) {
    return {{"sample_id", r.sample_id},
            {"strategy", std::string(to_string(r.strategy))},
            {"impression", r.impression ? jsonl::json(std::string(to_string(*r.impression))) : jsonl::json(nullptr)},
            {"attempts", r.attempts},
            {"accepted", r.accepted},
            {"sft_text", sft_text ? jsonl::json(*sft_text) : jsonl::json(nullptr)}};
}

} // namespace har
