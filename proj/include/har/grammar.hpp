#pragma once

#include "har/errors.hpp"
#include "har/text_util.hpp"
#include "har/verdict.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace har {

struct ByteRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

struct SegmentSpan {
    std::string name;
    ByteRange range;  // whole segment, open tag through close tag
};

struct Segment {
    std::string name;
    std::string body;  // verbatim text between the tags
    std::optional<Verdict> verdict;
    ByteRange span;

    // Spans are positional metadata; verdict segments compare by verdict only.
    friend bool operator==(const Segment& a, const Segment& b) {
        if (a.name != b.name || a.verdict.has_value() != b.verdict.has_value()) return false;
        return a.verdict ? *a.verdict == *b.verdict : a.body == b.body;
    }
};

struct ParsedResponse {
    ReasoningMode mode = ReasoningMode::heuristic_to_analytic;
    std::vector<Segment> segments;

    const Segment* find(std::string_view name) const {
        for (const auto& s : segments)
            if (s.name == name) return &s;
        return nullptr;
    }

    // The segment carrying the final verdict in every grammar is "answer".
    std::optional<Verdict> answer() const {
        const Segment* s = find("answer");
        return s ? s->verdict : std::nullopt;
    }

    std::vector<SegmentSpan> spans() const {
        std::vector<SegmentSpan> out;
        out.reserve(segments.size());
        for (const auto& s : segments) out.push_back({s.name, s.span});
        return out;
    }

    friend bool operator==(const ParsedResponse&, const ParsedResponse&) = default;
};

struct HarResponse {
    Verdict impression = Verdict::real;
    std::string reason;
    std::string reflection;
    Verdict answer = Verdict::real;
    std::vector<SegmentSpan> spans;

    friend bool operator==(const HarResponse& a, const HarResponse& b) {
        return a.impression == b.impression && a.reason == b.reason && a.reflection == b.reflection &&
               a.answer == b.answer;
    }
};

namespace grammar {

struct SlotSpec {
    std::string_view name;       // canonical tag name
    std::string_view alt_name;   // accepted alternative, empty if none
    bool verdict;
};

inline std::span<const SlotSpec> slots(ReasoningMode mode) {
    static constexpr std::array<SlotSpec, 4> har{{
        {"impression", "", true}, {"reason", "", false}, {"reflection", "", false}, {"answer", "", true}}};
    static constexpr std::array<SlotSpec, 2> hr{{{"answer", "", true}, {"reason", "", false}}};
    static constexpr std::array<SlotSpec, 2> ar{{{"think", "", false}, {"answer", "", true}}};
    static constexpr std::array<SlotSpec, 3> gra{{
        {"impression", "guess", true}, {"think", "", false}, {"answer", "", true}}};
    switch (mode) {
    case ReasoningMode::heuristic_to_analytic: return har;
    case ReasoningMode::heuristic: return hr;
    case ReasoningMode::analytic: return ar;
    case ReasoningMode::guess_reason_answer: return gra;
    case ReasoningMode::without_reasoning: break;
    }
    return {};
}

inline std::string open_tag(std::string_view name) { return "<" + std::string(name) + ">"; }
inline std::string close_tag(std::string_view name) { return "</" + std::string(name) + ">"; }

namespace detail {

struct TagToken {
    std::size_t pos;
    std::size_t len;
    std::size_t slot;
    std::string_view name;
    bool open;
};

// Every occurrence of a tag token belonging to the mode's grammar, in text order.
inline std::vector<TagToken> scan_tags(std::string_view text, std::span<const SlotSpec> spec) {
    std::vector<TagToken> out;
    for (std::size_t i = text.find('<'); i != std::string_view::npos; i = text.find('<', i + 1)) {
        const bool open = !(i + 1 < text.size() && text[i + 1] == '/');
        const std::size_t name_at = i + (open ? 1 : 2);
        for (std::size_t s = 0; s < spec.size(); ++s) {
            bool hit = false;
            for (std::string_view nm : {spec[s].name, spec[s].alt_name}) {
                if (nm.empty()) continue;
                if (text.compare(name_at, nm.size(), nm) == 0 && name_at + nm.size() < text.size() &&
                    text[name_at + nm.size()] == '>') {
                    out.push_back({i, nm.size() + (open ? 2 : 3), s, nm, open});
                    hit = true;
                    break;
                }
            }
            if (hit) break;
        }
    }
    return out;
}

inline ParsedResponse parse_bare(std::string_view text) {
    std::string_view t = text::trim(text);
    auto v = try_parse_verdict(t);
    if (!v) throw ParseError(ParseErrorKind::BadVerdict, "answer", 0, std::string(t));
    const std::size_t b = static_cast<std::size_t>(t.data() - text.data());
    ParsedResponse r;
    r.mode = ReasoningMode::without_reasoning;
    r.segments.push_back({"answer", std::string(t), v, {b, b + t.size()}});
    return r;
}

} // namespace detail
} // namespace grammar

// Strict parse against one mode's grammar. Throws ParseError.
inline ParsedResponse parse_mode(std::string_view text, ReasoningMode mode) {
    using grammar::detail::TagToken;
    if (mode == ReasoningMode::without_reasoning) return grammar::detail::parse_bare(text);

    const auto spec = grammar::slots(mode);
    const auto tokens = grammar::detail::scan_tags(text, spec);

    // Duplicates first, reported at the second occurrence in text order.
    std::vector<int> opens(spec.size(), 0), closes(spec.size(), 0);
    for (const auto& t : tokens) {
        int& n = t.open ? opens[t.slot] : closes[t.slot];
        if (++n > 1) throw ParseError(ParseErrorKind::DuplicateTag, std::string(t.name), t.pos);
    }
    for (std::size_t s = 0; s < spec.size(); ++s)
        if (opens[s] == 0) throw ParseError(ParseErrorKind::MissingTag, std::string(spec[s].name), text.size());
    for (std::size_t s = 0; s < spec.size(); ++s) {
        if (closes[s] == 0) {
            auto it = std::find_if(tokens.begin(), tokens.end(),
                                   [s](const TagToken& t) { return t.slot == s && t.open; });
            throw ParseError(ParseErrorKind::UnclosedTag, std::string(it->name), it->pos);
        }
    }

    // Exactly one open and one close per slot: the sequence must be o0 c0 o1 c1 ...
    std::vector<std::string_view> opened(spec.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& t = tokens[i];
        const std::size_t slot = i / 2;
        const bool want_open = i % 2 == 0;
        if (want_open) {
            if (!t.open || t.slot != slot) throw ParseError(ParseErrorKind::OutOfOrder, std::string(t.name), t.pos);
            opened[slot] = t.name;
        } else if (t.open || t.slot != slot || t.name != opened[slot]) {
            throw ParseError(ParseErrorKind::UnclosedTag, std::string(opened[slot]), t.pos);
        }
    }

    ParsedResponse r;
    r.mode = mode;
    std::size_t cursor = 0;
    for (std::size_t s = 0; s < spec.size(); ++s) {
        const TagToken& o = tokens[2 * s];
        const TagToken& c = tokens[2 * s + 1];
        if (!text::is_blank(text.substr(cursor, o.pos - cursor)))
            throw ParseError(ParseErrorKind::StrayContent, std::string(o.name), cursor);
        const std::size_t body_at = o.pos + o.len;
        std::string_view body = text.substr(body_at, c.pos - body_at);
        Segment seg{std::string(o.name), std::string(body), std::nullopt, {o.pos, c.pos + c.len}};
        if (spec[s].verdict) {
            seg.verdict = try_parse_verdict(body);
            if (!seg.verdict)
                throw ParseError(ParseErrorKind::BadVerdict, seg.name, body_at, std::string(text::trim(body)));
        } else if (text::is_blank(body)) {
            throw ParseError(ParseErrorKind::EmptySegment, seg.name, body_at);
        }
        r.segments.push_back(std::move(seg));
        cursor = c.pos + c.len;
    }
    if (!text::is_blank(text.substr(cursor)))
        throw ParseError(ParseErrorKind::TrailingContent, "", cursor);
    return r;
}

inline HarResponse to_har(const ParsedResponse& p) {
    if (p.mode != ReasoningMode::heuristic_to_analytic || p.segments.size() != 4)
        throw ParseError(ParseErrorKind::UnsupportedMode, std::string(to_string(p.mode)), 0);
    HarResponse h;
    h.impression = *p.segments[0].verdict;
    h.reason = p.segments[1].body;
    h.reflection = p.segments[2].body;
    h.answer = *p.segments[3].verdict;
    h.spans = p.spans();
    return h;
}

inline HarResponse parse_har(std::string_view text) {
    return to_har(parse_mode(text, ReasoningMode::heuristic_to_analytic));
}

inline ParsedResponse to_parsed(const HarResponse& h) {
    ParsedResponse p;
    p.mode = ReasoningMode::heuristic_to_analytic;
    auto span_of = [&](std::size_t i) { return i < h.spans.size() ? h.spans[i].range : ByteRange{}; };
    p.segments = {{"impression", std::string(to_string(h.impression)), h.impression, span_of(0)},
                  {"reason", h.reason, std::nullopt, span_of(1)},
                  {"reflection", h.reflection, std::nullopt, span_of(2)},
                  {"answer", std::string(to_string(h.answer)), h.answer, span_of(3)}};
    return p;
}

// Canonical form: one newline between segments, lowercase verdicts.
inline std::string render(const ParsedResponse& p) {
    const auto spec = grammar::slots(p.mode);
    if (p.mode == ReasoningMode::without_reasoning) {
        if (p.segments.size() != 1 || !p.segments[0].verdict)
            throw ParseError(ParseErrorKind::UnsupportedMode, "answer", 0);
        return std::string(to_string(*p.segments[0].verdict));
    }
    if (p.segments.size() != spec.size())
        throw ParseError(ParseErrorKind::UnsupportedMode, std::string(to_string(p.mode)), 0);
    std::string out;
    for (std::size_t s = 0; s < spec.size(); ++s) {
        const Segment& seg = p.segments[s];
        if (seg.name != spec[s].name && seg.name != spec[s].alt_name)
            throw ParseError(ParseErrorKind::UnsupportedMode, seg.name, 0);
        if (spec[s].verdict != seg.verdict.has_value())
            throw ParseError(ParseErrorKind::UnsupportedMode, seg.name, 0);
        if (s) out += '\n';
        out += grammar::open_tag(seg.name);
        out += seg.verdict ? std::string(to_string(*seg.verdict)) : seg.body;
        out += grammar::close_tag(seg.name);
    }
    return out;
}

inline std::string render(const HarResponse& h) { return render(to_parsed(h)); }

inline bool is_well_formed(std::string_view text, ReasoningMode mode) noexcept {
    try {
        parse_mode(text, mode);
        return true;
    } catch (...) {
        return false;
    }
}

// Last <answer>...</answer> verdict that can be found, ignoring the rest of the
// structure. Used to score malformed rollouts.
inline std::optional<Verdict> lenient_answer(std::string_view text, ReasoningMode mode) {
    if (mode == ReasoningMode::without_reasoning) return try_parse_verdict(text);
    constexpr std::string_view open = "<answer>", close = "</answer>";
    for (std::size_t at = text.rfind(open); at != std::string_view::npos;
         at = at == 0 ? std::string_view::npos : text.rfind(open, at - 1)) {
        const std::size_t body = at + open.size();
        const std::size_t end = text.find(close, body);
        if (end == std::string_view::npos) continue;
        if (auto v = try_parse_verdict(text.substr(body, end - body))) return v;
    }
    return std::nullopt;
}

} // namespace har
