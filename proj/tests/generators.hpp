#pragma once

// Hand-rolled generators for property tests. All draws come from a seeded
// har::rng::Stream so failures reproduce from the printed seed.

#include "har/har.hpp"

#include <string>
#include <vector>

namespace gen {

inline har::Verdict verdict(har::rng::Stream& s) { return s.bernoulli(0.5) ? har::Verdict::fake : har::Verdict::real; }

// Free text that never contains '<' so it cannot open a tag.
inline std::string words(har::rng::Stream& s, std::size_t max_words, std::size_t vocab = 12) {
    static const char* bank[] = {"edge", "light", "shadow", "texture", "hand", "face", "grain", "noise",
                                 "blur", "sky",   "glare",  "&amp;",   "a>b", "x\ty", "ünï",  "finger"};
    const std::size_t n = 1 + s.below(max_words);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += s.bernoulli(0.1) ? "\n" : " ";
        out += bank[s.below(std::min<std::size_t>(vocab, std::size(bank)))];
    }
    return out;
}

inline har::HarResponse har_response(har::rng::Stream& s) {
    return {verdict(s), words(s, 30), words(s, 20), verdict(s), {}};
}

inline std::vector<std::string> tokens(har::rng::Stream& s, std::size_t max_len, std::size_t vocab) {
    std::vector<std::string> t(s.below(max_len + 1));
    for (auto& x : t) x = std::string(1, static_cast<char>('a' + s.below(vocab)));
    return t;
}

// Random text biased toward tag fragments and near-miss markup.
inline std::string fuzz_text(har::rng::Stream& s) {
    static const char* atoms[] = {"<impression>", "</impression>", "<reason>", "</reason>", "<reflection>",
                                  "</reflection>", "<answer>",    "</answer>", "<think>",   "</think>",
                                  "<guess>",      "</guess>",     "real",      "fake",      "REAL",
                                  " ",            "\n",           "<",         ">",         "</",
                                  "x",            "<answer",      "</ answer>", "\xff",      "<<>>"};
    const std::size_t n = s.below(24);
    std::string out;
    for (std::size_t i = 0; i < n; ++i) out += atoms[s.below(std::size(atoms))];
    return out;
}

// Mutation of a well-formed transcript: delete, duplicate or swap a byte range.
inline std::string mutate(har::rng::Stream& s, std::string t) {
    if (t.empty()) return t;
    const std::size_t a = s.below(t.size()), b = a + s.below(t.size() - a + 1);
    switch (s.below(3)) {
    case 0: t.erase(a, b - a); break;
    case 1: t.insert(a, t.substr(a, b - a)); break;
    default: std::swap(t[a], t[s.below(t.size())]); break;
    }
    return t;
}

// Bracket-header annotator reply: right or wrong answer, sometimes malformed.
inline std::string bracket_reply(har::rng::Stream& s, har::Verdict answer, bool malformed) {
    const std::string v = answer == har::Verdict::fake ? "Fake" : "Real";
    const std::string imp = s.bernoulli(0.5) ? "Fake" : "Real";
    std::vector<std::string> parts{"[Impression] " + imp, "[Reasons] " + words(s, 20),
                                   "[Reflection] " + words(s, 10), "[Answer] " + v};
    if (malformed) {
        switch (s.below(3)) {
        case 0: parts.erase(parts.begin() + static_cast<long>(s.below(parts.size()))); break;
        case 1: std::swap(parts[1], parts[2]); break;
        default: parts[3] = "[Answer] maybe"; break;
        }
    }
    std::string out;
    for (const auto& p : parts) out += p + "\n";
    return out;
}

} // namespace gen
