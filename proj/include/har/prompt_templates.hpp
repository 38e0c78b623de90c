#pragma once

#include "har/embedded_templates.hpp"
#include "har/errors.hpp"
#include "har/text_util.hpp"
#include "har/verdict.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace har {

// Prompt text keeps the literal <image> marker; image_ref travels beside it untouched.
struct Prompt {
    std::string text;
    std::string image_ref;
    friend bool operator==(const Prompt&, const Prompt&) = default;
};

namespace tmpl {
inline constexpr std::string_view instruction = "instruction";
inline constexpr std::string_view sft = "sft";
inline constexpr std::string_view without_reasoning = "without_reasoning";
inline constexpr std::string_view heuristic = "heuristic";
inline constexpr std::string_view analytic = "analytic";
inline constexpr std::string_view guess_reason_answer = "guess_reason_answer";
inline constexpr std::string_view judge = "judge";
inline constexpr std::string_view strategy1_round1 = "strategy1_round1";
inline constexpr std::string_view strategy1_round2 = "strategy1_round2";

inline std::string strategy2(Verdict impression, Verdict truth) {
    return "strategy2_impression_" + std::string(to_string(impression)) + "_truth_" +
           std::string(to_string(truth));
}

inline constexpr std::string_view for_mode(ReasoningMode m) noexcept {
    switch (m) {
    case ReasoningMode::without_reasoning: return without_reasoning;
    case ReasoningMode::heuristic: return heuristic;
    case ReasoningMode::analytic: return analytic;
    case ReasoningMode::guess_reason_answer: return guess_reason_answer;
    case ReasoningMode::heuristic_to_analytic: return sft;
    }
    return sft;
}
} // namespace tmpl

// Built-in templates, optionally shadowed file-by-file from a directory of <name>.txt.
class TemplateStore {
public:
    TemplateStore() = default;
    explicit TemplateStore(std::filesystem::path override_dir) : dir_(std::move(override_dir)) {
        if (!std::filesystem::is_directory(*dir_))
            throw IoError("template directory not found: " + dir_->string());
    }

    std::string get(std::string_view name) const {
        if (dir_) {
            const auto path = *dir_ / (std::string(name) + ".txt");
            if (std::filesystem::exists(path)) {
                std::ifstream in(path, std::ios::binary);
                if (!in) throw IoError("cannot read template " + path.string());
                std::ostringstream ss;
                ss << in.rdbuf();
                return strip_final_newline(ss.str());
            }
        }
        for (const auto& e : embedded::templates)
            if (e.name == name) return strip_final_newline(std::string(e.text));
        throw TemplateMissingError(std::string(name));
    }

    bool has(std::string_view name) const {
        try {
            get(name);
            return true;
        } catch (const TemplateMissingError&) {
            return false;
        }
    }

    static std::vector<std::string> builtin_names() {
        std::vector<std::string> out;
        for (const auto& e : embedded::templates) out.emplace_back(e.name);
        return out;
    }

private:
    static std::string strip_final_newline(std::string s) {
        if (!s.empty() && s.back() == '\n') s.pop_back();
        return s;
    }

    std::optional<std::filesystem::path> dir_;
};

// Replaces every {Key} for the given keys; unknown braces are left alone.
inline std::string fill(std::string text, const std::map<std::string, std::string>& values) {
    for (const auto& [k, v] : values) text::replace_all(text, "{" + k + "}", v);
    return text;
}

inline std::string label_text(Verdict v) { return std::string(to_string(v)); }

inline Prompt inference_prompt(const TemplateStore& store, ReasoningMode mode, std::string image_ref,
                               const std::optional<std::string>& prompt_override = std::nullopt) {
    if (prompt_override) return {*prompt_override, std::move(image_ref)};
    const std::string instruction = store.get(tmpl::instruction);
    return {fill(store.get(tmpl::for_mode(mode)), {{"Instruction", instruction}}), std::move(image_ref)};
}

} // namespace har
