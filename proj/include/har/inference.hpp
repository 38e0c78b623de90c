#pragma once

#include "har/confidence_gate.hpp"
#include "har/errors.hpp"
#include "har/grammar.hpp"
#include "har/model_client.hpp"
#include "har/prompt_templates.hpp"
#include "har/records.hpp"
#include "har/text_util.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace har {

struct InferenceConfig {
    GateConfig gate;
    InferMode mode = InferMode::adaptive;
    int max_tokens = 4092;
    double temperature = 0.3;
    int top_logprobs = 5;
    std::size_t parallelism = 1;
    int max_attempts = 3;
    std::chrono::milliseconds backoff_base{200};
    bool timing = true;
};

inline constexpr std::string_view impression_open = "<impression>";
inline constexpr std::string_view impression_close = "</impression>";
inline constexpr std::string_view answer_close = "</answer>";

namespace detail {

inline double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// A candidate token counts for a verdict when its normalized text is a
// non-empty prefix of that verdict ("fa", " Fake", "real").
inline std::optional<Verdict> candidate_verdict(std::string_view token) {
    const std::string t = text::to_lower(text::trim(token));
    if (t.empty()) return std::nullopt;
    if (std::string_view("fake").substr(0, t.size()) == t) return Verdict::fake;
    if (std::string_view("real").substr(0, t.size()) == t) return Verdict::real;
    return std::nullopt;
}

struct ImpressionReading {
    AnswerDistribution dist;
    std::optional<Verdict> written;  // verdict text inside <impression>, if any
};

inline ImpressionReading read_impression(ModelClient& client, const GenerationRequest& req, const Generation& g) {
    const std::size_t open_at = g.text.find(impression_open);
    if (open_at == std::string::npos) throw ProtocolError("no <impression> tag in generated text");
    const std::size_t body_at = open_at + impression_open.size();

    // Locate the first non-blank token that starts at or after the impression body.
    const TokenLogprob* verdict_tok = nullptr;
    std::size_t offset = 0;
    for (const auto& t : g.tokens) {
        if (offset >= body_at && !text::is_blank(t.token)) {
            verdict_tok = &t;
            break;
        }
        offset += t.token.size();
    }

    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    double lp[2] = {neg_inf, neg_inf};  // real, fake
    bool seen[2] = {false, false};
    auto add = [&](std::string_view tok, double logprob) {
        if (!std::isfinite(logprob)) throw ProtocolError("non-finite log-probability for token '" + std::string(tok) + "'");
        if (auto v = candidate_verdict(tok)) {
            const int k = *v == Verdict::fake ? 1 : 0;
            lp[k] = log_add(lp[k], logprob);
            seen[k] = true;
        }
    };
    if (verdict_tok) {
        bool sampled_listed = false;
        for (const auto& c : verdict_tok->top) {
            add(c.token, c.logprob);
            sampled_listed |= c.token == verdict_tok->token;
        }
        if (!sampled_listed) add(verdict_tok->token, verdict_tok->logprob);
    }

    const std::string prefix = g.text.substr(0, body_at);
    for (int k = 0; k < 2; ++k) {
        if (seen[k]) continue;
        const Verdict v = k ? Verdict::fake : Verdict::real;
        auto scored = client.score_continuation(req, prefix, to_string(v));
        if (!scored) throw ProtocolError("no log-probability available for the '" + std::string(to_string(v)) +
                                         "' impression candidate");
        if (!std::isfinite(*scored)) throw ProtocolError("non-finite scored log-probability");
        lp[k] = *scored;
    }

    ImpressionReading r{extract_distribution(lp[1], lp[0]), std::nullopt};
    const std::size_t close_at = g.text.find(impression_close, body_at);
    r.written = try_parse_verdict(std::string_view(g.text).substr(body_at, close_at == std::string::npos
                                                                                 ? std::string::npos
                                                                                 : close_at - body_at));
    return r;
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

} // namespace detail

class InferenceController {
public:
    InferenceController(ModelClient& client, InferenceConfig cfg, TemplateStore templates = {})
        : client_(client), cfg_(std::move(cfg)), templates_(std::move(templates)) {
        cfg_.gate.validate();
        if (cfg_.parallelism == 0) throw ConfigError("parallelism must be at least 1");
        if (cfg_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
    }

    const InferenceConfig& config() const noexcept { return cfg_; }

    InferenceRecord infer(const ManifestRecord& sample) { return infer(sample, cfg_.mode); }

    // One attempt, no retries. Transport and protocol errors propagate.
    InferenceRecord infer(const ManifestRecord& sample, InferMode mode) {
        switch (mode) {
        case InferMode::adaptive:
        case InferMode::fast_only:
        case InferMode::deep_only: return infer_har(sample, mode);
        default: return infer_single(sample, mode);
        }
    }

    // Retries TransientError with exponential backoff, restarting the sample.
    // Any other per-sample failure becomes a flagged record with no verdict.
    InferenceRecord infer_with_retries(const ManifestRecord& sample) {
        std::string last_error;
        for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
            try {
                InferenceRecord r = infer(sample);
                r.attempts = attempt;
                return r;
            } catch (const TransientError& e) {
                last_error = e.what();
                if (attempt < cfg_.max_attempts && cfg_.backoff_base.count() > 0)
                    std::this_thread::sleep_for(cfg_.backoff_base * (1 << (attempt - 1)));
            } catch (const std::exception& e) {
                return failed(sample, attempt, e.what());
            }
        }
        return failed(sample, cfg_.max_attempts, "transient failures exhausted retries: " + last_error);
    }

    // Records come back in manifest order whatever the completion order.
    std::vector<InferenceRecord> batch(const std::vector<ManifestRecord>& manifest) {
        std::vector<InferenceRecord> out(manifest.size());
        if (manifest.empty()) return out;
        const std::size_t workers = std::min(cfg_.parallelism, manifest.size());
        if (workers == 1) {
            for (std::size_t i = 0; i < manifest.size(); ++i) out[i] = infer_with_retries(manifest[i]);
            return out;
        }
        std::atomic<std::size_t> next{0};
        {
            std::vector<std::jthread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w)
                pool.emplace_back([&] {
                    for (std::size_t i = next++; i < manifest.size(); i = next++) out[i] = infer_with_retries(manifest[i]);
                });
        }
        return out;
    }

private:
    GenerationRequest request(const ManifestRecord& s, ReasoningMode grammar) const {
        GenerationRequest r;
        r.sample_id = s.sample_id;
        r.mode = grammar;
        r.prompt = inference_prompt(templates_, grammar, s.image_ref, s.prompt_override);
        r.max_tokens = cfg_.max_tokens;
        r.temperature = cfg_.temperature;
        r.top_logprobs = cfg_.top_logprobs;
        return r;
    }

    Generation call_generate(const GenerationRequest& req) {
        if (client_.concurrent_safe()) return client_.generate(req);
        std::lock_guard lock(serial_);
        return client_.generate(req);
    }

    Generation call_continue(const GenerationRequest& req, std::string_view prefix) {
        if (client_.concurrent_safe()) return client_.continue_generation(req, prefix);
        std::lock_guard lock(serial_);
        return client_.continue_generation(req, prefix);
    }

    detail::ImpressionReading call_read(const GenerationRequest& req, const Generation& g) {
        if (client_.concurrent_safe()) return detail::read_impression(client_, req, g);
        std::lock_guard lock(serial_);
        return detail::read_impression(client_, req, g);
    }

    InferenceRecord infer_har(const ManifestRecord& s, InferMode mode) {
        InferenceRecord r;
        r.sample_id = s.sample_id;
        r.mode = mode;
        PhaseTiming timing;

        GenerationRequest req = request(s, ReasoningMode::heuristic_to_analytic);
        req.stop = {std::string(impression_close)};
        detail::Stopwatch sw1;
        const Generation g1 = call_generate(req);
        const detail::ImpressionReading imp = call_read(req, g1);
        timing.phase1_ms = sw1.ms();

        std::string prefix = g1.text;
        if (!text::ends_with(prefix, impression_close)) prefix += impression_close;
        r.impression = imp.written;
        r.impression_p_fake = imp.dist.p_fake();
        const GateDecision d = gate(imp.dist, cfg_.gate);
        r.entropy_bits = d.entropy_bits;
        r.fast_verdict = verdict_from(imp.dist, cfg_.gate.fake_threshold);
        r.generated_tokens = g1.completion_tokens;

        const bool deep = mode == InferMode::deep_only || (mode == InferMode::adaptive && d.path == GatePath::deep);
        if (!deep) {
            r.path = GatePath::fast;
            r.final_verdict = r.fast_verdict;
            r.transcript = prefix;
        } else {
            r.path = GatePath::deep;
            GenerationRequest req2 = req;
            req2.stop = {std::string(answer_close)};
            detail::Stopwatch sw2;
            const Generation g2 = call_continue(req2, prefix);
            timing.phase2_ms = sw2.ms();
            r.generated_tokens += g2.completion_tokens;
            r.transcript = prefix + g2.text;
            if (!text::ends_with(r.transcript, answer_close)) r.transcript += answer_close;
            try {
                r.final_verdict = parse_har(r.transcript).answer;
            } catch (const ParseError& e) {
                r.final_verdict = r.fast_verdict;
                r.error = std::string("malformed deep transcript: ") + e.what();
            }
        }
        if (cfg_.timing) r.timing = timing;
        return r;
    }

    InferenceRecord infer_single(const ManifestRecord& s, InferMode mode) {
        InferenceRecord r;
        r.sample_id = s.sample_id;
        r.mode = mode;
        r.path = mode == InferMode::none ? GatePath::fast : GatePath::deep;
        const ReasoningMode grammar = grammar_of(mode);

        detail::Stopwatch sw;
        const Generation g = call_generate(request(s, grammar));
        r.transcript = g.text;
        r.generated_tokens = g.completion_tokens;
        try {
            r.final_verdict = parse_mode(g.text, grammar).answer();
        } catch (const ParseError& e) {
            r.final_verdict = lenient_answer(g.text, grammar);
            r.error = std::string("malformed transcript: ") + e.what();
        }
        if (cfg_.timing) r.timing = PhaseTiming{sw.ms(), 0.0};
        return r;
    }

    InferenceRecord failed(const ManifestRecord& s, int attempts, std::string why) const {
        InferenceRecord r;
        r.sample_id = s.sample_id;
        r.mode = cfg_.mode;
        r.attempts = attempts;
        r.error = std::move(why);
        return r;
    }

    ModelClient& client_;
    InferenceConfig cfg_;
    TemplateStore templates_;
    std::mutex serial_;
};

inline InferenceRecord infer_adaptive(const ManifestRecord& sample, ModelClient& client, const GateConfig& gate_cfg,
                                      const TemplateStore& templates = {}) {
    InferenceConfig cfg;
    cfg.gate = gate_cfg;
    cfg.mode = InferMode::adaptive;
    return InferenceController(client, cfg, templates).infer(sample);
}

inline InferenceRecord infer_fixed(const ManifestRecord& sample, ModelClient& client, InferMode mode,
                                   const GateConfig& gate_cfg = {}, const TemplateStore& templates = {}) {
    InferenceConfig cfg;
    cfg.gate = gate_cfg;
    cfg.mode = mode;
    return InferenceController(client, cfg, templates).infer(sample);
}

inline std::vector<InferenceRecord> batch_infer(const std::vector<ManifestRecord>& manifest, ModelClient& client,
                                                const InferenceConfig& cfg, const TemplateStore& templates = {}) {
    return InferenceController(client, cfg, templates).batch(manifest);
}

} // namespace har
