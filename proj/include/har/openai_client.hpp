#pragma once

// Needs the har_http target (httplib with OpenSSL) for https endpoints.

#include "har/errors.hpp"
#include "har/inference.hpp"
#include "har/json_util.hpp"
#include "har/model_client.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace har {

struct OpenAiConfig {
    std::string endpoint;  // e.g. http://localhost:8000/v1
    std::string model;
    std::string api_key;   // from config file or environment only
    int timeout_seconds = 120;
};

class OpenAiClient final : public ModelClient {
public:
    explicit OpenAiClient(OpenAiConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.endpoint.empty()) throw ConfigError("endpoint URL is required");
        const auto scheme = cfg_.endpoint.find("://");
        if (scheme == std::string::npos) throw ConfigError("endpoint must include a scheme: " + cfg_.endpoint);
        const auto slash = cfg_.endpoint.find('/', scheme + 3);
        origin_ = cfg_.endpoint.substr(0, slash);
        base_path_ = slash == std::string::npos ? "" : cfg_.endpoint.substr(slash);
        while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
    }

    Generation generate(const GenerationRequest& req) override {
        return parse_generation(post(request_body(req, nullptr)), {});
    }

    Generation continue_generation(const GenerationRequest& req, std::string_view prefix) override {
        return parse_generation(post(request_body(req, &prefix)), prefix);
    }

    // One-token probe after an assistant prefill; reads the candidate from top_logprobs.
    std::optional<double> score_continuation(const GenerationRequest& req, std::string_view prefix,
                                             std::string_view continuation) override {
        GenerationRequest probe = req;
        probe.max_tokens = 1;
        probe.top_logprobs = 20;
        probe.stop.clear();
        nlohmann::json resp = post(request_body(probe, &prefix));
        const Generation g = parse_generation(resp, prefix);
        if (g.tokens.empty()) return std::nullopt;
        const std::string want = text::to_lower(text::trim(continuation));
        double acc = -std::numeric_limits<double>::infinity();
        bool found = false;
        for (const auto& c : g.tokens.front().top) {
            const std::string t = text::to_lower(text::trim(c.token));
            if (t.empty() || want.compare(0, t.size(), t) != 0) continue;
            acc = detail::log_add(acc, c.logprob);
            found = true;
        }
        return found ? std::optional<double>(acc) : std::nullopt;
    }

    // Public for tests: the exact JSON body sent for a request.
    nlohmann::json request_body(const GenerationRequest& req, const std::string_view* prefill) const {
        nlohmann::json body;
        body["model"] = cfg_.model;
        nlohmann::json messages = nlohmann::json::array();
        messages.push_back({{"role", "user"}, {"content", user_content(req.prompt)}});
        if (prefill) {
            messages.push_back({{"role", "assistant"}, {"content", std::string(*prefill)}});
            body["continue_final_message"] = true;
            body["add_generation_prompt"] = false;
        }
        body["messages"] = std::move(messages);
        body["temperature"] = req.temperature;
        body["max_tokens"] = req.max_tokens;
        if (!req.stop.empty()) body["stop"] = req.stop;
        body["logprobs"] = true;
        body["top_logprobs"] = req.top_logprobs;
        return body;
    }

private:
    static nlohmann::json user_content(const Prompt& p) {
        if (p.image_ref.empty()) return p.text;
        nlohmann::json parts = nlohmann::json::array();
        auto text_part = [&](std::string_view t) {
            if (!t.empty()) parts.push_back({{"type", "text"}, {"text", std::string(t)}});
        };
        auto image_part = [&] { parts.push_back({{"type", "image_url"}, {"image_url", {{"url", p.image_ref}}}}); };
        constexpr std::string_view marker = "<image>";
        const std::size_t at = p.text.find(marker);
        if (at == std::string::npos) {
            image_part();
            text_part(p.text);
        } else {
            text_part(std::string_view(p.text).substr(0, at));
            image_part();
            text_part(std::string_view(p.text).substr(at + marker.size()));
        }
        return parts;
    }

    nlohmann::json post(const nlohmann::json& body) const {
        httplib::Client cli(origin_);
        cli.set_connection_timeout(cfg_.timeout_seconds, 0);
        cli.set_read_timeout(cfg_.timeout_seconds, 0);
        cli.set_write_timeout(cfg_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        auto res = cli.Post(base_path_ + "/chat/completions", headers, body.dump(), "application/json");
        if (!res) throw TransientError("request to " + origin_ + " failed: " + httplib::to_string(res.error()));
        if (res->status == 429 || res->status >= 500)
            throw TransientError("endpoint returned HTTP " + std::to_string(res->status));
        if (res->status != 200)
            throw ClientError("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
        try {
            return nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("response is not JSON: ") + e.what());
        }
    }

    static Generation parse_generation(const nlohmann::json& resp, std::string_view prefix) {
        try {
            const auto& choice = resp.at("choices").at(0);
            Generation g;
            const auto& content = choice.at("message").at("content");
            g.text = content.is_null() ? std::string() : content.get<std::string>();
            // Some servers echo the prefill; keep only the new part.
            if (!prefix.empty() && text::starts_with(g.text, prefix)) g.text.erase(0, prefix.size());
            if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
                if (auto c = lp->find("content"); c != lp->end() && c->is_array()) {
                    for (const auto& t : *c) {
                        TokenLogprob tok{t.at("token").get<std::string>(), t.at("logprob").get<double>(), {}};
                        if (auto top = t.find("top_logprobs"); top != t.end() && top->is_array())
                            for (const auto& alt : *top)
                                tok.top.push_back({alt.at("token").get<std::string>(), alt.at("logprob").get<double>()});
                        g.tokens.push_back(std::move(tok));
                    }
                }
            }
            g.completion_tokens = g.tokens.size();
            if (auto u = resp.find("usage"); u != resp.end() && u->is_object())
                if (auto ct = u->find("completion_tokens"); ct != u->end() && ct->is_number_integer())
                    g.completion_tokens = ct->get<std::size_t>();
            return g;
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("unexpected chat-completions response: ") + e.what());
        }
    }

    OpenAiConfig cfg_;
    std::string origin_;
    std::string base_path_;
};

} // namespace har
