#pragma once

#include "har/confidence_gate.hpp"
#include "har/errors.hpp"
#include "har/json_util.hpp"
#include "har/reward.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace har {

struct RunConfig {
    std::string endpoint;
    std::string model;
    std::string api_key;
    double temperature = 0.3;
    int max_tokens = 4092;
    double tau = 0.96;
    double fake_threshold = 0.58;
    std::size_t parallelism = 1;
    std::uint64_t seed = 42;
    RewardConfig reward;

    GateConfig gate() const { return {tau, fake_threshold}; }

    void validate() const {
        if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
        if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
        if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
        try {
            gate().validate();
            reward.validate();
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
    }
};

// Environment variable -> config key.
inline const std::vector<std::pair<const char*, const char*>>& env_bindings() {
    static const std::vector<std::pair<const char*, const char*>> b{
        {"HAR_ENDPOINT", "endpoint"},       {"HAR_MODEL", "model"},
        {"HAR_API_KEY", "api_key"},         {"HAR_TEMPERATURE", "temperature"},
        {"HAR_MAX_TOKENS", "max_tokens"},   {"HAR_TAU", "tau"},
        {"HAR_FAKE_THRESHOLD", "fake_threshold"}, {"HAR_PARALLELISM", "parallelism"},
        {"HAR_SEED", "seed"}};
    return b;
}

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

inline std::optional<std::string> process_env(const char* name) {
    const char* v = std::getenv(name);
    return v ? std::optional<std::string>(v) : std::nullopt;
}

namespace detail {

inline double to_number(const jsonl::json& v, const std::string& key, const std::string& layer) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        std::size_t used = 0;
        try {
            const double d = std::stod(s, &used);
            if (used == s.size()) return d;
        } catch (const std::exception&) {
        }
    }
    throw ConfigError(layer + ": '" + key + "' must be a number");
}

inline std::string to_str(const jsonl::json& v, const std::string& key, const std::string& layer) {
    if (!v.is_string()) throw ConfigError(layer + ": '" + key + "' must be a string");
    return v.get<std::string>();
}

inline bool to_bool(const jsonl::json& v, const std::string& key, const std::string& layer) {
    if (v.is_boolean()) return v.get<bool>();
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(layer + ": '" + key + "' must be a boolean");
}

inline std::uint64_t to_count(const jsonl::json& v, const std::string& key, const std::string& layer) {
    const double d = to_number(v, key, layer);
    if (!(d >= 0.0) || d != std::floor(d) || d > 9.007199254740992e15)
        throw ConfigError(layer + ": '" + key + "' must be a non-negative integer");
    return static_cast<std::uint64_t>(d);
}

} // namespace detail

// Applies one layer on top of cfg. Later layers win.
inline void apply_layer(RunConfig& cfg, const jsonl::json& layer, const std::string& name, bool allow_api_key = true) {
    if (!layer.is_object()) throw ConfigError(name + ": expected a JSON object");
    using namespace detail;
    for (auto it = layer.begin(); it != layer.end(); ++it) {
        const std::string& k = it.key();
        const auto& v = it.value();
        if (k == "endpoint") cfg.endpoint = to_str(v, k, name);
        else if (k == "model") cfg.model = to_str(v, k, name);
        else if (k == "api_key") {
            if (!allow_api_key) throw ConfigError(name + ": api_key may only come from the config file or HAR_API_KEY");
            cfg.api_key = to_str(v, k, name);
        } else if (k == "temperature") cfg.temperature = to_number(v, k, name);
        else if (k == "max_tokens") cfg.max_tokens = static_cast<int>(to_count(v, k, name));
        else if (k == "tau") cfg.tau = to_number(v, k, name);
        else if (k == "fake_threshold") cfg.fake_threshold = to_number(v, k, name);
        else if (k == "parallelism") cfg.parallelism = to_count(v, k, name);
        else if (k == "seed") cfg.seed = to_count(v, k, name);
        else if (k == "reward") {
            if (!v.is_object()) throw ConfigError(name + ": 'reward' must be an object");
            for (auto r = v.begin(); r != v.end(); ++r) {
                const std::string rk = "reward." + r.key();
                if (r.key() == "expected_length_tokens") cfg.reward.expected_length_tokens = to_count(*r, rk, name);
                else if (r.key() == "ngram_size") cfg.reward.ngram_size = to_count(*r, rk, name);
                else if (r.key() == "repetition_scale") cfg.reward.repetition_scale = to_number(*r, rk, name);
                else if (r.key() == "length_clamp") cfg.reward.length_clamp = to_bool(*r, rk, name);
                else if (r.key() == "rep_scope") {
                    const std::string s = to_str(*r, rk, name);
                    if (s == "full_transcript") cfg.reward.rep_scope = RepetitionScope::full_transcript;
                    else if (s == "reasoning_bodies") cfg.reward.rep_scope = RepetitionScope::reasoning_bodies;
                    else throw ConfigError(name + ": unknown rep_scope '" + s + "'");
                } else throw ConfigError(name + ": unknown key '" + rk + "'");
            }
        } else {
            throw ConfigError(name + ": unknown key '" + k + "'");
        }
    }
}

inline jsonl::json env_layer(const EnvLookup& env) {
    jsonl::json j = jsonl::json::object();
    for (const auto& [var, key] : env_bindings())
        if (auto v = env(var)) j[key] = *v;
    return j;
}

// defaults <- config file <- environment <- flags. Flags can never carry the API key.
inline RunConfig resolve_config(const std::optional<jsonl::json>& file_layer, const EnvLookup& env,
                                const jsonl::json& flag_layer) {
    RunConfig cfg;
    if (file_layer) apply_layer(cfg, *file_layer, "config file");
    apply_layer(cfg, env_layer(env), "environment");
    apply_layer(cfg, flag_layer, "flags", false);
    cfg.validate();
    return cfg;
}

inline jsonl::json read_config_file(const std::string& path) {
    try {
        return jsonl::json::parse(jsonl::read_file(path));
    } catch (const jsonl::json::parse_error& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
}

} // namespace har
