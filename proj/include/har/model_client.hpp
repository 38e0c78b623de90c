#pragma once

#include "har/prompt_templates.hpp"
#include "har/verdict.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace har {

struct TopCandidate {
    std::string token;
    double logprob = 0.0;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
    std::vector<TopCandidate> top;  // alternatives at this position, sampled token included
};

struct Generation {
    std::string text;
    std::vector<TokenLogprob> tokens;
    std::size_t completion_tokens = 0;
};

struct GenerationRequest {
    std::string sample_id;
    ReasoningMode mode = ReasoningMode::heuristic_to_analytic;
    Prompt prompt;
    std::vector<std::string> stop;
    int max_tokens = 4092;
    double temperature = 0.3;
    int top_logprobs = 5;
};

// Returned text excludes the matched stop sequence. Implementations throw
// TransientError for retryable transport failures, ClientError otherwise.
class ModelClient {
public:
    virtual ~ModelClient() = default;

    virtual Generation generate(const GenerationRequest& req) = 0;

    // Continue an assistant turn whose first bytes are fixed to committed_prefix.
    // The returned text is only the newly generated part.
    virtual Generation continue_generation(const GenerationRequest& req, std::string_view committed_prefix) = 0;

    // Log-probability that the assistant continues prefix with exactly `continuation`.
    // nullopt when the backend cannot score arbitrary continuations.
    virtual std::optional<double> score_continuation(const GenerationRequest& /*req*/, std::string_view /*prefix*/,
                                                     std::string_view /*continuation*/) {
        return std::nullopt;
    }

    // When false the controller issues at most one call at a time.
    virtual bool concurrent_safe() const { return true; }
};

} // namespace har
