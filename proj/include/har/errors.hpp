#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace har {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : Error {
    using Error::Error;
};

struct NonFiniteError : Error {
    double value;
    explicit NonFiniteError(double v, const std::string& what_arg = "non-finite value")
        : Error(what_arg), value(v) {}
};

enum class ParseErrorKind {
    MissingTag,
    DuplicateTag,
    OutOfOrder,
    UnclosedTag,
    BadVerdict,
    EmptySegment,
    StrayContent,
    TrailingContent,
    UnsupportedMode,
};

inline const char* to_string(ParseErrorKind k) {
    switch (k) {
    case ParseErrorKind::MissingTag: return "MissingTag";
    case ParseErrorKind::DuplicateTag: return "DuplicateTag";
    case ParseErrorKind::OutOfOrder: return "OutOfOrder";
    case ParseErrorKind::UnclosedTag: return "UnclosedTag";
    case ParseErrorKind::BadVerdict: return "BadVerdict";
    case ParseErrorKind::EmptySegment: return "EmptySegment";
    case ParseErrorKind::StrayContent: return "StrayContent";
    case ParseErrorKind::TrailingContent: return "TrailingContent";
    case ParseErrorKind::UnsupportedMode: return "UnsupportedMode";
    }
    return "Unknown";
}

struct ParseError : Error {
    ParseErrorKind kind;
    std::string segment;  // tag name involved, empty if none
    std::string token;    // offending verdict token for BadVerdict
    std::size_t offset;   // byte offset into the source where the problem was noticed

    ParseError(ParseErrorKind k, std::string seg, std::size_t off, std::string tok = {})
        : Error(describe(k, seg, tok, off)), kind(k), segment(std::move(seg)), token(std::move(tok)),
          offset(off) {}

private:
    static std::string describe(ParseErrorKind k, const std::string& seg, const std::string& tok,
                                std::size_t off) {
        std::string s = to_string(k);
        if (!seg.empty()) s += "(" + seg + (tok.empty() ? "" : ", \"" + tok + "\"") + ")";
        s += " at byte " + std::to_string(off);
        return s;
    }
};

struct MissingCandidateError : Error {
    std::string verdict;
    explicit MissingCandidateError(std::string v)
        : Error("missing log-probability candidate for " + v), verdict(std::move(v)) {}
};

struct EmptyGroupError : Error {
    EmptyGroupError() : Error("reward group is empty") {}
};

struct IoError : Error {
    using Error::Error;
};

struct SchemaError : Error {
    std::size_t line;
    std::string field;
    SchemaError(std::size_t ln, std::string fld, const std::string& detail)
        : Error("line " + std::to_string(ln) + ": field '" + fld + "': " + detail), line(ln),
          field(std::move(fld)) {}
};

struct DuplicateIdError : Error {
    std::string id;
    std::size_t line;
    DuplicateIdError(std::string i, std::size_t ln)
        : Error("line " + std::to_string(ln) + ": duplicate sample_id '" + i + "'"), id(std::move(i)),
          line(ln) {}
};

struct UnknownSampleError : Error {
    std::string id;
    explicit UnknownSampleError(std::string i)
        : Error("sample_id '" + i + "' not in manifest"), id(std::move(i)) {}
};

struct MissingDeepVerdictError : Error {
    std::string id;
    explicit MissingDeepVerdictError(std::string i)
        : Error("sample '" + i + "' has no deep verdict"), id(std::move(i)) {}
};

struct TemplateMissingError : Error {
    std::string name;
    explicit TemplateMissingError(std::string n)
        : Error("prompt template '" + n + "' not found"), name(std::move(n)) {}
};

struct ConversionError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct ExhaustedError : Error {
    std::string sample_id;
    int attempts;
    ExhaustedError(std::string id, int n)
        : Error("sample '" + id + "' rejected after " + std::to_string(n) + " attempts"),
          sample_id(std::move(id)), attempts(n) {}
};

// Transport failure talking to a model endpoint.
struct ClientError : Error {
    using Error::Error;
};

// Worth retrying: connection drops, 429, 5xx.
struct TransientError : ClientError {
    using ClientError::ClientError;
};

// Endpoint answered but not in the shape we need (e.g. no logprobs).
struct ProtocolError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

} // namespace har
