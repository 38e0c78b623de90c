#pragma once

#include "har/errors.hpp"
#include "har/json_util.hpp"
#include "har/records.hpp"

#include <cstddef>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace har {

inline ManifestRecord manifest_record_from_json(const jsonl::json& j, std::size_t line) {
    static const std::set<std::string> allowed{"sample_id", "label", "split", "source", "image_ref",
                                               "prompt_override"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw SchemaError(line, it.key(), "unknown field");

    ManifestRecord r;
    r.sample_id = detail::req_string(j, "sample_id", line);
    if (r.sample_id.empty()) throw SchemaError(line, "sample_id", "empty");

    const std::string label = detail::req_string(j, "label", line);
    if (label == "real") r.label = Verdict::real;
    else if (label == "fake") r.label = Verdict::fake;
    else throw SchemaError(line, "label", "expected \"real\" or \"fake\", got \"" + label + "\"");

    const std::string split = detail::req_string(j, "split", line);
    auto sp = try_parse_split(split);
    if (!sp) throw SchemaError(line, "split", "unknown split \"" + split + "\"");
    r.split = *sp;

    r.source = detail::req_string(j, "source", line);
    r.image_ref = detail::req_string(j, "image_ref", line);
    if (auto it = j.find("prompt_override"); it != j.end() && !it->is_null()) {
        if (!it->is_string()) throw SchemaError(line, "prompt_override", "expected string");
        r.prompt_override = it->get<std::string>();
    }
    return r;
}

inline std::vector<ManifestRecord> parse_manifest(const std::string& content) {
    std::vector<ManifestRecord> out;
    std::unordered_set<std::string> seen;
    for (const auto& l : jsonl::parse(content)) {
        ManifestRecord r = manifest_record_from_json(l.value, l.number);
        if (!seen.insert(r.sample_id).second) throw DuplicateIdError(r.sample_id, l.number);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<ManifestRecord> load_manifest(const std::string& path) {
    return parse_manifest(jsonl::read_file(path));
}

inline std::string manifest_jsonl(const std::vector<ManifestRecord>& m) {
    std::string out;
    for (const auto& r : m) out += jsonl::dump(to_json(r)) + "\n";
    return out;
}

using ManifestIndex = std::unordered_map<std::string, const ManifestRecord*>;

inline ManifestIndex index_manifest(const std::vector<ManifestRecord>& m) {
    ManifestIndex idx;
    idx.reserve(m.size());
    for (const auto& r : m) idx.emplace(r.sample_id, &r);
    return idx;
}

// Warnings only: the in-distribution test split is expected to be balanced.
inline std::vector<std::string> lint_manifest(const std::vector<ManifestRecord>& m) {
    std::size_t real = 0, fake = 0;
    for (const auto& r : m) {
        if (r.split != Split::id_test) continue;
        (r.label == Verdict::fake ? fake : real) += 1;
    }
    std::vector<std::string> warnings;
    if (real != fake)
        warnings.push_back("id_test is not 1:1 real:fake (" + std::to_string(real) + " real, " +
                           std::to_string(fake) + " fake)");
    return warnings;
}

} // namespace har
