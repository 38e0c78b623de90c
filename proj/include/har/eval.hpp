#pragma once

#include "har/confidence_gate.hpp"
#include "har/errors.hpp"
#include "har/json_util.hpp"
#include "har/manifest.hpp"
#include "har/records.hpp"

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace har {

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    friend bool operator==(const Confusion&, const Confusion&) = default;
};

// Positive class is fake.
inline void tally(Confusion& c, Verdict predicted, Verdict truth) noexcept {
    if (truth == Verdict::fake) (predicted == Verdict::fake ? c.tp : c.fn) += 1;
    else (predicted == Verdict::fake ? c.fp : c.tn) += 1;
}

struct MetricsRow {
    std::string group;
    Confusion counts;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    bool precision_undefined = false;  // TP+FP == 0, reported as 0
    bool recall_undefined = false;     // TP+FN == 0, reported as 0
    std::size_t deep = 0;
    double deep_rate = 0.0;
    double mean_generated_tokens = 0.0;
    std::size_t unanswered = 0;  // records without a verdict, counted as wrong
};

enum class GroupBy { split, source, none };

inline const char* to_string(GroupBy g) noexcept {
    return g == GroupBy::split ? "split" : g == GroupBy::source ? "source" : "none";
}

inline std::optional<GroupBy> try_parse_group_by(std::string_view s) {
    if (s == "split") return GroupBy::split;
    if (s == "source") return GroupBy::source;
    if (s == "none") return GroupBy::none;
    return std::nullopt;
}

struct EvalReport {
    GroupBy group_by = GroupBy::split;
    std::vector<MetricsRow> rows;  // per group, stable order
    MetricsRow overall;            // group "all"
    std::optional<double> pattern_mean;
    std::vector<std::string> warnings;
};

struct MetricsOptions {
    GroupBy group_by = GroupBy::split;
    std::vector<Split> mean_splits{pattern_splits.begin(), pattern_splits.end()};
};

namespace detail {

struct Accum {
    Confusion c;
    std::size_t deep = 0, tokens = 0, unanswered = 0;
};

inline MetricsRow finish(std::string group, const Accum& a) {
    MetricsRow r;
    r.group = std::move(group);
    r.counts = a.c;
    const double n = static_cast<double>(a.c.total());
    r.accuracy = n > 0 ? static_cast<double>(a.c.tp + a.c.tn) / n : 0.0;
    r.precision_undefined = a.c.tp + a.c.fp == 0;
    r.precision = r.precision_undefined ? 0.0 : static_cast<double>(a.c.tp) / static_cast<double>(a.c.tp + a.c.fp);
    r.recall_undefined = a.c.tp + a.c.fn == 0;
    r.recall = r.recall_undefined ? 0.0 : static_cast<double>(a.c.tp) / static_cast<double>(a.c.tp + a.c.fn);
    r.deep = a.deep;
    r.deep_rate = n > 0 ? static_cast<double>(a.deep) / n : 0.0;
    r.mean_generated_tokens = n > 0 ? static_cast<double>(a.tokens) / n : 0.0;
    r.unanswered = a.unanswered;
    return r;
}

} // namespace detail

inline EvalReport compute_metrics(const std::vector<InferenceRecord>& records,
                                  const std::vector<ManifestRecord>& manifest, const MetricsOptions& opt = {}) {
    const ManifestIndex idx = index_manifest(manifest);
    EvalReport rep;
    rep.group_by = opt.group_by;

    std::map<std::string, detail::Accum> by_source;
    std::map<Split, detail::Accum> by_split;
    detail::Accum all;
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        auto it = idx.find(r.sample_id);
        if (it == idx.end()) throw UnknownSampleError(r.sample_id);
        if (!seen.insert(r.sample_id).second) throw ValidationError("duplicate inference record for '" + r.sample_id + "'");
        const ManifestRecord& m = *it->second;
        const Verdict predicted = r.final_verdict.value_or(flip(m.label));
        for (detail::Accum* a : {&all, &by_split[m.split], &by_source[m.source]}) {
            tally(a->c, predicted, m.label);
            a->deep += r.path == GatePath::deep;
            a->tokens += r.generated_tokens;
            a->unanswered += !r.final_verdict;
        }
    }

    if (opt.group_by == GroupBy::split) {
        std::set<Split> in_manifest;
        for (const auto& m : manifest) in_manifest.insert(m.split);
        for (Split s : all_splits) {
            if (!in_manifest.count(s)) continue;
            auto it = by_split.find(s);
            if (it == by_split.end()) {
                rep.warnings.push_back("split " + std::string(to_string(s)) + " has no records; omitted");
                continue;
            }
            rep.rows.push_back(detail::finish(std::string(to_string(s)), it->second));
        }
    } else if (opt.group_by == GroupBy::source) {
        for (const auto& [src, a] : by_source) rep.rows.push_back(detail::finish(src, a));
    }
    rep.overall = detail::finish("all", all);

    double sum = 0.0;
    std::size_t present = 0;
    for (Split s : opt.mean_splits) {
        auto it = by_split.find(s);
        if (it == by_split.end()) continue;
        sum += detail::finish("", it->second).accuracy;
        ++present;
    }
    if (present) {
        rep.pattern_mean = sum / static_cast<double>(present);
        if (present < opt.mean_splits.size())
            rep.warnings.push_back("pattern mean over " + std::to_string(present) + " of " +
                                   std::to_string(opt.mean_splits.size()) + " splits");
    }
    return rep;
}

// ---- tau sweep ----

struct DualRecord {
    std::string sample_id;
    double p_fake = 0.5;
    Verdict fast_verdict = Verdict::real;
    std::optional<Verdict> deep_verdict;
};

struct SweepPoint {
    double tau = 0.0;
    double accuracy = 0.0;
    double deep_rate = 0.0;
};

inline std::vector<SweepPoint> sweep_tau(const std::vector<DualRecord>& duals, const std::vector<ManifestRecord>& manifest,
                                         const std::vector<double>& taus) {
    const ManifestIndex idx = index_manifest(manifest);
    std::vector<Verdict> truth;
    truth.reserve(duals.size());
    for (const auto& d : duals) {
        if (!d.deep_verdict) throw MissingDeepVerdictError(d.sample_id);
        auto it = idx.find(d.sample_id);
        if (it == idx.end()) throw UnknownSampleError(d.sample_id);
        truth.push_back(it->second->label);
    }
    std::vector<SweepPoint> out;
    out.reserve(taus.size());
    for (double tau : taus) {
        if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("tau outside [0,1]");
        std::size_t correct = 0, deep = 0;
        for (std::size_t i = 0; i < duals.size(); ++i) {
            const bool go_deep = binary_entropy(duals[i].p_fake) > tau;
            deep += go_deep;
            correct += (go_deep ? *duals[i].deep_verdict : duals[i].fast_verdict) == truth[i];
        }
        const double n = static_cast<double>(duals.size());
        out.push_back({tau, n > 0 ? correct / n : 0.0, n > 0 ? deep / n : 0.0});
    }
    return out;
}

// Deep-only inference records already carry p_fake, the gated fast verdict and the deep answer.
inline DualRecord dual_from_inference(const InferenceRecord& r) {
    if (!r.impression_p_fake || !r.fast_verdict)
        throw ValidationError("record '" + r.sample_id + "' has no impression distribution");
    if (r.path != GatePath::deep || r.flagged()) return {r.sample_id, *r.impression_p_fake, *r.fast_verdict, std::nullopt};
    return {r.sample_id, *r.impression_p_fake, *r.fast_verdict, r.final_verdict};
}

inline DualRecord dual_from_json(const jsonl::json& j, std::size_t line) {
    // Either an explicit dual record or a deep-mode inference record.
    if (j.contains("p_fake")) {
        DualRecord d;
        d.sample_id = detail::req_string(j, "sample_id", line);
        auto p = detail::opt_number(j, "p_fake", line);
        if (!p || !(*p >= 0.0 && *p <= 1.0)) throw SchemaError(line, "p_fake", "expected probability");
        d.p_fake = *p;
        auto fv = detail::opt_verdict(j, "fast_verdict", line);
        if (!fv) throw SchemaError(line, "fast_verdict", "missing");
        d.fast_verdict = *fv;
        d.deep_verdict = detail::opt_verdict(j, "deep_verdict", line);
        return d;
    }
    try {
        return dual_from_inference(inference_record_from_json(j, line));
    } catch (const ValidationError& e) {
        throw SchemaError(line, "impression_p_fake", e.what());
    }
}

inline std::vector<DualRecord> read_dual_records(const std::string& path) {
    std::vector<DualRecord> out;
    for (const auto& l : jsonl::read(path)) out.push_back(dual_from_json(l.value, l.number));
    return out;
}

// "start:end:step" (inclusive within 1e-9) or "a,b,c".
inline std::vector<double> parse_tau_grid(const std::string& spec) {
    auto num = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            throw ConfigError("bad tau grid '" + spec + "'");
        }
        if (used != s.size() || !std::isfinite(v)) throw ConfigError("bad tau grid '" + spec + "'");
        return v;
    };
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw ConfigError("tau grid must be start:end:step");
        const double a = num(parts[0]), b = num(parts[1]), step = num(parts[2]);
        if (!(step > 0.0) || b < a) throw ConfigError("tau grid needs step > 0 and end >= start");
        for (std::size_t i = 0;; ++i) {
            double t = a + static_cast<double>(i) * step;
            if (t > b + 1e-9) break;
            if (std::fabs(t - b) <= 1e-9) t = b;
            out.push_back(t);
            if (i > 10'000'000) throw ConfigError("tau grid too large");
        }
    } else {
        std::stringstream ss(spec);
        for (std::string p; std::getline(ss, p, ',');) out.push_back(num(p));
    }
    for (double t : out)
        if (t < 0.0 || t > 1.0) throw ConfigError("tau values must lie in [0,1]");
    if (out.empty()) throw ConfigError("empty tau grid");
    return out;
}

inline jsonl::json to_json(const SweepPoint& p) {
    return {{"tau", jsonl::round9(p.tau)}, {"accuracy", jsonl::round9(p.accuracy)}, {"deep_rate", jsonl::round9(p.deep_rate)}};
}

// ---- report emission ----

enum class ReportFormat { table, jsonl };

inline jsonl::json to_json(const MetricsRow& r) {
    using jsonl::round9;
    return {{"group", r.group},
            {"n", r.counts.total()},
            {"tp", r.counts.tp},
            {"fp", r.counts.fp},
            {"tn", r.counts.tn},
            {"fn", r.counts.fn},
            {"accuracy", round9(r.accuracy)},
            {"precision", round9(r.precision)},
            {"recall", round9(r.recall)},
            {"precision_undefined", r.precision_undefined},
            {"recall_undefined", r.recall_undefined},
            {"deep", r.deep},
            {"deep_rate", round9(r.deep_rate)},
            {"mean_generated_tokens", round9(r.mean_generated_tokens)},
            {"unanswered", r.unanswered}};
}

inline MetricsRow metrics_row_from_json(const jsonl::json& j) {
    MetricsRow r;
    r.group = j.at("group").get<std::string>();
    r.counts = {j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(), j.at("tn").get<std::size_t>(),
                j.at("fn").get<std::size_t>()};
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.precision_undefined = j.at("precision_undefined").get<bool>();
    r.recall_undefined = j.at("recall_undefined").get<bool>();
    r.deep = j.at("deep").get<std::size_t>();
    r.deep_rate = j.at("deep_rate").get<double>();
    r.mean_generated_tokens = j.at("mean_generated_tokens").get<double>();
    r.unanswered = j.at("unanswered").get<std::size_t>();
    return r;
}

inline std::string emit_table(const EvalReport& rep) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s %7s %8s %8s %8s %6s %6s %6s %6s %9s %11s\n", "group", "n", "ACC", "P", "R",
                  "TP", "FP", "TN", "FN", "deep_rate", "mean_tokens");
    out += buf;
    if (rep.rows.empty() && rep.overall.counts.total() == 0) return out;

    bool undefined = false;
    auto row = [&](const MetricsRow& r) {
        auto cell = [](double v, bool undef) {
            char c[32];
            std::snprintf(c, sizeof c, "%.4f%s", v, undef ? "*" : "");
            return std::string(c);
        };
        undefined |= r.precision_undefined || r.recall_undefined;
        std::snprintf(buf, sizeof buf, "%-12s %7zu %8.4f %8s %8s %6zu %6zu %6zu %6zu %9.4f %11.2f\n",
                      r.group.c_str(), r.counts.total(), r.accuracy, cell(r.precision, r.precision_undefined).c_str(),
                      cell(r.recall, r.recall_undefined).c_str(), r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn,
                      r.deep_rate, r.mean_generated_tokens);
        out += buf;
    };
    for (const auto& r : rep.rows) row(r);
    row(rep.overall);
    if (rep.pattern_mean) {
        std::snprintf(buf, sizeof buf, "pattern mean ACC: %.4f\n", *rep.pattern_mean);
        out += buf;
    }
    if (undefined) out += "* undefined (no predicted or no actual fakes), reported as 0\n";
    return out;
}

inline std::string emit_jsonl(const EvalReport& rep) {
    std::string out;
    for (const auto& r : rep.rows) out += jsonl::dump(to_json(r)) + "\n";
    out += jsonl::dump(to_json(rep.overall)) + "\n";
    jsonl::json s{{"summary", true},
                  {"group_by", to_string(rep.group_by)},
                  {"pattern_mean", rep.pattern_mean ? jsonl::json(jsonl::round9(*rep.pattern_mean)) : jsonl::json(nullptr)},
                  {"warnings", rep.warnings}};
    out += jsonl::dump(s) + "\n";
    return out;
}

inline std::string emit_report(const EvalReport& rep, ReportFormat fmt) {
    return fmt == ReportFormat::table ? emit_table(rep) : emit_jsonl(rep);
}

inline EvalReport parse_report_jsonl(const std::string& content) {
    EvalReport rep;
    std::vector<MetricsRow> rows;
    bool have_summary = false;
    for (const auto& l : jsonl::parse(content)) {
        const auto& j = l.value;
        if (j.contains("summary")) {
            auto g = try_parse_group_by(j.at("group_by").get<std::string>());
            if (!g) throw SchemaError(l.number, "group_by", "unknown");
            rep.group_by = *g;
            if (!j.at("pattern_mean").is_null()) rep.pattern_mean = j.at("pattern_mean").get<double>();
            rep.warnings = j.at("warnings").get<std::vector<std::string>>();
            have_summary = true;
        } else {
            rows.push_back(metrics_row_from_json(j));
        }
    }
    if (!have_summary || rows.empty() || rows.back().group != "all")
        throw SchemaError(0, "summary", "report must end with an 'all' row and a summary line");
    rep.overall = rows.back();
    rows.pop_back();
    rep.rows = std::move(rows);
    return rep;
}

} // namespace har
