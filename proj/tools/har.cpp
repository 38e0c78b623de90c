#include "har/har.hpp"
#include "har/openai_client.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

using har::jsonl::json;

enum Exit { ok = 0, config_error = 1, partial = 2 };

struct Common {
    std::string config_path;
    std::optional<std::string> endpoint, model;
    std::optional<double> temperature, tau, fake_threshold;
    std::optional<int> max_tokens;
    std::optional<std::size_t> parallelism;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> expected_length, ngram;
    std::optional<double> rep_scale;
    bool no_length_clamp = false;
    std::optional<std::string> rep_scope;

    har::RunConfig resolve() const {
        std::optional<json> file;
        if (!config_path.empty()) file = har::read_config_file(config_path);
        json flags = json::object();
        if (endpoint) flags["endpoint"] = *endpoint;
        if (model) flags["model"] = *model;
        if (temperature) flags["temperature"] = *temperature;
        if (tau) flags["tau"] = *tau;
        if (fake_threshold) flags["fake_threshold"] = *fake_threshold;
        if (max_tokens) flags["max_tokens"] = *max_tokens;
        if (parallelism) flags["parallelism"] = *parallelism;
        if (seed) flags["seed"] = *seed;
        json reward = json::object();
        if (expected_length) reward["expected_length_tokens"] = *expected_length;
        if (ngram) reward["ngram_size"] = *ngram;
        if (rep_scale) reward["repetition_scale"] = *rep_scale;
        if (no_length_clamp) reward["length_clamp"] = false;
        if (rep_scope) reward["rep_scope"] = *rep_scope;
        if (!reward.empty()) flags["reward"] = reward;
        return har::resolve_config(file, har::process_env, flags);
    }
};

void add_gate_flags(CLI::App* c, Common& k) {
    c->add_option("--tau", k.tau, "Entropy threshold in bits");
    c->add_option("--fake-threshold", k.fake_threshold, "p_fake cut for the fast verdict");
}

void add_reward_flags(CLI::App* c, Common& k) {
    c->add_option("--expected-length", k.expected_length, "Length reward soft cap (tokens)");
    c->add_option("--ngram", k.ngram, "Repetition window size");
    c->add_option("--rep-scale", k.rep_scale, "Repetition penalty divisor");
    c->add_flag("--no-length-clamp", k.no_length_clamp, "Use the raw oscillating length formula");
    c->add_option("--rep-scope", k.rep_scope, "full_transcript | reasoning_bodies");
}

har::TemplateStore templates(const std::string& dir) {
    return dir.empty() ? har::TemplateStore{} : har::TemplateStore{dir};
}

json breakdown_json(const std::string& id, const har::RewardBreakdown& b) {
    using har::jsonl::round9;
    return {{"sample_id", id},        {"acc", round9(b.acc)}, {"conf", round9(b.conf)},
            {"len", round9(b.len)},   {"rep", round9(b.rep)}, {"fmt", round9(b.fmt)},
            {"total", round9(b.total)}, {"length_tokens", b.length_tokens}};
}

// ---- infer ----
struct InferArgs {
    std::string manifest, mock, out, mode = "adaptive", template_dir;
    bool no_timing = false;
    int max_attempts = 3;
    int retry_delay_ms = 200;
};

int cmd_infer(const Common& k, const InferArgs& a) {
    const har::RunConfig cfg = k.resolve();
    auto mode = har::try_parse_infer_mode(a.mode);
    if (!mode) throw har::ConfigError("unknown --mode '" + a.mode + "'");
    const auto manifest = har::load_manifest(a.manifest);
    for (const auto& w : har::lint_manifest(manifest)) std::cerr << "warning: " << w << "\n";

    std::unique_ptr<har::ModelClient> client;
    if (!a.mock.empty()) {
        client = std::make_unique<har::MockModel>(har::load_mock_scripts(a.mock));
    } else {
        if (cfg.endpoint.empty()) throw har::ConfigError("no model: pass --mock or configure an endpoint");
        client = std::make_unique<har::OpenAiClient>(har::OpenAiConfig{cfg.endpoint, cfg.model, cfg.api_key});
    }

    har::InferenceConfig ic;
    ic.gate = cfg.gate();
    ic.mode = *mode;
    ic.max_tokens = cfg.max_tokens;
    ic.temperature = cfg.temperature;
    ic.parallelism = cfg.parallelism;
    ic.max_attempts = a.max_attempts;
    ic.backoff_base = std::chrono::milliseconds(a.retry_delay_ms);
    ic.timing = !a.no_timing;
    const auto records = har::batch_infer(manifest, *client, ic, templates(a.template_dir));

    har::jsonl::Writer w(a.out);
    std::size_t flagged = 0;
    for (const auto& r : records) {
        w.line(har::to_json(r));
        if (r.flagged()) {
            ++flagged;
            std::cerr << "sample " << r.sample_id << ": " << *r.error << "\n";
        }
    }
    if (flagged) std::cerr << flagged << " of " << records.size() << " samples flagged\n";
    return flagged ? partial : ok;
}

// ---- score ----
int cmd_score(const Common& k, const std::string& responses, const std::string& manifest_path, const std::string& out) {
    const har::RunConfig cfg = k.resolve();
    const auto manifest = har::load_manifest(manifest_path);
    const auto idx = har::index_manifest(manifest);
    const auto records = har::read_inference_records(responses);
    har::jsonl::Writer w(out);
    for (const auto& r : records) {
        auto it = idx.find(r.sample_id);
        if (it == idx.end()) throw har::UnknownSampleError(r.sample_id);
        const har::Verdict truth = it->second->label;
        // Without an impression distribution there is no confidence mass on the truth.
        const auto dist = r.impression_p_fake ? har::AnswerDistribution::from_p_fake(*r.impression_p_fake)
                                              : har::AnswerDistribution::from_p_fake(truth == har::Verdict::fake ? 0.0 : 1.0);
        const auto b = har::total_reward(r.transcript, har::grammar_of(r.mode), truth, dist, cfg.reward);
        w.line(breakdown_json(r.sample_id, b));
    }
    return ok;
}

// ---- eval ----
int cmd_eval(const std::string& responses, const std::string& manifest_path, const std::string& group_by,
             const std::string& format, const std::string& mean_splits, const std::string& out) {
    har::MetricsOptions opt;
    auto g = har::try_parse_group_by(group_by);
    if (!g) throw har::ConfigError("unknown --group-by '" + group_by + "'");
    opt.group_by = *g;
    if (format != "table" && format != "jsonl") throw har::ConfigError("unknown --format '" + format + "'");
    if (!mean_splits.empty()) {
        opt.mean_splits.clear();
        std::stringstream ss(mean_splits);
        for (std::string s; std::getline(ss, s, ',');) {
            auto sp = har::try_parse_split(s);
            if (!sp) throw har::ConfigError("unknown split '" + s + "' in --mean-splits");
            opt.mean_splits.push_back(*sp);
        }
    }
    const auto manifest = har::load_manifest(manifest_path);
    const auto report = har::compute_metrics(har::read_inference_records(responses), manifest, opt);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    har::jsonl::Writer w(out);
    w.raw(har::emit_report(report, format == "table" ? har::ReportFormat::table : har::ReportFormat::jsonl));
    return ok;
}

// ---- sweep-tau ----
int cmd_sweep(const std::string& dual, const std::string& manifest_path, const std::string& taus, const std::string& out) {
    const auto grid = har::parse_tau_grid(taus);
    const auto points = har::sweep_tau(har::read_dual_records(dual), har::load_manifest(manifest_path), grid);
    har::jsonl::Writer w(out);
    for (const auto& p : points) w.line(har::to_json(p));
    return ok;
}

// ---- grpo ----
struct GrpoArgs {
    std::size_t groups = 8, group_size = 4;
    std::string manifest, out = "-", norm = "std";
    double correct_rate = 0.5, malformed_rate = 0.1;
};

int cmd_grpo(const Common& k, const GrpoArgs& a) {
    const har::RunConfig cfg = k.resolve();
    har::GrpoConfig g;
    if (a.norm == "std") g.norm = har::AdvantageNorm::std_dev;
    else if (a.norm == "mean") g.norm = har::AdvantageNorm::mean_only;
    else throw har::ConfigError("unknown --norm '" + a.norm + "'");
    if (a.group_size < 1) throw har::ConfigError("--group-size must be at least 1");

    std::vector<std::pair<std::string, har::Verdict>> prompts;
    if (!a.manifest.empty()) {
        for (const auto& m : har::load_manifest(a.manifest)) prompts.emplace_back(m.sample_id, m.label);
    } else {
        for (std::size_t i = 0; i < a.groups; ++i) {
            char id[32];
            std::snprintf(id, sizeof id, "g%04zu", i);
            prompts.emplace_back(id, i % 2 ? har::Verdict::fake : har::Verdict::real);
        }
    }
    har::ScriptedPolicyOptions po;
    po.correct_rate = a.correct_rate;
    po.malformed_rate = a.malformed_rate;
    har::jsonl::Writer w(a.out);
    for (const auto& [id, truth] : prompts) {
        const har::PromptContext ctx{id, "", har::ReasoningMode::heuristic_to_analytic};
        const auto r = har::simulate_group(har::scripted_policy(truth, po), ctx, truth, a.group_size, cfg.seed,
                                           cfg.reward, g);
        json rewards = json::array(), adv = json::array();
        for (double x : r.group.rewards) rewards.push_back(har::jsonl::round9(x));
        for (double x : r.advantages.advantages) adv.push_back(har::jsonl::round9(x));
        w.line({{"group_id", id}, {"rewards", rewards}, {"advantages", adv}, {"seed", cfg.seed}});
    }
    return ok;
}

// ---- annotate ----
struct AnnotateArgs {
    int strategy = 2;
    double wrong_prop = 0.7;
    std::string manifest, responses, out = "-", template_dir, target = "har";
    int max_attempts = 5;
};

har::AnnotationStrategy strategy_of(int s) {
    if (s == 1) return har::AnnotationStrategy::two_turn;
    if (s == 2) return har::AnnotationStrategy::single_turn_simulated;
    throw har::ConfigError("--strategy must be 1 or 2");
}

int cmd_annotate_build(const Common& k, const AnnotateArgs& a) {
    const har::RunConfig cfg = k.resolve();
    const auto strategy = strategy_of(a.strategy);
    const auto store = templates(a.template_dir);
    const auto manifest = har::load_manifest(a.manifest);
    har::jsonl::Writer w(a.out);
    if (strategy == har::AnnotationStrategy::single_turn_simulated) {
        const auto plan = har::plan_impressions(manifest, a.wrong_prop, cfg.seed);
        for (std::size_t i = 0; i < manifest.size(); ++i) {
            const auto& m = manifest[i];
            const auto& p = plan.assignments[i];
            const auto prompt = har::build_strategy2_prompt(store, m.label, p.impression, m.image_ref);
            w.line({{"sample_id", m.sample_id},
                    {"strategy", std::string(har::to_string(strategy))},
                    {"label", std::string(har::to_string(m.label))},
                    {"impression", std::string(har::to_string(p.impression))},
                    {"image_ref", m.image_ref},
                    {"prompts", {prompt.text}}});
        }
        std::cerr << "wrong-impression rate " << plan.wrong_rate() << " over " << manifest.size() << " samples\n";
    } else {
        for (const auto& m : manifest) {
            const auto p = har::build_strategy1_prompts(store, m.label, m.image_ref);
            w.line({{"sample_id", m.sample_id},
                    {"strategy", std::string(har::to_string(strategy))},
                    {"label", std::string(har::to_string(m.label))},
                    {"image_ref", m.image_ref},
                    {"prompts", {p.round1.text, p.round2_text}}});
        }
    }
    return ok;
}

// Responses file: one line per attempt, {sample_id, response} for strategy 2 or
// {sample_id, round1, round2} for strategy 1, attempts in file order.
int cmd_annotate_validate(const AnnotateArgs& a) {
    const auto strategy = strategy_of(a.strategy);
    har::ReasoningMode grammar;
    if (a.target == "har") grammar = har::ReasoningMode::heuristic_to_analytic;
    else if (a.target == "gra") grammar = har::ReasoningMode::guess_reason_answer;
    else throw har::ConfigError("--target must be har or gra");
    const auto store = templates(a.template_dir);
    const auto manifest = har::load_manifest(a.manifest);
    const auto idx = har::index_manifest(manifest);

    std::map<std::string, std::vector<std::vector<std::string>>> attempts;
    std::vector<std::string> order;
    for (const auto& l : har::jsonl::read(a.responses)) {
        const std::string id = har::detail::req_string(l.value, "sample_id", l.number);
        if (!idx.count(id)) throw har::UnknownSampleError(id);
        std::vector<std::string> resp;
        if (strategy == har::AnnotationStrategy::single_turn_simulated) {
            resp.push_back(har::detail::req_string(l.value, "response", l.number));
        } else {
            resp.push_back(har::detail::req_string(l.value, "round1", l.number));
            resp.push_back(har::detail::req_string(l.value, "round2", l.number));
        }
        if (!attempts.count(id)) order.push_back(id);
        attempts[id].push_back(std::move(resp));
    }

    har::jsonl::Writer w(a.out);
    std::size_t rejected = 0;
    for (const auto& id : order) {
        const auto& tries = attempts[id];
        const auto& m = *idx.at(id);
        const int budget = std::min<int>(a.max_attempts, static_cast<int>(tries.size()));
        try {
            auto rec = har::rejection_loop(
                id, [&](int attempt) { return tries[static_cast<std::size_t>(attempt - 1)]; }, m.label, strategy,
                budget);
            const auto sft = har::to_sft_record(rec, grammar, store, m.image_ref);
            w.line(har::to_json(rec, sft.target));
        } catch (const har::ExhaustedError& e) {
            ++rejected;
            std::cerr << e.what() << "\n";
            har::AnnotationRecord rec;
            rec.sample_id = id;
            rec.strategy = strategy;
            rec.attempts = e.attempts;
            w.line(har::to_json(rec, std::nullopt));
        } catch (const har::ConversionError& e) {
            ++rejected;
            std::cerr << "sample " << id << ": " << e.what() << "\n";
        }
    }
    if (rejected) std::cerr << rejected << " of " << order.size() << " samples had no accepted annotation\n";
    return ok;
}

int cmd_annotate_judge(const AnnotateArgs& a) {
    const auto store = templates(a.template_dir);
    const auto manifest = har::load_manifest(a.manifest);
    const auto idx = har::index_manifest(manifest);
    har::jsonl::Writer w(a.out);
    for (const auto& l : har::jsonl::read(a.responses)) {
        const std::string id = har::detail::req_string(l.value, "sample_id", l.number);
        auto it = idx.find(id);
        if (it == idx.end()) throw har::UnknownSampleError(id);
        const std::string expl = har::detail::req_string(l.value, "explanation", l.number);
        const auto p = har::build_judge_prompt(store, it->second->label, expl, it->second->image_ref);
        w.line({{"sample_id", id}, {"image_ref", p.image_ref}, {"prompt", p.text}});
    }
    return ok;
}

// ---- mock-corpus ----
int cmd_mock_corpus(const Common& k, std::size_t n, const std::string& out_manifest, const std::string& out_mock,
                    double uncertain) {
    const har::RunConfig cfg = k.resolve();
    har::MockCorpusOptions opt;
    opt.tau = cfg.tau;
    opt.uncertain_fraction = uncertain;
    const auto c = har::make_mock_corpus(n, cfg.seed, opt);
    har::jsonl::Writer(out_manifest).raw(har::manifest_jsonl(c.manifest));
    har::jsonl::Writer(out_mock).raw(har::mock_scripts_jsonl(c.scripts));
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive heuristic-to-analytic reasoning toolkit"};
    app.require_subcommand(1);
    Common k;
    app.add_option("--config", k.config_path, "JSON config file")->check(CLI::ExistingFile);

    int code = ok;
    std::function<int()> run;

    InferArgs ia;
    auto* infer = app.add_subcommand("infer", "Run inference over a manifest");
    infer->add_option("--manifest", ia.manifest)->required()->check(CLI::ExistingFile);
    infer->add_option("--mock", ia.mock, "Mock model script file (JSONL)")->check(CLI::ExistingFile);
    infer->add_option("--mode", ia.mode, "adaptive|fast|deep|hr|ar|gra|none");
    infer->add_option("--out", ia.out, "Output JSONL, '-' for stdout")->required();
    infer->add_option("--template-dir", ia.template_dir)->check(CLI::ExistingDirectory);
    infer->add_flag("--no-timing", ia.no_timing, "Omit wall-clock timing fields");
    infer->add_option("--endpoint", k.endpoint);
    infer->add_option("--model", k.model);
    infer->add_option("--temperature", k.temperature);
    infer->add_option("--max-tokens", k.max_tokens);
    infer->add_option("--parallelism", k.parallelism);
    infer->add_option("--max-attempts", ia.max_attempts);
    infer->add_option("--retry-delay-ms", ia.retry_delay_ms);
    add_gate_flags(infer, k);
    infer->callback([&] { run = [&] { return cmd_infer(k, ia); }; });

    std::string responses, manifest, out = "-", group_by = "split", format = "table", mean_splits, dual,
                                            taus = "0:1:0.02";
    auto* score = app.add_subcommand("score", "Reward breakdown per inference record");
    score->add_option("--responses", responses)->required()->check(CLI::ExistingFile);
    score->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    score->add_option("--out", out);
    add_reward_flags(score, k);
    score->callback([&] { run = [&] { return cmd_score(k, responses, manifest, out); }; });

    auto* eval = app.add_subcommand("eval", "Accuracy, precision and recall per group");
    eval->add_option("--responses", responses)->required()->check(CLI::ExistingFile);
    eval->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    eval->add_option("--group-by", group_by, "split|source|none");
    eval->add_option("--format", format, "table|jsonl");
    eval->add_option("--mean-splits", mean_splits, "Comma list of splits for the mean row");
    eval->add_option("--out", out);
    eval->callback([&] { run = [&] { return cmd_eval(responses, manifest, group_by, format, mean_splits, out); }; });

    auto* sweep = app.add_subcommand("sweep-tau", "Accuracy and deep rate over a tau grid");
    sweep->add_option("--dual", dual, "Dual records or deep-mode inference records")->required()->check(CLI::ExistingFile);
    sweep->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    sweep->add_option("--taus", taus, "start:end:step or comma list");
    sweep->add_option("--out", out);
    sweep->callback([&] { run = [&] { return cmd_sweep(dual, manifest, taus, out); }; });

    GrpoArgs ga;
    auto* grpo = app.add_subcommand("grpo", "Simulate rollout groups and group-relative advantages");
    grpo->add_option("--seed", k.seed);
    grpo->add_option("--groups", ga.groups);
    grpo->add_option("--manifest", ga.manifest, "One group per sample")->check(CLI::ExistingFile);
    grpo->add_option("--group-size", ga.group_size);
    grpo->add_option("--correct-rate", ga.correct_rate)->check(CLI::Range(0.0, 1.0));
    grpo->add_option("--malformed-rate", ga.malformed_rate)->check(CLI::Range(0.0, 1.0));
    grpo->add_option("--norm", ga.norm, "std|mean");
    grpo->add_option("--out", ga.out);
    add_reward_flags(grpo, k);
    grpo->callback([&] { run = [&] { return cmd_grpo(k, ga); }; });

    AnnotateArgs aa;
    auto* annotate = app.add_subcommand("annotate", "Annotation prompts and rejection sampling");
    annotate->require_subcommand(1);
    auto* build = annotate->add_subcommand("build", "Emit annotation prompts");
    build->add_option("--strategy", aa.strategy, "1 (two-turn) or 2 (simulated reflection)");
    build->add_option("--wrong-prop", aa.wrong_prop)->check(CLI::Range(0.0, 1.0));
    build->add_option("--seed", k.seed);
    build->add_option("--manifest", aa.manifest)->required()->check(CLI::ExistingFile);
    build->add_option("--template-dir", aa.template_dir)->check(CLI::ExistingDirectory);
    build->add_option("--out", aa.out);
    build->callback([&] { run = [&] { return cmd_annotate_build(k, aa); }; });
    auto* validate = annotate->add_subcommand("validate", "Rejection-sample annotator replies into SFT records");
    validate->add_option("--strategy", aa.strategy);
    validate->add_option("--manifest", aa.manifest)->required()->check(CLI::ExistingFile);
    validate->add_option("--responses", aa.responses)->required()->check(CLI::ExistingFile);
    validate->add_option("--max-attempts", aa.max_attempts);
    validate->add_option("--target", aa.target, "har|gra");
    validate->add_option("--template-dir", aa.template_dir)->check(CLI::ExistingDirectory);
    validate->add_option("--out", aa.out);
    validate->callback([&] { run = [&] { return cmd_annotate_validate(aa); }; });
    auto* judge = annotate->add_subcommand("judge", "Emit judge prompts for explanations");
    judge->add_option("--manifest", aa.manifest)->required()->check(CLI::ExistingFile);
    judge->add_option("--responses", aa.responses, "{sample_id, explanation} lines")->required()->check(CLI::ExistingFile);
    judge->add_option("--template-dir", aa.template_dir)->check(CLI::ExistingDirectory);
    judge->add_option("--out", aa.out);
    judge->callback([&] { run = [&] { return cmd_annotate_judge(aa); }; });

    std::size_t n = 1000;
    double uncertain = 0.10;
    std::string out_manifest, out_mock;
    auto* corpus = app.add_subcommand("mock-corpus", "Write a scripted manifest and mock model spec");
    corpus->add_option("--n", n);
    corpus->add_option("--seed", k.seed);
    corpus->add_option("--tau", k.tau);
    corpus->add_option("--uncertain-fraction", uncertain)->check(CLI::Range(0.0, 1.0));
    corpus->add_option("--out-manifest", out_manifest)->required();
    corpus->add_option("--out-mock", out_mock)->required();
    corpus->callback([&] { run = [&] { return cmd_mock_corpus(k, n, out_manifest, out_mock, uncertain); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << app.help();
        return config_error;
    }

    try {
        code = run ? run() : config_error;
    } catch (const har::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    }
    return code;
}
