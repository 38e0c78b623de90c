#include "cli_util.hpp"
#include "har/har.hpp"

#include <gtest/gtest.h>

using namespace har;

namespace {

const std::string bin = HAR_CLI_PATH;

class Cli : public ::testing::Test {
protected:
    cli::TempDir dir{"har_cli"};
    std::string at(const std::string& f) const { return dir / f; }

    void corpus(int n = 60) {
        ASSERT_EQ(cli::run(bin, "mock-corpus --n " + std::to_string(n) + " --seed 3 --out-manifest " + at("m.jsonl") +
                                    " --out-mock " + at("mock.jsonl")),
                  0);
    }
};

std::string har_text(std::size_t tokens, Verdict v) {
    std::string reason;
    for (std::size_t i = 0; i + 3 < tokens; ++i) reason += (i ? " w" : "w") + std::to_string(i);
    return render(HarResponse{v, reason, "r", v, {}});
}

} // namespace

TEST_F(Cli, InferHappyPath) {
    corpus();
    EXPECT_EQ(cli::run(bin, "infer --manifest " + at("m.jsonl") + " --mock " + at("mock.jsonl") +
                                " --mode adaptive --tau 0.96 --out " + at("r.jsonl")),
              0);
    EXPECT_EQ(jsonl::read(at("r.jsonl")).size(), 60u);
}

TEST_F(Cli, InferMissingOutIsUsageError) {
    corpus();
    EXPECT_EQ(cli::run(bin, "infer --manifest " + at("m.jsonl") + " --mock " + at("mock.jsonl"), "/dev/null", at("err")),
              1);
    EXPECT_NE(cli::slurp(at("err")).find("--out"), std::string::npos);
}

TEST_F(Cli, ApiKeyFlagDoesNotExist) {
    corpus();
    EXPECT_EQ(cli::run(bin, "infer --api-key sk --manifest " + at("m.jsonl") + " --mock " + at("mock.jsonl") +
                                " --out " + at("r.jsonl")),
              1);
}

TEST_F(Cli, ConfigFileAndEnvErrorsExitOne) {
    corpus();
    cli::write(at("cfg.json"), R"({"tau": "x"})");
    EXPECT_EQ(cli::run(bin, "--config " + at("cfg.json") + " infer --manifest " + at("m.jsonl") + " --mock " +
                                at("mock.jsonl") + " --out " + at("r.jsonl")),
              1);
    EXPECT_EQ(cli::run(bin, "infer --manifest " + at("m.jsonl") + " --mock " + at("mock.jsonl") + " --out " + at("r.jsonl"),
                       "/dev/null", "/dev/null", "HAR_PARALLELISM=zero"),
              1);
    cli::write(at("cfg.json"), R"({"tau": 0.5, "parallelism": 3})");
    EXPECT_EQ(cli::run(bin, "--config " + at("cfg.json") + " infer --manifest " + at("m.jsonl") + " --mock " +
                                at("mock.jsonl") + " --out " + at("r.jsonl")),
              0);
}

TEST_F(Cli, PartialFailureExitsTwo) {
    cli::write(at("m.jsonl"), R"({"sample_id":"a","label":"fake","split":"dev","source":"s","image_ref":"x"})"
                              "\n"
                              R"({"sample_id":"b","label":"real","split":"dev","source":"s","image_ref":"y"})"
                              "\n");
    cli::write(at("mock.jsonl"), R"({"sample_id":"a","fast_p_fake":0.9,"deep_verdict":"fake","seed":1})"
                                 "\n"
                                 R"({"sample_id":"b","fast_p_fake":0.1,"deep_verdict":"real","seed":1,"transient_failures":9})"
                                 "\n");
    EXPECT_EQ(cli::run(bin, "infer --retry-delay-ms 0 --manifest " + at("m.jsonl") + " --mock " + at("mock.jsonl") +
                                " --out " + at("r.jsonl")),
              2);
    const auto rs = read_inference_records(at("r.jsonl"));
    ASSERT_EQ(rs.size(), 2u);
    EXPECT_FALSE(rs[0].flagged());
    EXPECT_TRUE(rs[1].flagged());
}

TEST_F(Cli, ScoreMaximalAndMalformed) {
    cli::write(at("m.jsonl"), R"({"sample_id":"a","label":"fake","split":"dev","source":"s","image_ref":"x"})"
                              "\n"
                              R"({"sample_id":"b","label":"fake","split":"dev","source":"s","image_ref":"y"})"
                              "\n");
    InferenceRecord a, b;
    a.sample_id = "a";
    a.mode = InferMode::deep_only;
    a.impression_p_fake = 1.0;
    a.transcript = har_text(512, Verdict::fake);
    b = a;
    b.sample_id = "b";
    b.transcript = "<answer>fake</answer> dangling";
    cli::write(at("r.jsonl"), jsonl::dump(to_json(a)) + "\n" + jsonl::dump(to_json(b)) + "\n");
    ASSERT_EQ(cli::run(bin, "score --responses " + at("r.jsonl") + " --manifest " + at("m.jsonl") + " --out " +
                                at("s.jsonl")),
              0);
    const auto lines = jsonl::read(at("s.jsonl"));
    ASSERT_EQ(lines.size(), 2u);
    EXPECT_EQ(lines[0].value["total"], 4.0);
    EXPECT_EQ(lines[1].value["fmt"], 0.0);
    EXPECT_EQ(lines[1].value["acc"], 1.0);
}

TEST_F(Cli, EvalTableAndSweep) {
    corpus(200);
    ASSERT_EQ(cli::run(bin, "infer --no-timing --mode deep --manifest " + at("m.jsonl") + " --mock " +
                                at("mock.jsonl") + " --out " + at("deep.jsonl")),
              0);
    ASSERT_EQ(cli::run(bin, "eval --responses " + at("deep.jsonl") + " --manifest " + at("m.jsonl") + " --group-by split",
                       at("table.txt")),
              0);
    const std::string table = cli::slurp(at("table.txt"));
    for (const char* s : {"id_test", "ood_c", "t2i", "pcmg", "all", "pattern mean"})
        EXPECT_NE(table.find(s), std::string::npos) << s;

    ASSERT_EQ(cli::run(bin, "sweep-tau --dual " + at("deep.jsonl") + " --manifest " + at("m.jsonl") + " --taus 0:1:0.02",
                       at("sweep.jsonl")),
              0);
    const auto pts = jsonl::read(at("sweep.jsonl"));
    ASSERT_EQ(pts.size(), 51u);
    for (std::size_t i = 1; i < pts.size(); ++i)
        EXPECT_LE(pts[i].value["deep_rate"].get<double>(), pts[i - 1].value["deep_rate"].get<double>());
    EXPECT_EQ(cli::run(bin, "sweep-tau --dual " + at("deep.jsonl") + " --manifest " + at("m.jsonl") + " --taus 1:0:1"), 1);
}

TEST_F(Cli, AnnotateBuildDeterministic) {
    corpus(50);
    const std::string args = "annotate build --strategy 2 --wrong-prop 0.7 --seed 42 --manifest " + at("m.jsonl");
    ASSERT_EQ(cli::run(bin, args, at("a1.jsonl")), 0);
    ASSERT_EQ(cli::run(bin, args, at("a2.jsonl")), 0);
    EXPECT_EQ(cli::slurp(at("a1.jsonl")), cli::slurp(at("a2.jsonl")));
    EXPECT_EQ(jsonl::read(at("a1.jsonl")).size(), 50u);
    ASSERT_EQ(cli::run(bin, "annotate build --strategy 1 --manifest " + at("m.jsonl"), at("s1.jsonl")), 0);
    EXPECT_EQ(jsonl::read(at("s1.jsonl"))[0].value["prompts"].size(), 2u);
}

TEST_F(Cli, AnnotateValidateAndJudge) {
    cli::write(at("m.jsonl"), R"({"sample_id":"a","label":"fake","split":"train","source":"s","image_ref":"x"})"
                              "\n");
    jsonl::json wrong{{"sample_id", "a"}, {"response", "[Impression] Real [Reasons] r [Reflection] f [Answer] Real"}};
    jsonl::json right{{"sample_id", "a"}, {"response", "[Impression] Real [Reasons] r [Reflection] f [Answer] Fake"}};
    cli::write(at("resp.jsonl"), jsonl::dump(wrong) + "\n" + jsonl::dump(right) + "\n");
    ASSERT_EQ(cli::run(bin, "annotate validate --strategy 2 --manifest " + at("m.jsonl") + " --responses " +
                                at("resp.jsonl"),
                       at("out.jsonl")),
              0);
    const auto out = jsonl::read(at("out.jsonl"));
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].value["attempts"], 2);
    EXPECT_EQ(out[0].value["accepted"], true);
    EXPECT_TRUE(is_well_formed(out[0].value["sft_text"].get<std::string>(), ReasoningMode::heuristic_to_analytic));

    cli::write(at("ex.jsonl"), R"({"sample_id":"a","explanation":"smeared hair edge"})"
                               "\n");
    ASSERT_EQ(cli::run(bin, "annotate judge --manifest " + at("m.jsonl") + " --responses " + at("ex.jsonl"),
                       at("judge.jsonl")),
              0);
    EXPECT_NE(cli::slurp(at("judge.jsonl")).find("smeared hair edge"), std::string::npos);
}

TEST_F(Cli, GrpoDeterministic) {
    ASSERT_EQ(cli::run(bin, "grpo --seed 5 --groups 3 --group-size 4", at("g1.jsonl")), 0);
    ASSERT_EQ(cli::run(bin, "grpo --seed 5 --groups 3 --group-size 4", at("g2.jsonl")), 0);
    EXPECT_EQ(cli::slurp(at("g1.jsonl")), cli::slurp(at("g2.jsonl")));
    const auto g = jsonl::read(at("g1.jsonl"));
    ASSERT_EQ(g.size(), 3u);
    double sum = 0;
    for (double a : g[0].value["advantages"]) sum += a;
    EXPECT_NEAR(sum, 0.0, 1e-8);
}

TEST_F(Cli, SchemaErrorExitsOne) {
    cli::write(at("m.jsonl"), R"({"sample_id":"a","label":"fake","split":"chameleon","source":"s","image_ref":"x"})"
                              "\n");
    cli::write(at("r.jsonl"), "");
    EXPECT_EQ(cli::run(bin, "eval --responses " + at("r.jsonl") + " --manifest " + at("m.jsonl"), "/dev/null", at("err")),
              1);
    EXPECT_NE(cli::slurp(at("err")).find("split"), std::string::npos);
}
