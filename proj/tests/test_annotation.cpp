#include "generators.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace har;

namespace {

std::vector<ManifestRecord> corpus(std::size_t n) {
    std::vector<ManifestRecord> m;
    for (std::size_t i = 0; i < n; ++i)
        m.push_back({"a" + std::to_string(i), i % 2 ? Verdict::fake : Verdict::real, Split::train, "synthetic",
                     "img://a" + std::to_string(i), std::nullopt});
    return m;
}

std::string reply(const std::string& imp, const std::string& ans) {
    return "[Impression] " + imp + "\n[Reasons] edges look wrong\n[Reflection] the hands confirm it\n[Answer] " + ans;
}

// The worked example embedded in the fake/fake simulated-reflection template.
std::string template_example() {
    const std::string t = TemplateStore{}.get(tmpl::strategy2(Verdict::fake, Verdict::fake));
    const auto a = t.find("## Example\n");
    const auto b = t.find("## Now write your report:");
    return t.substr(a + 11, b - a - 11);
}

} // namespace

TEST(PlanImpressions, Extremes) {
    const auto m = corpus(500);
    for (const auto& p : plan_impressions(m, 0.0, 1).assignments) EXPECT_EQ(p.impression, p.truth);
    for (const auto& p : plan_impressions(m, 1.0, 1).assignments) EXPECT_EQ(p.impression, flip(p.truth));
    EXPECT_THROW(plan_impressions(m, 1.5, 1), DomainError);
}

TEST(PlanImpressions, RateNearProportionAndOrderIndependent) {
    const auto m = corpus(100000);
    const auto plan = plan_impressions(m, 0.7, 42);
    EXPECT_NEAR(plan.wrong_rate(), 0.7, 0.005);
    auto rev = m;
    std::reverse(rev.begin(), rev.end());
    const auto rplan = plan_impressions(rev, 0.7, 42);
    for (std::size_t i = 0; i < m.size(); i += 997)
        EXPECT_EQ(plan.assignments[i].impression, rplan.assignments[m.size() - 1 - i].impression);
}

TEST(Prompts, Strategy2TemplateSelection) {
    const TemplateStore store;
    const auto ff = build_strategy2_prompt(store, Verdict::fake, Verdict::fake, "img://x");
    EXPECT_NE(ff.text.find("[Answer] Fake"), std::string::npos);
    EXPECT_EQ(ff.text.find("{Instruction}"), std::string::npos);
    EXPECT_EQ(ff.image_ref, "img://x");
    const auto rr = build_strategy2_prompt(store, Verdict::real, Verdict::real, "img://x");
    EXPECT_EQ(rr.text, fill(store.get("strategy2_impression_real_truth_real"), {{"Instruction", store.get("instruction")}}));
    EXPECT_NE(build_strategy2_prompt(store, Verdict::fake, Verdict::real, "").text,
              build_strategy2_prompt(store, Verdict::real, Verdict::fake, "").text);
}

TEST(Prompts, Strategy1Rounds) {
    const TemplateStore store;
    const auto p = build_strategy1_prompts(store, Verdict::fake, "img://y");
    EXPECT_EQ(p.round1.text.find("{Instruction}"), std::string::npos);
    EXPECT_NE(p.round2_text.find("I think this is a fake image."), std::string::npos);
    const auto conv = p.round2("[Answer] Real [Reasons] r");
    ASSERT_EQ(conv.messages.size(), 3u);
    EXPECT_EQ(conv.messages[1], (Message{"assistant", "[Answer] Real [Reasons] r"}));
    EXPECT_EQ(conv.image_ref, "img://y");
}

TEST(Prompts, Judge) {
    const TemplateStore store;
    const auto p = build_judge_prompt(store, Verdict::fake, "the hands are wrong", "img://z");
    EXPECT_NE(p.text.find("from 0 to 10"), std::string::npos);
    EXPECT_NE(p.text.find("This is a fake image"), std::string::npos);
    EXPECT_TRUE(text::ends_with(p.text, "the hands are wrong"));
    EXPECT_THROW(build_judge_prompt(store, Verdict::fake, "  \n", ""), ValidationError);
}

TEST(BracketSections, BoldHeadersAndPreamble) {
    const auto p = parse_bracket_sections("Sure.\n**[Impression]** Fake\n**[Reasons]**: a\n[Reflection] b\n[Answer] \"Fake\".",
                                          single_turn_sections());
    ASSERT_FALSE(p.malformed) << p.problem;
    EXPECT_EQ(p.find(Section::reasons)->body, "a");
    EXPECT_EQ(detail::bracket_verdict(p.find(Section::answer)->body), Verdict::fake);
}

TEST(ValidateAnnotation, Examples) {
    const auto ok = validate_annotation(reply("Fake", "Fake"), Verdict::fake, AnnotationStrategy::single_turn_simulated);
    EXPECT_TRUE(ok.accepted());
    const auto wrong =
        validate_annotation("[Reflection] x\n[Answer] Real", Verdict::fake, AnnotationStrategy::two_turn);
    EXPECT_EQ(wrong.rejection, Rejection::wrong_answer);
    EXPECT_EQ(to_string(wrong.rejection), "WrongAnswer");
    EXPECT_EQ(validate_annotation("[Answer] Real", Verdict::fake, AnnotationStrategy::single_turn_simulated).rejection,
              Rejection::malformed);
}

TEST(ValidateAnnotation, OnlyCanonicalSectionOrderAccepted) {
    std::array<std::string, 4> parts{"[Impression] Fake", "[Reasons] r", "[Reflection] f", "[Answer] Fake"};
    std::array<int, 4> order{0, 1, 2, 3};
    int accepted = 0;
    do {
        std::string t;
        for (int i : order) t += parts[static_cast<std::size_t>(i)] + "\n";
        const auto v = validate_annotation(t, Verdict::fake, AnnotationStrategy::single_turn_simulated);
        accepted += v.accepted();
        if (!v.accepted()) { EXPECT_EQ(v.rejection, Rejection::malformed); }
    } while (std::next_permutation(order.begin(), order.end()));
    EXPECT_EQ(accepted, 1);
}

TEST(RejectionLoop, Examples) {
    const auto first = rejection_loop(
        "s", [](int) { return std::vector<std::string>{reply("Real", "Fake")}; }, Verdict::fake,
        AnnotationStrategy::single_turn_simulated);
    EXPECT_EQ(first.attempts, 1);
    EXPECT_TRUE(first.accepted);
    EXPECT_EQ(first.impression, Verdict::real);

    int calls = 0;
    try {
        rejection_loop(
            "s", [&](int) { ++calls; return std::vector<std::string>{reply("Fake", "Real")}; }, Verdict::fake,
            AnnotationStrategy::single_turn_simulated, 3);
        FAIL();
    } catch (const ExhaustedError& e) {
        EXPECT_EQ(e.attempts, 3);
        EXPECT_EQ(calls, 3);
    }
}

TEST(RejectionLoop, TwoTurn) {
    const auto r = rejection_loop(
        "t",
        [](int k) {
            return std::vector<std::string>{"[Answer] Real [Reasons] looks fine",
                                            "[Reflection] the text is garbled\n[Answer] " + std::string(k < 2 ? "Real" : "Fake")};
        },
        Verdict::fake, AnnotationStrategy::two_turn);
    EXPECT_EQ(r.attempts, 2);
    EXPECT_EQ(r.parsed->impression, Verdict::real);
    EXPECT_EQ(r.parsed->answer, Verdict::fake);
}

TEST(RejectionLoop, MeanAttemptsGeometric) {
    rng::Stream s(77);
    double total = 0;
    const int trials = 4000;
    for (int i = 0; i < trials; ++i) {
        const auto r = rejection_loop(
            "g",
            [&](int) {
                return std::vector<std::string>{reply("Fake", s.bernoulli(0.5) ? "Fake" : "Real")};
            },
            Verdict::fake, AnnotationStrategy::single_turn_simulated, 1000);
        total += r.attempts;
    }
    // Geometric(0.5): mean 2, sd sqrt(2); 5 standard errors.
    EXPECT_NEAR(total / trials, 2.0, 5 * std::sqrt(2.0 / trials));
}

TEST(ToSft, Conversion) {
    const TemplateStore store;
    const auto rec = record_from_sections("s", Verdict::fake, {reply("Fake", "Fake")},
                                          AnnotationStrategy::single_turn_simulated);
    const auto sft = to_sft_record(rec, ReasoningMode::heuristic_to_analytic, store, "img://s");
    const auto h = parse_har(sft.target);
    EXPECT_EQ(h.impression, Verdict::fake);
    EXPECT_EQ(h.answer, Verdict::fake);
    EXPECT_NE(sft.prompt.text.find("<impression>"), std::string::npos);

    const auto gra = to_sft_record(rec, ReasoningMode::guess_reason_answer, store);
    EXPECT_TRUE(is_well_formed(gra.target, ReasoningMode::guess_reason_answer));
    EXPECT_THROW(to_sft_record(rec, ReasoningMode::analytic, store), ConversionError);

    EXPECT_THROW(record_from_sections("s", Verdict::fake, {"[Impression] Fake\n[Reasons] r\n[Answer] Fake"},
                                      AnnotationStrategy::single_turn_simulated),
                 ConversionError);
    AnnotationRecord rejected = rec;
    rejected.accepted = false;
    EXPECT_THROW(to_sft_record(rejected, ReasoningMode::heuristic_to_analytic, store), ConversionError);
}

TEST(ToSft, TemplateWorkedExampleRoundTrips) {
    const auto rec = record_from_sections("ex", Verdict::fake, {template_example()},
                                          AnnotationStrategy::single_turn_simulated);
    ASSERT_TRUE(rec.accepted);
    const auto sft = to_sft_record(rec, ReasoningMode::heuristic_to_analytic, TemplateStore{});
    const auto h = parse_har(sft.target);
    EXPECT_EQ(h.impression, Verdict::fake);
    EXPECT_EQ(h.answer, Verdict::fake);
    EXPECT_EQ(h, *rec.parsed);
    EXPECT_NE(h.reflection.find("**Observation**"), std::string::npos);
}

TEST(AnnotationJson, Shape) {
    const auto rec = record_from_sections("s", Verdict::real, {reply("Fake", "Real")},
                                          AnnotationStrategy::single_turn_simulated);
    const auto j = to_json(rec, std::string("x"));
    EXPECT_EQ(j["impression"], "fake");
    EXPECT_EQ(j["accepted"], true);
    EXPECT_EQ(j["sft_text"], "x");
    EXPECT_EQ(j["strategy"], "single_turn_simulated");
}
