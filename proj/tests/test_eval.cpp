#include "doctest.h"
#include "toolken/eval.hpp"

using namespace toolken;

TEST_CASE("answer extraction follows the stated rules") {
    CHECK(*extract_last_number("so the area is 256 square feet.") == 256.0);
    CHECK(*extract_last_number("first 12 then 34.5, done") == 34.5);
    CHECK(*extract_last_number("temperature fell to -7 degrees") == -7.0);
    CHECK(!extract_last_number("no numbers here"));
    CHECK(*extract_answer_string("Answer: The answer is Liverpool F.C.") == "Liverpool F.C.");
    CHECK(*extract_answer_string("The answer is  Washington D.C. ") == "Washington D.C.");
    CHECK(*extract_answer_string("The answer is maple 42.") == "maple 42");
    CHECK(!extract_answer_string("it never says the phrase"));
    CHECK(!extract_answer_string("The answer is"));
}

TEST_CASE("numeric scoring: two-decimal exact match and 0.1% tolerance") {
    CHECK(score_numeric(159.999, 160.0, NumericMode::Exact2dp));
    CHECK(!score_numeric(160.2, 160.0, NumericMode::Tolerance));
    CHECK(score_numeric(160.15, 160.0, NumericMode::Tolerance));
    CHECK(score_numeric(0.0, 0.0, NumericMode::Tolerance));
    CHECK(!score_numeric(0.5, 0.0, NumericMode::Tolerance));
    // half away from zero at the second decimal (exactly representable values)
    CHECK(round2_away(0.005) == 0.01);
    CHECK(round2_away(-0.005) == -0.01);
    CHECK(round2_away(2.375) == 2.38);
    CHECK(round2_away(-2.375) == -2.38);
    CHECK(score_numeric(2.375, 2.38, NumericMode::Exact2dp));
    CHECK(!score_numeric(2.374, 2.38, NumericMode::Exact2dp));
}

TEST_CASE("kb scoring is normalized exact match without partial credit") {
    CHECK(score_kb("Liverpool F.C.", "liverpool f.c."));
    CHECK(score_kb("  Liverpool   F.C. ", "Liverpool F.C."));
    CHECK(!score_kb("Liverpool", "Liverpool F.C."));
    CHECK(!score_kb("", "Liverpool F.C."));
}

TEST_CASE("plan rates average outcomes and respect the orderings") {
    std::vector<PlanOutcome> outcomes;
    for (int i = 0; i < 10; ++i) {
        PlanOutcome oc;
        oc.grounded = true;
        oc.executable = i < 8;
        oc.success = i < 6;
        oc.success_relaxed = i < 7;
        outcomes.push_back(oc);
    }
    PlanRates r = score_plans(outcomes);
    CHECK(r.grounding == 1.0);
    CHECK(r.executable == doctest::Approx(0.8));
    CHECK(r.success == doctest::Approx(0.6));
    CHECK(r.success_relaxed == doctest::Approx(0.7));
    CHECK(r.success <= r.success_relaxed);
    CHECK(r.success <= r.executable);

    SUBCASE("degenerate all-perfect batch") {
        for (auto& oc : outcomes) oc = {true, true, true, true};
        PlanRates all = score_plans(outcomes);
        CHECK(all.grounding == 1.0);
        CHECK(all.success == 1.0);
    }
}

TEST_CASE("transcript scoring records tool selection and answers") {
    Transcript t;
    t.prompt = "Question: What is 2 plus 3?\nAnswer: The answer is ";
    t.final_text = t.prompt + "5";
    Transcript::Segment call;
    call.is_call = true;
    call.call.call.tool = "add";
    call.call.call.status = CallStatus::Ok;
    call.call.call.result = ToolResult{"5", 5.0};
    call.call.result_offset = t.prompt.size();
    t.segments.push_back(call);

    EvalRecord rec = score_numeric_transcript(t, 5.0, "add", NumericMode::Exact2dp, "q1");
    CHECK(rec.correct);
    CHECK(rec.answered);
    CHECK(rec.first_tool_correct);
    CHECK(rec.calls_made == 1);

    EvalRecord wrong_tool = score_numeric_transcript(t, 5.0, "subtract",
                                                     NumericMode::Exact2dp, "q1");
    CHECK(!wrong_tool.first_tool_correct);
    CHECK(wrong_tool.correct);
}

TEST_CASE("kb transcripts only count tool-produced answers") {
    Transcript t;
    t.prompt = "Question: Who is the winner of X?\nAnswer: The answer is ";
    t.final_text = t.prompt + "Someone Made Up";
    EvalRecord fabricated = score_kb_transcript(t, "Someone Made Up", "winner_of");
    CHECK(!fabricated.answered);
    CHECK(!fabricated.correct);

    Transcript::Segment call;
    call.is_call = true;
    call.call.call.tool = "winner_of";
    call.call.call.status = CallStatus::Ok;
    call.call.call.result = ToolResult{"Someone Made Up", std::nullopt};
    call.call.result_offset = t.prompt.size();
    t.segments.push_back(call);
    EvalRecord genuine = score_kb_transcript(t, "someone made up", "winner_of");
    CHECK(genuine.answered);
    CHECK(genuine.correct);
    CHECK(genuine.first_tool_correct);
}

TEST_CASE("injection soundness validates offsets and re-execution") {
    ToolkenVocab vocab(100);
    ToolSpec spec;
    spec.name = "double";
    spec.kind = ToolKind::FunctionWithArgs;
    spec.arg_schema = {{"a", ArgKind::Number}};
    vocab.register_tool(spec);
    ToolRegistry registry(std::move(vocab));
    registry.bind("double", [](const std::vector<ArgValue>& args) {
        double v = std::get<double>(args[0]);
        return ToolResult{render_number(2 * v), 2 * v};
    });

    Transcript t;
    t.prompt = "value: ";
    t.final_text = "value: 42";
    Transcript::Segment call;
    call.is_call = true;
    call.call.call.tool = "double";
    call.call.call.status = CallStatus::Ok;
    call.call.call.parsed_args = {ArgValue{21.0}};
    call.call.call.result = ToolResult{"42", 42.0};
    call.call.result_offset = 7;
    t.segments.push_back(call);
    CHECK(injection_sound(t, registry));

    t.segments[0].call.result_offset = 3;  // wrong position
    CHECK(!injection_sound(t, registry));

    t.segments[0].call.result_offset = 7;
    t.segments[0].call.call.parsed_args = {ArgValue{5.0}};  // re-execution mismatch
    CHECK(!injection_sound(t, registry));
}

TEST_CASE("reports aggregate and serialize deterministically") {
    EvalReport report;
    report.dataset = "demo";
    for (int i = 0; i < 4; ++i) {
        EvalRecord rec;
        rec.task_id = "t" + std::to_string(i);
        rec.correct = i < 2;
        rec.answered = i < 3;
        rec.first_tool_correct = i < 3;
        report.records.push_back(rec);
    }
    report.finalize();
    CHECK(report.n == 4);
    CHECK(report.accuracy == doctest::Approx(0.5));
    CHECK(report.tool_selection_accuracy == doctest::Approx(0.75));
    CHECK(report.to_json().dump() == report.to_json().dump());
    CHECK(report.summary_line().find("accuracy=0.5") != std::string::npos);
}
