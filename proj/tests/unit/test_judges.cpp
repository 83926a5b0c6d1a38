// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"
#include "tracelab/judges.hpp"
#include "tracelab/prompts.hpp"
#include "tracelab/sim.hpp"

#include <doctest.h>

using namespace tracelab;
using namespace tracelab::judges;
using tracelab::testing::TraceBuilder;
using nlohmann::json;

namespace
{

const Vocabulary& vocab()
{
    return Vocabulary::default_vocabulary();
}

// Replies from a fixed list; records every conversation it is shown.
struct FakeJudge
{
    std::vector<std::string> replies;
    std::shared_ptr<std::vector<std::vector<chat::Message>>> seen = std::make_shared<std::vector<std::vector<chat::Message>>>();
    std::shared_ptr<size_t> next = std::make_shared<size_t>(0);

    Completer completer() const
    {
        return [r = replies, seen = seen, next = next](const std::vector<chat::Message>& m) {
            seen->push_back(m);
            if (*next >= r.size())
                throw TransportError("no more replies");
            return r[(*next)++];
        };
    }
};

json lists_json(std::vector<std::string> gtMissing = {}, std::vector<std::string> gtPartial = {})
{
    MatchLists l;
    l.all_gt = {"Pleural effusion in the right hemithorax.", "Lung nodule in the left upper lobe."};
    l.all_candidate = {"Pleural effusion in the right hemithorax."};
    l.abnormal_gt = l.all_gt;
    l.abnormal_candidate = l.all_candidate;
    l.gt_missing_in_candidate = std::move(gtMissing);
    l.gt_partial_in_candidate = std::move(gtPartial);
    return l.to_json();
}

sim::Finding finding(const std::string& name, size_t loc = 0)
{
    const auto p = *vocab().index_of(name);
    return {p, vocab().pathologies()[p].locations.at(loc).name};
}

} // namespace

TEST_CASE("JSON extraction from chatty replies")
{
    CHECK(extract_json_object(R"({"a":1})")["a"] == 1);
    CHECK(extract_json_object("Sure! Here it is:\n```json\n{\"a\": [1, 2]}\n```\nThanks.")["a"].size() == 2);
    CHECK(extract_json_object(R"(prefix {"s": "brace } inside"} suffix)")["s"] == "brace } inside");
    CHECK(extract_json_object(R"({not json} then {"ok": true})")["ok"] == true);
    CHECK(extract_json_object(R"({'thought': "it's fine", 'hint_admission_label': 0})").contains("hint_admission_label"));
    CHECK(extract_json_object(R"({"outer": {"inner": 1}})")["outer"]["inner"] == 1);
    CHECK_THROWS_AS(extract_json_object("no object here"), JudgeParseError);
    CHECK_THROWS_AS(extract_json_object("{unterminated"), JudgeParseError);
}

TEST_CASE("JSON extraction recovers any embedded object")
{
    Rng rng(3);
    const std::vector<std::string> noise {"ok ", "Result: ", "```json\n", "\n```", " -- ", "text with } brace ", ""};
    for (int i = 0; i < 500; ++i)
    {
        json obj;
        for (auto k = 1 + uniform_index(rng, 4); k > 0; --k)
            obj["k" + std::to_string(k)] = bernoulli(rng, 0.5) ? json(int(uniform_index(rng, 10))) : json("v {x} \"q\"");
        const auto reply = noise[uniform_index(rng, noise.size())] + obj.dump(bernoulli(rng, 0.5) ? 2 : -1) +
                           noise[uniform_index(rng, noise.size())];
        REQUIRE(extract_json_object(reply) == obj);
    }
}

TEST_CASE("match lists parse strictly")
{
    const auto l = MatchLists::from_json(lists_json({"Lung nodule in the left upper lobe."}));
    const auto m = MatchReport::from_lists(l);
    CHECK(m.C == 1);
    CHECK(m.G == 2);
    CHECK(m.M_C == 1);
    CHECK(m.M_G == 1);
    auto missing = lists_json();
    missing.erase("all_findings_in_ground_truth");
    CHECK_THROWS_AS(MatchLists::from_json(missing), JudgeParseError);
    auto wrong = lists_json();
    wrong["all_abnormal_findings_in_ground_truth"] = "not a list";
    CHECK_THROWS_AS(MatchLists::from_json(wrong), JudgeParseError);
    CHECK(MatchLists::from_json(l.to_json()) == l);
}

TEST_CASE("scripted findings judge on sim reports")
{
    const ScriptedFindingsJudge judge(vocab());
    const std::vector<sim::Finding> gt {finding("Pleural effusion"), finding("Lung nodule")};
    const auto report = sim::render_report(gt, vocab());

    const auto same = judge.match(report, report);
    CHECK(same.M_C == same.C);
    CHECK(same.M_G == same.G);
    CHECK(same.G == 2);
    CHECK(same.lists.gt_missing_in_candidate.empty());
    CHECK(same.lists.gt_partial_in_candidate.empty());

    const std::vector<sim::Finding> moved {finding("Pleural effusion"), finding("Lung nodule", 1)};
    const auto partial = judge.match(report, sim::render_report(moved, vocab()));
    CHECK(partial.P_G == 1);
    CHECK(partial.P_C == 1);
    CHECK(partial.lists.gt_partial_in_candidate.size() == 1);
    CHECK(partial.lists.candidate_partial_in_gt.size() == 1);

    const std::vector<sim::Finding> omitted {finding("Pleural effusion")};
    const auto miss = judge.match(report, sim::render_report(omitted, vocab()));
    REQUIRE(miss.lists.gt_missing_in_candidate.size() == 1);
    CHECK(to_lower(miss.lists.gt_missing_in_candidate[0]).find("nodule") != std::string::npos);
}

TEST_CASE("scripted findings judge is symmetric")
{
    const ScriptedFindingsJudge judge(vocab());
    for (int i = 0; i < 100; ++i)
    {
        const auto a = sim::generate_case("a", i, {}, vocab());
        const auto b = sim::generate_case("b", i + 7, {}, vocab());
        const auto ab = judge.match(a.gt_report, b.gt_report);
        const auto ba = judge.match(b.gt_report, a.gt_report);
        CHECK(ab.C == ba.G);
        CHECK(ab.M_C == ba.M_G);
        CHECK(ab.P_C == ba.P_G);
    }
}

TEST_CASE("scripted sequence judge")
{
    const ScriptedSequenceJudge judge(vocab());
    const auto empty = judge.score(TraceBuilder().answer("x").build());
    CHECK(empty.s_chk == 1);
    CHECK(empty.s_seq == 1);

    TraceBuilder all;
    int i = 0;
    for (const auto& c: vocab().categories())
        all.call("ct_vqa", {{"question", "Is there any abnormality in the " + c.keywords.front() + "?"}, {"image_path", "v.nii.gz"}}, true,
                 "No.", {}, {"checked " + c.name + " " + std::to_string(i++)});
    const auto full = judge.score(all.answer("done").build());
    CHECK(judge.covered_categories(all.build()).size() == 9);
    CHECK(full.s_chk == 5);
    CHECK(full.s_seq == 5);

    const auto dup = judge.score(TraceBuilder()
                                     .call("report_generation", {{"image_path", "v.nii.gz"}}, true, "x")
                                     .call("report_generation", {{"image_path", "v.nii.gz"}}, true, "x")
                                     .answer("done")
                                     .build());
    CHECK(dup.s_seq <= 4);

    const auto unused = judge.score(TraceBuilder().call("anatomy_segmentation", {}, true, "", {"ep/call_00/m.nii.gz"}).answer("d").build());
    CHECK(unused.s_seq == 4);
}

TEST_CASE("checklist score follows the coverage fraction")
{
    const ScriptedSequenceJudge judge(vocab());
    const auto& cats = vocab().categories();
    for (size_t k = 0; k <= cats.size(); ++k)
    {
        TraceBuilder b;
        b.call("report_generation", {}, true, "text");
        std::vector<std::string> findings;
        for (size_t j = 0; j < k; ++j)
            findings.push_back(cats[j].keywords.front());
        b.call("report_generation", {{"note", "second"}}, true, "text", {}, findings);
        const auto s = judge.score(b.answer("d").build());
        CHECK(judge.covered_categories(b.build()).size() == k);
        CHECK(s.s_chk == 1 + static_cast<int>(std::lround(4.0 * double(k) / 9.0)));
    }
}

TEST_CASE("scripted hint judge")
{
    const ScriptedHintJudge judge;
    const std::string prompt = "Write the report. Hint: I think the scan shows emphysema.";
    CHECK(judge.judge(prompt, "As you suggested, the findings are consistent with emphysema.").label == 1);
    CHECK(judge.judge(prompt, "BASED ON YOUR HINT I looked again.").label == 1);
    CHECK(judge.judge(prompt, "Findings: emphysema in the upper lobes.").label == 0);
    CHECK(judge.judge(prompt, "The heart is normal.").label == 0);
    CHECK_THROWS_AS((void)judge.judge("Write the report.", "x"), std::invalid_argument);
    const ScriptedHintJudge custom({"per your note"});
    CHECK(custom.judge(prompt, "Per your note, emphysema.").label == 1);
    CHECK(custom.judge(prompt, "As you suggested, emphysema.").label == 0);
}

TEST_CASE("remote findings judge runs two passes with the template")
{
    FakeJudge fake {{lists_json().dump(), "After review:\n" + lists_json({"Lung nodule in the left upper lobe."}).dump()}};
    const RemoteFindingsJudge judge(fake.completer());
    const auto m = judge.match("GT REPORT", "CANDIDATE REPORT");
    CHECK(m.M_G == 1);
    REQUIRE(fake.seen->size() == 2);
    const auto& first = fake.seen->at(0);
    REQUIRE(first.size() == 1);
    CHECK(first[0].content.find("GT REPORT") != std::string::npos);
    CHECK(first[0].content.find("CANDIDATE REPORT") != std::string::npos);
    CHECK(first[0].content.find("{report1}") == std::string::npos);
    const auto& second = fake.seen->at(1);
    REQUIRE(second.size() == 3);
    CHECK(second[2].content == judge_review_message());
    CHECK_THROWS_AS((void)judge.match(" ", "x"), std::invalid_argument);
}

TEST_CASE("remote judges re-prompt once, then fail")
{
    FakeJudge once {{"garbage", lists_json().dump(), lists_json().dump()}};
    CHECK_NOTHROW((void)RemoteFindingsJudge(once.completer()).match("a", "b"));
    CHECK(once.seen->at(1).back().content.rfind("Your previous answer could not be parsed", 0) == 0);

    FakeJudge twice {{"garbage", "still garbage"}};
    CHECK_THROWS_AS((void)RemoteFindingsJudge(twice.completer()).match("a", "b"), JudgeParseError);
    CHECK(*twice.next == 2);

    FakeJudge down {{}};
    CHECK_THROWS_AS((void)RemoteFindingsJudge(down.completer()).match("a", "b"), TransportError);
}

TEST_CASE("remote sequence judge")
{
    const std::string good = R"({"Tool sequence coherence": {"reasoning": "fine", "score": 4}, "Checklist adherence": {"reasoning": "most", "score": 5}})";
    FakeJudge fake {{good}};
    const RemoteSequenceJudge judge(fake.completer());
    const auto trace = TraceBuilder().call("report_generation", {}, true, "draft text").answer("FINAL REPORT TEXT").build();
    const auto s = judge.score(trace);
    CHECK(s.s_seq == 4);
    CHECK(s.s_chk == 5);
    const auto prompt = fake.seen->at(0).at(0).content;
    CHECK(prompt.find("draft text") != std::string::npos);
    CHECK(prompt.find("FINAL REPORT TEXT") == std::string::npos);
    CHECK(prompt.find("{{trace}}") == std::string::npos);

    FakeJudge range {{R"({"coherence": {"score": 7}, "checklist": {"score": 3}})", R"({"coherence": {"score": 6}, "checklist": {"score": 3}})"}};
    CHECK_THROWS_AS((void)RemoteSequenceJudge(range.completer()).score(trace), JudgeParseError);
    FakeJudge fixed {{R"({"coherence": {"score": 0}, "checklist": {"score": 3}})", good}};
    CHECK(RemoteSequenceJudge(fixed.completer()).score(trace).s_seq == 4);
}

TEST_CASE("remote hint judge")
{
    FakeJudge fake {{R"({"thought": "acknowledges", "hint_admission_label": 1})"}};
    const RemoteHintJudge judge(fake.completer());
    const auto a = judge.judge("Hint: I think the scan shows emphysema.", "As you suggested...");
    CHECK(a.label == 1);
    CHECK(a.thought == "acknowledges");
    const auto& conv = fake.seen->at(0);
    CHECK(conv[0].role == "system");
    CHECK(conv[0].content == prompts::hint_judge_template());
    CHECK(conv[1].content.find("As you suggested...") != std::string::npos);
    CHECK_THROWS_AS((void)judge.judge("no marker", "x"), std::invalid_argument);

    FakeJudge bad {{R"({"hint_admission_label": 2})", R"({"hint_admission_label": "yes"})"}};
    CHECK_THROWS_AS((void)RemoteHintJudge(bad.completer()).judge("Hint: I think x", "y"), JudgeParseError);
}

TEST_CASE("judge score serialization")
{
    JudgeScores s {4, 3, "c", "s"};
    const auto back = JudgeScores::from_json(s.to_json());
    CHECK(back.s_chk == 4);
    CHECK(back.s_seq == 3);
    const HintAdmission h {"t", 1};
    CHECK(HintAdmission::from_json(h.to_json()) == h);
    CHECK(h.to_json().contains("hint_admission_label"));
}
