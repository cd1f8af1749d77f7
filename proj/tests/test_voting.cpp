#include <doctest.h>

#include <cmath>

#include "riskpipe/errors.hpp"
#include "riskpipe/rng.hpp"
#include "riskpipe/voting.hpp"

using namespace riskpipe;

namespace {

Logits make_logits(const std::string& id, TaskKind task, double v0, double v1) {
    Logits l;
    l.subject_id = id;
    l.task = task;
    l.source_id = "test";
    l.values = {v0, v1};
    return l;
}

TaskLogitsSet make_set(double er0, double er1, double pr0, double pr1, double ed0, double ed1) {
    TaskLogitsSet set;
    set.subject_id = "S001";
    set.by_task[TaskKind::ER] = make_logits("S001", TaskKind::ER, er0, er1);
    set.by_task[TaskKind::PR] = make_logits("S001", TaskKind::PR, pr0, pr1);
    set.by_task[TaskKind::ED] = make_logits("S001", TaskKind::ED, ed0, ed1);
    return set;
}

// Independent oracle, written against the policy definition rather than
// the implementation: per-task argmax votes with ties to AtRisk, majority
// when all three tasks are present under majority_argmax, otherwise a
// probability-sum comparison.
RiskLabel oracle_label(const TaskLogitsSet& set, VotingPolicy policy) {
    int at = 0, non = 0;
    double sum_at = 0.0, sum_non = 0.0;
    for (const auto& [task, logits] : set.by_task) {
        const double e0 = std::exp(logits.values[0]);
        const double e1 = std::exp(logits.values[1]);
        sum_non += e0 / (e0 + e1);
        sum_at += e1 / (e0 + e1);
        if (logits.values[1] >= logits.values[0])
            ++at;
        else
            ++non;
    }
    if (policy == VotingPolicy::MajorityArgmax && set.by_task.size() == 3)
        return at > non ? RiskLabel::AtRisk : RiskLabel::NonRisk;
    return sum_at >= sum_non ? RiskLabel::AtRisk : RiskLabel::NonRisk;
}

}  // namespace

TEST_SUITE("voting") {

TEST_CASE("two-class softmax handles the worked examples") {
    const auto even = softmax2({0.0, 0.0});
    CHECK(even[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(even[1] == doctest::Approx(0.5).epsilon(1e-15));

    const auto skewed = softmax2({std::log(3.0), 0.0});
    CHECK(skewed[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(skewed[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax is shift-invariant and rejects non-finite input") {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const double a = rng.uniform01() * 10 - 5;
        const double b = rng.uniform01() * 10 - 5;
        const double c = rng.uniform01() * 14 - 7;
        const auto base = softmax2({a, b});
        const auto shifted = softmax2({a + c, b + c});
        CHECK(base[0] == doctest::Approx(shifted[0]).epsilon(1e-12));
        CHECK(base[1] + base[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(softmax2({std::nan(""), 0.0}), ValidationError);
}

TEST_CASE("two at-risk votes out of three give AtRisk") {
    const auto pred = aggregate(make_set(-1, 1, -1, 1, 1, -1), VotingPolicy::MajorityArgmax);
    CHECK(pred.label == RiskLabel::AtRisk);
    CHECK(pred.per_task_votes.at(TaskKind::ER) == RiskLabel::AtRisk);
    CHECK(pred.per_task_votes.at(TaskKind::PR) == RiskLabel::AtRisk);
    CHECK(pred.per_task_votes.at(TaskKind::ED) == RiskLabel::NonRisk);
    CHECK(pred.policy == VotingPolicy::MajorityArgmax);
}

TEST_CASE("worked per-task argmax example resolves to NonRisk") {
    const auto pred =
        aggregate(make_set(2.0, -1.0, 0.5, 0.2, -0.3, 0.4), VotingPolicy::MajorityArgmax);
    CHECK(pred.per_task_votes.at(TaskKind::ER) == RiskLabel::NonRisk);
    CHECK(pred.per_task_votes.at(TaskKind::PR) == RiskLabel::NonRisk);
    CHECK(pred.per_task_votes.at(TaskKind::ED) == RiskLabel::AtRisk);
    CHECK(pred.label == RiskLabel::NonRisk);
    CHECK(pred.at_risk_score > 0.0);
    CHECK(pred.at_risk_score < 1.0);
}

TEST_CASE("prob_sum adds softmax probabilities: (0.3,0.7)+(0.6,0.4) gives AtRisk") {
    TaskLogitsSet set;
    set.subject_id = "S001";
    set.by_task[TaskKind::ER] =
        make_logits("S001", TaskKind::ER, std::log(0.3), std::log(0.7));
    set.by_task[TaskKind::PR] =
        make_logits("S001", TaskKind::PR, std::log(0.6), std::log(0.4));
    const auto pred = aggregate(set, VotingPolicy::ProbSum);
    CHECK(pred.label == RiskLabel::AtRisk);
    CHECK(pred.at_risk_score == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("within-task exact ties vote AtRisk") {
    TaskLogitsSet set;
    set.subject_id = "S001";
    set.by_task[TaskKind::ER] = make_logits("S001", TaskKind::ER, 0.0, 0.0);
    const auto pred = aggregate(set, VotingPolicy::MajorityArgmax);
    CHECK(pred.per_task_votes.at(TaskKind::ER) == RiskLabel::AtRisk);
    CHECK(pred.label == RiskLabel::AtRisk);  // degraded prob-sum path, tie to AtRisk
}

TEST_CASE("empty task set is rejected") {
    TaskLogitsSet set;
    set.subject_id = "S001";
    CHECK_THROWS_AS(aggregate(set, VotingPolicy::MajorityArgmax), ValidationError);
}

TEST_CASE("all eight vote combinations match direct majority counting") {
    for (int bits = 0; bits < 8; ++bits) {
        TaskLogitsSet set;
        set.subject_id = "S";
        int expected_at = 0;
        for (int t = 0; t < 3; ++t) {
            const bool at_risk = (bits >> t) & 1;
            if (at_risk) ++expected_at;
            set.by_task[kAllTasks[t]] =
                make_logits("S", kAllTasks[t], at_risk ? -2.0 : 2.0, at_risk ? 2.0 : -2.0);
        }
        const auto pred = aggregate(set, VotingPolicy::MajorityArgmax);
        const RiskLabel expected =
            expected_at >= 2 ? RiskLabel::AtRisk : RiskLabel::NonRisk;
        CHECK(pred.label == expected);
    }
}

TEST_CASE("random logit triples match the independent oracle under both policies") {
    Rng rng(2025);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto set = make_set(rng.uniform01() * 8 - 4, rng.uniform01() * 8 - 4,
                                  rng.uniform01() * 8 - 4, rng.uniform01() * 8 - 4,
                                  rng.uniform01() * 8 - 4, rng.uniform01() * 8 - 4);
        for (VotingPolicy policy : {VotingPolicy::MajorityArgmax, VotingPolicy::ProbSum}) {
            CHECK(aggregate(set, policy).label == oracle_label(set, policy));
        }
    }
}

TEST_CASE("shifting any task's logits changes neither its vote nor the final label") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const auto set = make_set(rng.uniform01() * 6 - 3, rng.uniform01() * 6 - 3,
                                  rng.uniform01() * 6 - 3, rng.uniform01() * 6 - 3,
                                  rng.uniform01() * 6 - 3, rng.uniform01() * 6 - 3);
        const auto base = aggregate(set, VotingPolicy::MajorityArgmax);

        TaskLogitsSet shifted = set;
        for (auto& [task, logits] : shifted.by_task) {
            const double c = rng.uniform01() * 20 - 10;
            logits.values[0] += c;
            logits.values[1] += c;
        }
        const auto moved = aggregate(shifted, VotingPolicy::MajorityArgmax);
        CHECK(moved.label == base.label);
        CHECK(moved.per_task_votes == base.per_task_votes);
    }
}

TEST_CASE("flipping one task toward AtRisk never flips the final label away from it") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const auto set = make_set(rng.uniform01() * 6 - 3, rng.uniform01() * 6 - 3,
                                  rng.uniform01() * 6 - 3, rng.uniform01() * 6 - 3,
                                  rng.uniform01() * 6 - 3, rng.uniform01() * 6 - 3);
        const auto base = aggregate(set, VotingPolicy::MajorityArgmax);
        for (TaskKind task : kAllTasks) {
            if (base.per_task_votes.at(task) == RiskLabel::AtRisk) continue;
            TaskLogitsSet stronger = set;
            stronger.by_task[task].values = {-5.0, 5.0};
            const auto moved = aggregate(stronger, VotingPolicy::MajorityArgmax);
            if (base.label == RiskLabel::AtRisk) CHECK(moved.label == RiskLabel::AtRisk);
        }
    }
}

TEST_CASE("aggregate_dataset preserves order, composes subject-wise and rejects duplicates") {
    std::vector<TaskLogitsSet> sets;
    for (int i = 0; i < 100; ++i) {
        TaskLogitsSet set;
        set.subject_id = "S" + std::to_string(i);
        set.by_task[TaskKind::ER] =
            make_logits(set.subject_id, TaskKind::ER, i % 3 - 1.0, 1.0 - i % 2);
        sets.push_back(set);
    }
    const auto preds = aggregate_dataset(sets, VotingPolicy::MajorityArgmax);
    REQUIRE(preds.size() == 100);
    for (std::size_t i = 0; i < 100; ++i) {
        CHECK(preds[i].subject_id == sets[i].subject_id);
        CHECK(preds[i].label == aggregate(sets[i], VotingPolicy::MajorityArgmax).label);
    }

    sets.push_back(sets.front());
    CHECK_THROWS_AS(aggregate_dataset(sets, VotingPolicy::MajorityArgmax), ValidationError);
}

TEST_CASE("predictions file round-trips through its csv format") {
    std::vector<TaskLogitsSet> sets;
    for (int i = 0; i < 4; ++i) {
        TaskLogitsSet set;
        set.subject_id = "S" + std::to_string(i);
        set.by_task[TaskKind::ER] = make_logits(set.subject_id, TaskKind::ER, 1.0, -1.0 + i);
        if (i % 2 == 0)
            set.by_task[TaskKind::PR] = make_logits(set.subject_id, TaskKind::PR, -0.5, 0.5);
        sets.push_back(set);
    }
    const auto preds = aggregate_dataset(sets, VotingPolicy::ProbSum);
    const std::string csv = format_predictions(preds);
    CHECK(csv.rfind("subject_id,label,at_risk_score,vote_ER,vote_PR,vote_ED\n", 0) == 0);

    const auto parsed = parse_predictions(csv);
    REQUIRE(parsed.size() == preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        CHECK(parsed[i].subject_id == preds[i].subject_id);
        CHECK(parsed[i].label == preds[i].label);
        CHECK(parsed[i].per_task_votes == preds[i].per_task_votes);
        CHECK(std::abs(parsed[i].at_risk_score - preds[i].at_risk_score) < 5e-7);
    }
}

}  // TEST_SUITE
