#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "riskpipe/domain.hpp"
#include "riskpipe/head.hpp"

namespace riskpipe {

enum class VotingPolicy { MajorityArgmax, ProbSum };

std::string to_string(VotingPolicy policy);
VotingPolicy voting_policy_from_string(const std::string& s);

struct TaskLogitsSet {
    std::string subject_id;
    std::map<TaskKind, Logits> by_task;  // at most one per task, at least one
};

struct FinalPrediction {
    std::string subject_id;
    RiskLabel label = RiskLabel::NonRisk;
    std::map<TaskKind, RiskLabel> per_task_votes;
    double at_risk_score = 0.0;  // mean softmax AtRisk probability over tasks
    VotingPolicy policy = VotingPolicy::MajorityArgmax;
};

// majority_argmax with all three tasks: per-task argmax votes (a within-
// task exact tie votes AtRisk; screening prefers false positives), final
// label by majority. prob_sum, or any set with missing tasks, sums the
// per-task softmax probabilities instead and breaks a sum tie toward
// AtRisk.
FinalPrediction aggregate(const TaskLogitsSet& subject_logits, VotingPolicy policy);

std::vector<FinalPrediction> aggregate_dataset(const std::vector<TaskLogitsSet>& logits,
                                               VotingPolicy policy);

// Predictions file: header then one "subject_id,label,at_risk_score,
// vote_ER,vote_PR,vote_ED" row per subject, score with 6 decimals,
// missing task votes as "-".
std::string format_predictions(const std::vector<FinalPrediction>& predictions);
void write_predictions(const std::vector<FinalPrediction>& predictions,
                       const std::filesystem::path& path);
std::vector<FinalPrediction> parse_predictions(const std::string& csv_text);

}  // namespace riskpipe
