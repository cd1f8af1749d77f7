#include "riskpipe/voting.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "riskpipe/errors.hpp"

namespace riskpipe {

std::string to_string(VotingPolicy policy) {
    return policy == VotingPolicy::MajorityArgmax ? "majority_argmax" : "prob_sum";
}

VotingPolicy voting_policy_from_string(const std::string& s) {
    if (s == "majority_argmax") return VotingPolicy::MajorityArgmax;
    if (s == "prob_sum") return VotingPolicy::ProbSum;
    throw ValidationError("unknown voting policy: " + s);
}

FinalPrediction aggregate(const TaskLogitsSet& subject_logits, VotingPolicy policy) {
    const auto& by_task = subject_logits.by_task;
    if (by_task.empty())
        throw ValidationError("no task logits for subject " + subject_logits.subject_id);

    FinalPrediction pred;
    pred.subject_id = subject_logits.subject_id;
    pred.policy = policy;

    double prob_sum_at_risk = 0.0;
    double prob_sum_non_risk = 0.0;
    int at_risk_votes = 0;
    for (const auto& [task, logits] : by_task) {
        const auto probs = softmax2(logits.values);
        prob_sum_non_risk += probs[0];
        prob_sum_at_risk += probs[1];
        const RiskLabel vote =
            logits.values[1] >= logits.values[0] ? RiskLabel::AtRisk : RiskLabel::NonRisk;
        pred.per_task_votes[task] = vote;
        if (vote == RiskLabel::AtRisk) ++at_risk_votes;
    }
    pred.at_risk_score = prob_sum_at_risk / static_cast<double>(by_task.size());

    if (policy == VotingPolicy::MajorityArgmax && by_task.size() == 3) {
        // Three binary votes cannot tie.
        pred.label = 2 * at_risk_votes > static_cast<int>(by_task.size())
                         ? RiskLabel::AtRisk
                         : RiskLabel::NonRisk;
    } else {
        pred.label = prob_sum_at_risk >= prob_sum_non_risk ? RiskLabel::AtRisk
                                                           : RiskLabel::NonRisk;
    }
    return pred;
}

std::vector<FinalPrediction> aggregate_dataset(const std::vector<TaskLogitsSet>& logits,
                                               VotingPolicy policy) {
    std::set<std::string> seen;
    std::vector<FinalPrediction> out;
    out.reserve(logits.size());
    for (const auto& set : logits) {
        if (!seen.insert(set.subject_id).second)
            throw ValidationError("duplicate subject in aggregation: " + set.subject_id);
        out.push_back(aggregate(set, policy));
    }
    return out;
}

std::string format_predictions(const std::vector<FinalPrediction>& predictions) {
    std::string out = "subject_id,label,at_risk_score,vote_ER,vote_PR,vote_ED\n";
    char score[32];
    for (const auto& p : predictions) {
        std::snprintf(score, sizeof(score), "%.6f", p.at_risk_score);
        out += p.subject_id + "," + std::to_string(label_to_int(p.label)) + "," + score;
        for (TaskKind task : kAllTasks) {
            auto it = p.per_task_votes.find(task);
            out += it == p.per_task_votes.end()
                       ? ",-"
                       : "," + std::to_string(label_to_int(it->second));
        }
        out += "\n";
    }
    return out;
}

void write_predictions(const std::vector<FinalPrediction>& predictions,
                       const std::filesystem::path& path) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write predictions file: " + path.string());
    out << format_predictions(predictions);
}

std::vector<FinalPrediction> parse_predictions(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line) ||
        line != "subject_id,label,at_risk_score,vote_ER,vote_PR,vote_ED")
        throw ValidationError("bad predictions header");

    std::vector<FinalPrediction> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) throw ValidationError("bad predictions row: " + line);
        FinalPrediction p;
        p.subject_id = cells[0];
        p.label = label_from_int(std::stoi(cells[1]));
        p.at_risk_score = std::stod(cells[2]);
        for (int i = 0; i < 3; ++i) {
            if (cells[3 + static_cast<std::size_t>(i)] == "-") continue;
            p.per_task_votes[kAllTasks[i]] =
                label_from_int(std::stoi(cells[3 + static_cast<std::size_t>(i)]));
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace riskpipe
