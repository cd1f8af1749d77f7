#include "riskpipe/metrics.hpp"

#include <set>

#include "riskpipe/errors.hpp"

namespace riskpipe {

namespace {

ConfusionCounts count_pairs(const std::vector<std::pair<std::string, RiskLabel>>& predicted,
                            const std::map<std::string, RiskLabel>& labels) {
    ConfusionCounts counts;
    std::set<std::string> seen;
    for (const auto& [subject_id, pred] : predicted) {
        if (!seen.insert(subject_id).second)
            throw ValidationError("duplicate prediction for subject " + subject_id);
        auto it = labels.find(subject_id);
        if (it == labels.end())
            throw ValidationError("no label for predicted subject " + subject_id);
        const RiskLabel truth = it->second;
        if (pred == RiskLabel::AtRisk)
            truth == RiskLabel::AtRisk ? ++counts.tp : ++counts.fp;
        else
            truth == RiskLabel::NonRisk ? ++counts.tn : ++counts.fn;
    }
    return counts;
}

}  // namespace

ConfusionCounts confusion(const std::vector<FinalPrediction>& predictions,
                          const std::map<std::string, RiskLabel>& labels) {
    std::vector<std::pair<std::string, RiskLabel>> pairs;
    pairs.reserve(predictions.size());
    for (const auto& p : predictions) pairs.emplace_back(p.subject_id, p.label);
    return count_pairs(pairs, labels);
}

ConfusionCounts confusion_from_logits(const std::vector<Logits>& logits,
                                      const std::map<std::string, RiskLabel>& labels) {
    std::vector<std::pair<std::string, RiskLabel>> pairs;
    pairs.reserve(logits.size());
    for (const auto& l : logits)
        pairs.emplace_back(l.subject_id, l.values[1] >= l.values[0] ? RiskLabel::AtRisk
                                                                    : RiskLabel::NonRisk);
    return count_pairs(pairs, labels);
}

double accuracy(const ConfusionCounts& counts) {
    const long total = counts.total();
    if (total == 0) throw ValidationError("accuracy undefined for zero evaluated subjects");
    return static_cast<double>(counts.tp + counts.tn) / static_cast<double>(total);
}

std::optional<double> f1(const ConfusionCounts& counts) {
    const long denominator = 2 * counts.tp + counts.fp + counts.fn;
    if (denominator == 0) return std::nullopt;
    return 2.0 * static_cast<double>(counts.tp) / static_cast<double>(denominator);
}

MetricsResult compute_metrics(const ConfusionCounts& counts) {
    MetricsResult result;
    result.counts = counts;
    result.n = counts.total();
    result.acc = accuracy(counts);
    result.f1 = f1(counts);
    return result;
}

}  // namespace riskpipe
