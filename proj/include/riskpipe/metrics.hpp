#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "riskpipe/domain.hpp"
#include "riskpipe/voting.hpp"

namespace riskpipe {

// AtRisk is the positive class: TP means a correctly detected at-risk
// subject.
struct ConfusionCounts {
    long tp = 0;
    long tn = 0;
    long fp = 0;
    long fn = 0;

    long total() const { return tp + tn + fp + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const std::vector<FinalPrediction>& predictions,
                          const std::map<std::string, RiskLabel>& labels);

// Per-task variant working directly off logits argmax (within-task tie
// votes AtRisk, as in aggregation).
ConfusionCounts confusion_from_logits(const std::vector<Logits>& logits,
                                      const std::map<std::string, RiskLabel>& labels);

// (TP + TN) / (TP + TN + FP + FN); requires a nonzero total.
double accuracy(const ConfusionCounts& counts);

// 2 * TP / (2 * TP + FP + FN); undefined when the denominator is zero.
std::optional<double> f1(const ConfusionCounts& counts);

struct MetricsResult {
    double acc = 0.0;
    std::optional<double> f1;
    long n = 0;
    ConfusionCounts counts;
};

MetricsResult compute_metrics(const ConfusionCounts& counts);

}  // namespace riskpipe
