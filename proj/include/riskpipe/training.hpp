#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "riskpipe/encoder.hpp"
#include "riskpipe/head.hpp"

namespace riskpipe {

struct Hyperparams {
    int epochs = 10;
    double learning_rate = 0.0;
    int batch_size = 0;
    std::string optimizer = "adam";
    std::string schedule = "cosine";
    std::uint64_t seed = 0;

    static Hyperparams text_defaults();    // lr 5e-5, batch 16
    static Hyperparams speech_defaults();  // lr 1e-5, batch 8

    void validate() const;
};

struct TrainingHistory {
    std::vector<double> train_loss;    // per-epoch mean sample loss
    std::vector<double> dev_accuracy;  // per-epoch eval-mode accuracy
};

struct LabeledVector {
    std::string subject_id;
    std::vector<double> vector;
    RiskLabel label = RiskLabel::NonRisk;
};

struct LabeledInput {
    std::string subject_id;
    EncoderInput input;
    RiskLabel label = RiskLabel::NonRisk;
};

struct TrainedModel {
    std::string model_id;
    std::string encoder_id;
    TwoLayerHead head;
    Hyperparams hyperparams;
    TrainingHistory history;
};

// Core loop shared by the per-modality classifiers and the fusion layer:
// mini-batch cross-entropy with Adam and a cosine schedule over
// epochs * ceil(n / batch_size) optimizer steps. Deterministic for a
// fixed seed. dev may be empty (dev_accuracy then records NaN).
TwoLayerHead train_head_on_vectors(const std::vector<LabeledVector>& train,
                                   const std::vector<LabeledVector>& dev, int input_dim,
                                   int hidden_dim, double dropout, const Hyperparams& hp,
                                   TrainingHistory& history);

// Fine-tunes a classifier for one task: encodes every input with the
// (frozen) encoder, then trains the paper's 512-wide head on top. Rejects
// text-modality training for PR, whose transcript is identical across
// subjects.
TrainedModel train_classifier(const std::vector<LabeledInput>& train_set,
                              const std::vector<LabeledInput>& dev_set, Encoder& encoder,
                              const ClassifierHeadConfig& head_config, const Hyperparams& hp,
                              TaskKind task);

Logits predict_logits(const TrainedModel& model, const Representation& representation);
Logits predict_logits(const TrainedModel& model, Encoder& encoder, const EncoderInput& input,
                      const std::string& subject_id, TaskKind task);

double eval_accuracy(const TwoLayerHead& head, const std::vector<LabeledVector>& items);

struct ExportItem {
    std::string subject_id;
    EncoderInput input;
};

struct ExportResult {
    std::vector<Representation> representations;  // input order, missing items skipped
    std::vector<std::string> missing;             // subject ids with unreadable inputs
};

ExportResult export_representations(Encoder& encoder, const std::vector<ExportItem>& items,
                                    TaskKind task);

// Parameter blob (little-endian float64 after a short header) plus a JSON
// metadata document with hyperparams and training history.
void save_model(const TrainedModel& model, const std::filesystem::path& params_path,
                const std::filesystem::path& meta_path);
TrainedModel load_model(const std::filesystem::path& params_path,
                        const std::filesystem::path& meta_path);

}  // namespace riskpipe
