#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "riskpipe/encoder.hpp"
#include "riskpipe/training.hpp"

namespace riskpipe {

struct FusionConfig {
    std::string text_encoder_id;
    std::string speech_encoder_id;
    int hidden_dim = 256;
    double dropout = 0.1;
    double learning_rate = 1e-3;
    int batch_size = 32;
    int epochs = 10;
    std::uint64_t seed = 0;

    Hyperparams hyperparams() const;
    void validate() const;
};

// Concatenated frozen representations, text block first.
struct FusedInput {
    std::string subject_id;
    TaskKind task = TaskKind::ER;
    std::vector<double> vector;
};

struct LabeledFused {
    FusedInput fused;
    RiskLabel label = RiskLabel::NonRisk;
};

FusedInput fuse(const Representation& text_repr, const Representation& speech_repr);

struct FusionModel {
    std::string model_id;
    FusionConfig config;
    int text_dim = 0;
    int speech_dim = 0;
    TwoLayerHead head;
    TrainingHistory history;
};

// Trains hidden(256)+ReLU+dropout(0.1)+classifier on precomputed fused
// vectors. The encoders are never touched; representations stay frozen.
FusionModel train_fusion(const std::vector<LabeledFused>& train,
                         const std::vector<LabeledFused>& dev, int text_dim, int speech_dim,
                         const FusionConfig& config);

// ER/ED consume a FusedInput through the fusion head. PR carries no usable
// text, so it delegates to the speech model and the returned source_id is
// the speech model's, not the fusion model's.
Logits fusion_predict(const FusionModel& model, const FusedInput& input, TaskKind task);
Logits fusion_predict_pr(const TrainedModel& speech_model, const Representation& speech_repr);

void save_fusion_model(const FusionModel& model, const std::filesystem::path& params_path,
                       const std::filesystem::path& meta_path);
FusionModel load_fusion_model(const std::filesystem::path& params_path,
                              const std::filesystem::path& meta_path);

}  // namespace riskpipe
