#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "riskpipe/domain.hpp"
#include "riskpipe/rng.hpp"

namespace riskpipe {

// Per-task two-class scores. Index 0 is NonRisk, index 1 is AtRisk, the
// same encoding as RiskLabel.
struct Logits {
    std::string subject_id;
    TaskKind task = TaskKind::ER;
    std::string source_id;  // model or fusion id that produced the values
    std::array<double, 2> values{0.0, 0.0};
};

// Input(512)-hidden-ReLU-dropout-classifier with a configurable hidden
// width: 512 for the per-modality classification head, 256 for the
// multimodal fusion layer. Parameters live in one flat array
// [W1 | b1 | W2 | b2] so the optimizer and the finite-difference checks
// can treat them uniformly.
class TwoLayerHead {
public:
    TwoLayerHead() = default;
    TwoLayerHead(int input_dim, int hidden_dim, int num_classes, double dropout);

    int input_dim() const { return input_dim_; }
    int hidden_dim() const { return hidden_dim_; }
    int num_classes() const { return num_classes_; }
    double dropout() const { return dropout_; }

    static std::size_t parameter_count(int input_dim, int hidden_dim, int num_classes);
    std::size_t parameter_count() const;

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }

    // He-scaled init for the hidden layer, smaller scale for the output.
    void init_parameters(Rng& rng);

    // Eval-mode forward: dropout disabled, deterministic.
    std::array<double, 2> forward(std::span<const double> x) const;

    // Train-mode forward with an inverted-scaling dropout mask drawn from
    // rng (kept units scale by 1/(1-p), so eval is a plain forward pass).
    // The mask is returned for the matching backward call.
    std::array<double, 2> forward_train(std::span<const double> x, Rng& rng,
                                        std::vector<double>& mask_out) const;

    // Cross-entropy of softmax(forward(x)) against the label.
    double loss_eval(std::span<const double> x, int label) const;

    // Analytic gradient of loss_eval w.r.t. every parameter, same layout
    // as parameters(). Dropout disabled, matching loss_eval.
    std::vector<double> grad_eval(std::span<const double> x, int label) const;

    // Train-mode loss + gradient accumulation: adds this sample's gradient
    // (with the given dropout mask) into grad_accum and returns the loss.
    double accumulate_grad_train(std::span<const double> x, int label,
                                 const std::vector<double>& mask,
                                 std::vector<double>& grad_accum) const;

private:
    int input_dim_ = 0;
    int hidden_dim_ = 0;
    int num_classes_ = 2;
    double dropout_ = 0.1;
    std::vector<double> params_;

    std::size_t w1_offset() const { return 0; }
    std::size_t b1_offset() const { return static_cast<std::size_t>(input_dim_) * hidden_dim_; }
    std::size_t w2_offset() const { return b1_offset() + hidden_dim_; }
    std::size_t b2_offset() const {
        return w2_offset() + static_cast<std::size_t>(hidden_dim_) * num_classes_;
    }

    void hidden_preactivations(std::span<const double> x, std::vector<double>& pre) const;
    std::array<double, 2> output_from_hidden(const std::vector<double>& hidden) const;
    double loss_and_grad_from_hidden(std::span<const double> x, int label,
                                     const std::vector<double>& pre,
                                     const std::vector<double>& mask,
                                     std::vector<double>& grad_accum) const;
};

// Numerically stable two-class softmax; shift-invariant by construction.
std::array<double, 2> softmax2(const std::array<double, 2>& values);

// Cross-entropy pieces shared by head and tests.
double log_sum_exp2(const std::array<double, 2>& values);

// The paper's per-modality head: one 512-wide hidden layer, ReLU,
// dropout 0.1, two-class output.
struct ClassifierHeadConfig {
    int input_dim = 0;
    int hidden_dim = 512;
    double dropout = 0.1;
    int num_classes = 2;
};

TwoLayerHead make_head(const ClassifierHeadConfig& config);
std::size_t head_parameter_count(const ClassifierHeadConfig& config);

}  // namespace riskpipe
