#include "riskpipe/head.hpp"

#include <cmath>

#include "riskpipe/errors.hpp"

namespace riskpipe {

std::array<double, 2> softmax2(const std::array<double, 2>& values) {
    if (!std::isfinite(values[0]) || !std::isfinite(values[1]))
        throw ValidationError("softmax input must be finite");
    const double m = std::max(values[0], values[1]);
    const double e0 = std::exp(values[0] - m);
    const double e1 = std::exp(values[1] - m);
    const double z = e0 + e1;
    return {e0 / z, e1 / z};
}

double log_sum_exp2(const std::array<double, 2>& values) {
    const double m = std::max(values[0], values[1]);
    return m + std::log(std::exp(values[0] - m) + std::exp(values[1] - m));
}

TwoLayerHead::TwoLayerHead(int input_dim, int hidden_dim, int num_classes, double dropout)
    : input_dim_(input_dim), hidden_dim_(hidden_dim), num_classes_(num_classes),
      dropout_(dropout) {
    if (input_dim < 1 || hidden_dim < 1) throw ValidationError("head dimensions must be positive");
    if (num_classes != 2) throw ValidationError("head is two-class");
    if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("dropout must be in [0,1)");
    params_.assign(parameter_count(), 0.0);
}

std::size_t TwoLayerHead::parameter_count(int input_dim, int hidden_dim, int num_classes) {
    return static_cast<std::size_t>(input_dim) * hidden_dim + hidden_dim +
           static_cast<std::size_t>(hidden_dim) * num_classes + num_classes;
}

std::size_t TwoLayerHead::parameter_count() const {
    return parameter_count(input_dim_, hidden_dim_, num_classes_);
}

void TwoLayerHead::init_parameters(Rng& rng) {
    // He-scaled hidden layer over a zero output layer: logits start at
    // (0,0) and the output weights learn a logistic separation over the
    // hidden features, which stays trainable at small learning rates.
    const double w1_scale = std::sqrt(2.0 / input_dim_);
    double* p = params_.data();
    for (std::size_t i = 0; i < b1_offset(); ++i) p[i] = rng.normal() * w1_scale;
    for (std::size_t i = b1_offset(); i < params_.size(); ++i) p[i] = 0.0;
}

void TwoLayerHead::hidden_preactivations(std::span<const double> x,
                                         std::vector<double>& pre) const {
    if (static_cast<int>(x.size()) != input_dim_)
        throw ValidationError("head input has dimension " + std::to_string(x.size()) +
                              ", expected " + std::to_string(input_dim_));
    pre.assign(static_cast<std::size_t>(hidden_dim_), 0.0);
    const double* w1 = params_.data() + w1_offset();
    const double* b1 = params_.data() + b1_offset();
    for (int h = 0; h < hidden_dim_; ++h) {
        double acc = b1[h];
        const double* row = w1 + static_cast<std::size_t>(h) * input_dim_;
        for (int j = 0; j < input_dim_; ++j) acc += row[j] * x[j];
        pre[static_cast<std::size_t>(h)] = acc;
    }
}

std::array<double, 2> TwoLayerHead::output_from_hidden(const std::vector<double>& hidden) const {
    const double* w2 = params_.data() + w2_offset();
    const double* b2 = params_.data() + b2_offset();
    std::array<double, 2> logits{};
    for (int k = 0; k < num_classes_; ++k) {
        double acc = b2[k];
        const double* row = w2 + static_cast<std::size_t>(k) * hidden_dim_;
        for (int h = 0; h < hidden_dim_; ++h) acc += row[h] * hidden[static_cast<std::size_t>(h)];
        logits[static_cast<std::size_t>(k)] = acc;
    }
    return logits;
}

std::array<double, 2> TwoLayerHead::forward(std::span<const double> x) const {
    std::vector<double> pre;
    hidden_preactivations(x, pre);
    for (auto& v : pre) v = v > 0.0 ? v : 0.0;
    return output_from_hidden(pre);
}

std::array<double, 2> TwoLayerHead::forward_train(std::span<const double> x, Rng& rng,
                                                  std::vector<double>& mask_out) const {
    std::vector<double> pre;
    hidden_preactivations(x, pre);
    mask_out.assign(static_cast<std::size_t>(hidden_dim_), 1.0);
    if (dropout_ > 0.0) {
        const double keep_scale = 1.0 / (1.0 - dropout_);
        for (auto& m : mask_out) m = rng.bernoulli(dropout_) ? 0.0 : keep_scale;
    }
    for (int h = 0; h < hidden_dim_; ++h) {
        auto& v = pre[static_cast<std::size_t>(h)];
        v = (v > 0.0 ? v : 0.0) * mask_out[static_cast<std::size_t>(h)];
    }
    return output_from_hidden(pre);
}

double TwoLayerHead::loss_and_grad_from_hidden(std::span<const double> x, int label,
                                               const std::vector<double>& pre,
                                               const std::vector<double>& mask,
                                               std::vector<double>& grad_accum) const {
    std::vector<double> activated(static_cast<std::size_t>(hidden_dim_));
    for (int h = 0; h < hidden_dim_; ++h) {
        const auto i = static_cast<std::size_t>(h);
        activated[i] = (pre[i] > 0.0 ? pre[i] : 0.0) * mask[i];
    }
    const std::array<double, 2> logits = output_from_hidden(activated);
    const double lse = log_sum_exp2(logits);
    const double loss = lse - logits[static_cast<std::size_t>(label)];

    std::array<double, 2> dlogits{};
    for (int k = 0; k < num_classes_; ++k)
        dlogits[static_cast<std::size_t>(k)] =
            std::exp(logits[static_cast<std::size_t>(k)] - lse) - (k == label ? 1.0 : 0.0);

    const double* w2 = params_.data() + w2_offset();
    double* gw1 = grad_accum.data() + w1_offset();
    double* gb1 = grad_accum.data() + b1_offset();
    double* gw2 = grad_accum.data() + w2_offset();
    double* gb2 = grad_accum.data() + b2_offset();

    for (int k = 0; k < num_classes_; ++k) {
        const double dk = dlogits[static_cast<std::size_t>(k)];
        gb2[k] += dk;
        double* row = gw2 + static_cast<std::size_t>(k) * hidden_dim_;
        for (int h = 0; h < hidden_dim_; ++h) row[h] += dk * activated[static_cast<std::size_t>(h)];
    }
    for (int h = 0; h < hidden_dim_; ++h) {
        const auto i = static_cast<std::size_t>(h);
        if (pre[i] <= 0.0 || mask[i] == 0.0) continue;
        double da = 0.0;
        for (int k = 0; k < num_classes_; ++k)
            da += dlogits[static_cast<std::size_t>(k)] *
                  w2[static_cast<std::size_t>(k) * hidden_dim_ + i];
        const double dpre = da * mask[i];
        gb1[h] += dpre;
        double* row = gw1 + static_cast<std::size_t>(h) * input_dim_;
        for (int j = 0; j < input_dim_; ++j) row[j] += dpre * x[static_cast<std::size_t>(j)];
    }
    return loss;
}

double TwoLayerHead::loss_eval(std::span<const double> x, int label) const {
    const std::array<double, 2> logits = forward(x);
    return log_sum_exp2(logits) - logits[static_cast<std::size_t>(label)];
}

std::vector<double> TwoLayerHead::grad_eval(std::span<const double> x, int label) const {
    std::vector<double> pre;
    hidden_preactivations(x, pre);
    const std::vector<double> mask(static_cast<std::size_t>(hidden_dim_), 1.0);
    std::vector<double> grad(params_.size(), 0.0);
    loss_and_grad_from_hidden(x, label, pre, mask, grad);
    return grad;
}

double TwoLayerHead::accumulate_grad_train(std::span<const double> x, int label,
                                           const std::vector<double>& mask,
                                           std::vector<double>& grad_accum) const {
    std::vector<double> pre;
    hidden_preactivations(x, pre);
    return loss_and_grad_from_hidden(x, label, pre, mask, grad_accum);
}

TwoLayerHead make_head(const ClassifierHeadConfig& config) {
    return TwoLayerHead(config.input_dim, config.hidden_dim, config.num_classes, config.dropout);
}

std::size_t head_parameter_count(const ClassifierHeadConfig& config) {
    return TwoLayerHead::parameter_count(config.input_dim, config.hidden_dim,
                                         config.num_classes);
}

}  // namespace riskpipe
