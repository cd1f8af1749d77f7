#include "riskpipe/optimizer.hpp"

#include <cmath>

#include "riskpipe/errors.hpp"

namespace riskpipe {

double cosine_lr(std::int64_t step, std::int64_t total_steps, double base_lr) {
    if (total_steps < 1) throw ValidationError("total_steps must be >= 1");
    if (step < 0 || step > total_steps)
        throw ValidationError("schedule step " + std::to_string(step) + " outside [0, " +
                              std::to_string(total_steps) + "]");
    if (step == 0) return base_lr;
    if (step == total_steps) return 0.0;
    const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

AdamOptimizer::AdamOptimizer(std::size_t parameter_count, double beta1, double beta2,
                             double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
      m_(parameter_count, 0.0), v_(parameter_count, 0.0) {}

void AdamOptimizer::step(std::vector<double>& params, const std::vector<double>& grads,
                         double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size())
        throw ValidationError("optimizer state does not match parameter count");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
        const double m_hat = m_[i] / bc1;
        const double v_hat = v_[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
}

}  // namespace riskpipe
