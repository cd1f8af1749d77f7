#pragma once

#include <cstdint>
#include <vector>

namespace riskpipe {

// base_lr * 0.5 * (1 + cos(pi * step / total_steps)): base_lr at step 0,
// exactly 0 at step == total_steps, nonincreasing in between.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double base_lr);

class AdamOptimizer {
public:
    AdamOptimizer(std::size_t parameter_count, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);

    // One update with the caller-supplied learning rate (the cosine
    // schedule lives outside the optimizer).
    void step(std::vector<double>& params, const std::vector<double>& grads, double lr);

    std::int64_t steps_taken() const { return t_; }

private:
    double beta1_, beta2_, epsilon_;
    std::int64_t t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace riskpipe
