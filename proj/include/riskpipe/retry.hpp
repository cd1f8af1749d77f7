#pragma once

#include <chrono>

namespace riskpipe {

// Shared by the ASR and extraction gateways: retryable provider errors
// get up to max_attempts tries with doubling backoff.
struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{250};
};

}  // namespace riskpipe
