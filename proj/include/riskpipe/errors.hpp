#pragma once

#include <stdexcept>
#include <string>

namespace riskpipe {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad input data: malformed manifest lines, invalid config values.
struct ValidationError : Error {
    using Error::Error;
};

// A provider call failed in a way that may succeed on retry.
struct RetryableProviderError : Error {
    using Error::Error;
};

// A provider call failed permanently (bad credentials, missing file).
struct ProviderError : Error {
    using Error::Error;
};

// A pipeline stage was invoked before its upstream artifacts exist.
struct MissingArtifactError : Error {
    using Error::Error;
};

}  // namespace riskpipe
