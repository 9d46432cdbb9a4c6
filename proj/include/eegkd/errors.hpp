#pragma once

#include <stdexcept>
#include <string>

namespace eegkd {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad values passed to a numeric/signal operation.
struct ArgumentError : Error { using Error::Error; };

// Container/montage/checkpoint parsing and validation.
struct FormatError : Error { using Error::Error; };

// Experiment/training configuration problems.
struct ConfigError : Error { using Error::Error; };

struct MontageError : Error { using Error::Error; };
struct EpochError : Error { using Error::Error; };
struct SplitError : Error { using Error::Error; };
struct BuildError : Error { using Error::Error; };
struct InferenceError : Error { using Error::Error; };
struct DistillError : Error { using Error::Error; };
struct EvalError : Error { using Error::Error; };
struct StoreError : Error { using Error::Error; };

} // namespace eegkd
