#pragma once

#include <stdexcept>
#include <string>

namespace fuselab {

/// Base class for every error the library throws.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (shape mismatch, bad argument).
struct ContractError : Error {
    using Error::Error;
};

/// File contents do not match the expected format (IDX, weight files, CSV).
struct FormatError : Error {
    using Error::Error;
};

/// Filesystem-level failure (missing file, short write).
struct IoError : Error {
    using Error::Error;
};

/// Optimization produced a non-finite loss; carries where it happened.
struct TrainingError : Error {
    int epoch;
    long step;
    TrainingError(const std::string& what, int epoch_, long step_)
        : Error(what), epoch(epoch_), step(step_) {}
};

/// Invalid or inconsistent experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace fuselab
