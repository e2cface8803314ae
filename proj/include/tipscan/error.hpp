#pragma once

#include <stdexcept>
#include <string>

namespace tipscan {

// Domain failure: bad data, failed fetch, diverged training. CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid invocation or configuration. CLI maps it to exit code 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Train/test provenance overlap.
class LeakageError : public Error {
public:
    LeakageError(const std::string& what, std::string provenance_id)
        : Error(what), provenance_id_(std::move(provenance_id)) {}
    const std::string& provenance_id() const noexcept { return provenance_id_; }

private:
    std::string provenance_id_;
};

// Non-finite loss during training.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int epoch, int step)
        : Error(what), epoch_(epoch), step_(step) {}
    int epoch() const noexcept { return epoch_; }
    int step() const noexcept { return step_; }

private:
    int epoch_;
    int step_;
};

}  // namespace tipscan
