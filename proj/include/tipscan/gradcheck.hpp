#pragma once

#include <cstdint>
#include <span>

#include "tipscan/network.hpp"

namespace tipscan {

struct GradCheckOptions {
    int coordinates = 200;
    double epsilon = 1e-5;
    int batch = 2;
    // Relative error is |a - n| / max(|a|, |n|, floor): coordinates whose true
    // gradient vanishes are judged on absolute error instead.
    double denominator_floor = 1e-6;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    int coordinates_checked = 0;
    // Coordinates dropped because +/-epsilon flipped a relu sign or maxpool
    // argmax (the loss is not differentiable there).
    int kinks_skipped = 0;
};

/// Central-difference check of backward() on a random parameter subsample of
/// He-initialised weights, random biases and a random normal input batch, all
/// drawn from `seed`.
GradCheckResult grad_check(const NetworkSpec& spec, std::uint64_t seed,
                           const GradCheckOptions& options = {});

/// Same check for explicit parameters and data.
GradCheckResult grad_check(const NetworkSpec& spec, const ModelParams& params,
                           const Tensor4& batch, std::span<const int> labels, std::uint64_t seed,
                           const GradCheckOptions& options = {});

/// Euclidean norm of the gradient of the first parameterised layer under
/// softmax cross-entropy.
double stem_gradient_norm(const NetworkSpec& spec, const ModelParams& params, const Tensor4& batch,
                          std::span<const int> labels);

}  // namespace tipscan
