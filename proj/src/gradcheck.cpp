#include "tipscan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tipscan/rng.hpp"
#include "tipscan/training.hpp"

namespace tipscan {

namespace {

struct Coordinate {
    std::size_t layer;
    std::size_t tensor;
    std::size_t element;
};

std::vector<Coordinate> all_coordinates(const ModelParams& params) {
    std::vector<Coordinate> out;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        for (std::size_t j = 0; j < params.layers[i].size(); ++j) {
            for (std::size_t e = 0; e < params.layers[i][j].size(); ++e) out.push_back({i, j, e});
        }
    }
    return out;
}

// Fingerprint of every piecewise-linear branch taken in the forward pass.
std::uint64_t activation_pattern(const NetworkSpec& spec, const ForwardCache& cache) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ULL;
    };
    auto signs = [&](const Tensor4& t) {
        for (double v : t.values()) mix(v > 0.0 ? 1u : 0u);
    };
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& lc = cache.layers[i];
        switch (spec.layers[i].kind) {
            case LayerKind::relu: signs(lc.input); break;
            case LayerKind::residual_block:
                signs(lc.pre1);
                signs(lc.pre2);
                break;
            case LayerKind::maxpool:
                for (auto a : lc.argmax) mix(a);
                break;
            default: break;
        }
    }
    return h;
}

struct Evaluation {
    double loss;
    std::uint64_t pattern;
};

Evaluation evaluate(const NetworkSpec& spec, const ModelParams& params, const Tensor4& batch,
                    std::span<const int> labels) {
    ForwardCache cache;
    const Tensor4 logits = forward(spec, params, batch, &cache);
    return {loss_softmax_xent(logits, labels).loss, activation_pattern(spec, cache)};
}

}  // namespace

GradCheckResult grad_check(const NetworkSpec& spec, const ModelParams& params,
                           const Tensor4& batch, std::span<const int> labels, std::uint64_t seed,
                           const GradCheckOptions& options) {
    ForwardCache cache;
    const Tensor4 logits = forward(spec, params, batch, &cache);
    const auto loss = loss_softmax_xent(logits, labels);
    const ModelParams grads = backward(spec, params, cache, loss.dlogits);
    const std::uint64_t base_pattern = activation_pattern(spec, cache);

    const auto coords = all_coordinates(params);
    const auto order = seeded_permutation(coords.size(), derive_seed(seed, "gradcheck/coords"));
    ModelParams probe = params;
    GradCheckResult result;
    for (std::size_t k = 0; k < order.size() && result.coordinates_checked < options.coordinates;
         ++k) {
        const auto& c = coords[order[k]];
        double& w = probe.layers[c.layer][c.tensor][c.element];
        const double saved = w;
        w = saved + options.epsilon;
        const auto plus = evaluate(spec, probe, batch, labels);
        w = saved - options.epsilon;
        const auto minus = evaluate(spec, probe, batch, labels);
        w = saved;
        if (plus.pattern != base_pattern || minus.pattern != base_pattern) {
            ++result.kinks_skipped;
            continue;
        }
        const double numeric = (plus.loss - minus.loss) / (2.0 * options.epsilon);
        const double analytic = grads.layers[c.layer][c.tensor][c.element];
        const double denom =
            std::max({std::abs(numeric), std::abs(analytic), options.denominator_floor});
        result.max_relative_error =
            std::max(result.max_relative_error, std::abs(numeric - analytic) / denom);
        ++result.coordinates_checked;
    }
    return result;
}

GradCheckResult grad_check(const NetworkSpec& spec, std::uint64_t seed,
                           const GradCheckOptions& options) {
    ModelParams params = init_params(spec, seed);
    Rng rng(derive_seed(seed, "gradcheck/data"));
    // Non-zero biases so their gradients are exercised away from the init point.
    for (auto& layer : params.layers) {
        for (std::size_t j = 1; j < layer.size(); j += 2) {
            for (auto& v : layer[j].values()) v = 0.1 * rng.normal();
        }
    }
    Tensor4 batch(Shape4{options.batch, spec.input.c, spec.input.h, spec.input.w});
    for (auto& v : batch.values()) v = rng.normal();
    std::vector<int> labels(options.batch);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(spec.num_classes));
    return grad_check(spec, params, batch, labels, seed, options);
}

double stem_gradient_norm(const NetworkSpec& spec, const ModelParams& params, const Tensor4& batch,
                          std::span<const int> labels) {
    ForwardCache cache;
    const Tensor4 logits = forward(spec, params, batch, &cache);
    const auto loss = loss_softmax_xent(logits, labels);
    const ModelParams grads = backward(spec, params, cache, loss.dlogits);
    for (const auto& layer : grads.layers) {
        if (!layer.empty()) return std::sqrt(layer[0].squared_norm());
    }
    return 0.0;
}

}  // namespace tipscan
