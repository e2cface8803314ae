#include "tipscan/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tipscan/error.hpp"
#include "tipscan/parallel.hpp"
#include "tipscan/rng.hpp"

namespace tipscan {

void TrainConfig::validate() const {
    if (mini_batch_size < 1) throw UsageError("mini-batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw UsageError("learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must lie in [0, 1)");
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (input_side < 1) throw UsageError("input side must be >= 1");
}

Tensor4 softmax(const Tensor4& logits) {
    Tensor4 out(logits.shape());
    const auto k = logits.per_sample();
    for (int n = 0; n < logits.shape().n; ++n) {
        const double* row = logits.sample(n);
        double* p = out.sample(n);
        const double m = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += (p[j] = std::exp(row[j] - m));
        for (std::size_t j = 0; j < k; ++j) p[j] /= z;
    }
    return out;
}

LossResult loss_softmax_xent(const Tensor4& logits, std::span<const int> labels) {
    const int n = logits.shape().n;
    const auto k = static_cast<int>(logits.per_sample());
    if (static_cast<std::size_t>(n) != labels.size()) {
        throw Error("label count " + std::to_string(labels.size()) + " does not match batch " +
                    std::to_string(n));
    }
    LossResult out;
    out.dlogits = Tensor4(logits.shape());
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const int y = labels[i];
        if (y < 0 || y >= k) throw Error("label index " + std::to_string(y) + " out of range");
        const double* row = logits.sample(i);
        const double m = *std::max_element(row, row + k);
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(row[j] - m);
        const double log_z = std::log(z);
        total += -(row[y] - m - log_z);
        double* d = out.dlogits.sample(i);
        for (int j = 0; j < k; ++j) {
            d[j] = (std::exp(row[j] - m - log_z) - (j == y ? 1.0 : 0.0)) / n;
        }
    }
    out.loss = total / n;
    return out;
}

void sgd_step_inplace(ModelParams& params, const ModelParams& grads, ModelParams& velocity,
                      const TrainConfig& config) {
    if (!params.same_shape(grads) || !params.same_shape(velocity)) {
        throw Error("sgd_step: parameter, gradient and velocity shapes differ");
    }
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        for (std::size_t j = 0; j < params.layers[i].size(); ++j) {
            auto& w = params.layers[i][j];
            auto& v = velocity.layers[i][j];
            const auto& g = grads.layers[i][j];
            for (std::size_t e = 0; e < w.size(); ++e) {
                v[e] = config.momentum * v[e] - config.learning_rate * g[e];
                w[e] += v[e];
            }
        }
    }
}

std::pair<ModelParams, ModelParams> sgd_step(const ModelParams& params, const ModelParams& grads,
                                             const ModelParams& velocity,
                                             const TrainConfig& config) {
    ModelParams w = params;
    ModelParams v = velocity;
    sgd_step_inplace(w, grads, v, config);
    return {std::move(w), std::move(v)};
}

Tensor4 TrainingData::gather(std::span<const std::size_t> indices) const {
    const auto& s = images.shape();
    Tensor4 batch(Shape4{static_cast<int>(indices.size()), s.c, s.h, s.w});
    const auto per = images.per_sample();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const double* src = images.sample(static_cast<int>(indices[i]));
        std::copy(src, src + per, batch.sample(static_cast<int>(i)));
    }
    return batch;
}

Tensor4 patch_to_tensor(const RgbPatch& patch, int side) {
    const RgbPatch resized = resize_bilinear(patch, side, side);
    Tensor4 t(Shape4{1, 3, side, side});
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            for (int ch = 0; ch < 3; ++ch) {
                t.at(0, ch, r, c) = resized.channel(r, c, ch) / 255.0;
            }
        }
    }
    return t;
}

TrainingData prepare_inputs(const DatasetManifest& manifest, int side, int jobs) {
    TrainingData data;
    const int n = static_cast<int>(manifest.size());
    data.images = Tensor4(Shape4{n, 3, side, side});
    data.labels.resize(n);
    const std::size_t per = data.images.per_sample();
    parallel_for(manifest.size(), jobs, [&](std::size_t i) {
        const auto& rec = manifest.records[i];
        const Tensor4 t = patch_to_tensor(load_patch(manifest, rec), side);
        std::copy(t.data(), t.data() + per, data.images.sample(static_cast<int>(i)));
        data.labels[i] = class_index(rec.label);
    });
    return data;
}

Prediction decide(std::span<const double> logits) {
    if (logits.size() != kNumClasses) throw Error("expected two logits");
    Prediction p;
    std::copy(logits.begin(), logits.end(), p.logits.begin());
    if (!std::isfinite(logits[0]) || !std::isfinite(logits[1])) {
        throw Error("non-finite logits");
    }
    const int best = logits[1] > logits[0] ? 1 : 0;
    const double m = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - m);
    const double e1 = std::exp(logits[1] - m);
    p.label = static_cast<PatchLabel>(best);
    p.confidence = (best == 1 ? e1 : e0) / (e0 + e1);
    return p;
}

Prediction predict(const NetworkSpec& spec, const ModelParams& model, const RgbPatch& patch) {
    const Tensor4 logits = forward(spec, model, patch_to_tensor(patch, spec.input.h));
    return decide(logits.values());
}

std::vector<Prediction> predict_batch(const NetworkSpec& spec, const ModelParams& model,
                                      const TrainingData& data,
                                      std::span<const std::size_t> indices, int batch_size) {
    std::vector<Prediction> out;
    out.reserve(indices.size());
    const auto step = static_cast<std::size_t>(std::max(1, batch_size));
    for (std::size_t start = 0; start < indices.size(); start += step) {
        const auto chunk = indices.subspan(start, std::min(step, indices.size() - start));
        const Tensor4 logits = forward(spec, model, data.gather(chunk));
        for (int i = 0; i < logits.shape().n; ++i) {
            out.push_back(decide(std::span(logits.sample(i), kNumClasses)));
        }
    }
    return out;
}

TrainResult train_on(const NetworkSpec& spec, const TrainingData& data,
                     std::span<const std::size_t> indices, const TrainConfig& config,
                     const EpochCallback& on_epoch) {
    config.validate();
    if (spec.input.h != config.input_side || spec.input.w != config.input_side) {
        throw UsageError("network input side " + std::to_string(spec.input.h) +
                         " differs from training input side " + std::to_string(config.input_side));
    }
    std::vector<std::size_t> pool(indices.begin(), indices.end());
    if (pool.empty()) {
        pool.resize(data.size());
        std::iota(pool.begin(), pool.end(), std::size_t{0});
    }
    if (pool.empty()) throw Error("training set is empty");
    const auto& shape = data.images.shape();
    if (shape.c != spec.input.c || shape.h != spec.input.h || shape.w != spec.input.w) {
        throw Error("training images " + to_string(shape) + " do not match the network input");
    }

    TrainResult result;
    result.model = init_params(spec, config.seed);
    ModelParams velocity = zeros_like(result.model);
    const auto batch = static_cast<std::size_t>(config.mini_batch_size);
    std::vector<std::size_t> chunk;
    std::vector<int> labels;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto order = seeded_permutation(
            pool.size(), derive_seed(config.seed, "shuffle/" + std::to_string(epoch)));
        double loss_sum = 0.0;
        std::size_t correct = 0;
        int step = 0;
        for (std::size_t start = 0; start < order.size(); start += batch, ++step) {
            const std::size_t end = std::min(order.size(), start + batch);
            chunk.clear();
            labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                chunk.push_back(pool[order[i]]);
                labels.push_back(data.labels[pool[order[i]]]);
            }
            ForwardCache cache;
            Tensor4 logits;
            try {
                logits = forward(spec, result.model, data.gather(chunk), &cache);
            } catch (const Error&) {
                throw DivergenceError("non-finite activations at epoch " + std::to_string(epoch + 1) +
                                          ", step " + std::to_string(step + 1),
                                      epoch + 1, step + 1);
            }
            const auto loss = loss_softmax_xent(logits, labels);
            if (!std::isfinite(loss.loss)) {
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                          ", step " + std::to_string(step + 1),
                                      epoch + 1, step + 1);
            }
            loss_sum += loss.loss * static_cast<double>(chunk.size());
            for (std::size_t i = 0; i < chunk.size(); ++i) {
                const auto pred = decide(std::span(logits.sample(static_cast<int>(i)), kNumClasses));
                if (class_index(pred.label) == labels[i]) ++correct;
            }
            const ModelParams grads = backward(spec, result.model, cache, loss.dlogits);
            sgd_step_inplace(result.model, grads, velocity, config);
        }
        EpochStats stats{epoch + 1, loss_sum / static_cast<double>(order.size()),
                         static_cast<double>(correct) / static_cast<double>(order.size())};
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }
    if (!result.model.all_finite()) {
        throw DivergenceError("non-finite weights after training", config.epochs, 0);
    }
    return result;
}

TrainResult train(const NetworkSpec& spec, const DatasetManifest& train_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (train_set.empty()) throw Error("training set is empty");
    const TrainingData data = prepare_inputs(train_set, config.input_side);
    return train_on(spec, data, {}, config, on_epoch);
}

}  // namespace tipscan
