#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tipscan/manifest.hpp"
#include "tipscan/network.hpp"

namespace tipscan {

struct TrainConfig {
    int mini_batch_size = 8;
    double learning_rate = 0.01;
    double momentum = 0.9;
    int epochs = 30;
    std::uint64_t seed = 0;
    int input_side = kDefaultInputSide;

    /// Throws UsageError when a field is out of range.
    void validate() const;
};

struct LossResult {
    double loss = 0.0;
    Tensor4 dlogits;
};

/// Mean cross-entropy of the softmax over each logits row (max-subtracted),
/// with dL/dlogits = (softmax - one_hot) / batch.
LossResult loss_softmax_xent(const Tensor4& logits, std::span<const int> labels);

/// Softmax of each logits row; rows sum to 1.
Tensor4 softmax(const Tensor4& logits);

/// v <- momentum*v - lr*g; w <- w + v. Returns the updated pair; inputs untouched.
std::pair<ModelParams, ModelParams> sgd_step(const ModelParams& params, const ModelParams& grads,
                                             const ModelParams& velocity,
                                             const TrainConfig& config);

/// Same update applied in place.
void sgd_step_inplace(ModelParams& params, const ModelParams& grads, ModelParams& velocity,
                      const TrainConfig& config);

/// Patches resized to side x side and scaled to [0, 1], NCHW.
struct TrainingData {
    Tensor4 images;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    /// Batch made of the given sample indices, in order.
    Tensor4 gather(std::span<const std::size_t> indices) const;
};

/// Patch -> (1, 3, side, side) tensor in [0, 1].
Tensor4 patch_to_tensor(const RgbPatch& patch, int side);

TrainingData prepare_inputs(const DatasetManifest& manifest, int side, int jobs = 1);

struct EpochStats {
    int epoch = 0;
    double mean_loss = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    ModelParams model;
    std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch SGD with momentum over `indices` of `data` (all samples when
/// empty). One seeded shuffle per epoch; bitwise reproducible for a given
/// seed. Throws DivergenceError on a non-finite loss.
TrainResult train_on(const NetworkSpec& spec, const TrainingData& data,
                     std::span<const std::size_t> indices, const TrainConfig& config,
                     const EpochCallback& on_epoch = {});

TrainResult train(const NetworkSpec& spec, const DatasetManifest& train_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct Prediction {
    PatchLabel label = PatchLabel::not_garbage;
    double confidence = 0.5;
    std::array<double, kNumClasses> logits{};
};

/// Argmax of the softmax; ties go to the lower class index (not_garbage).
Prediction decide(std::span<const double> logits);

Prediction predict(const NetworkSpec& spec, const ModelParams& model, const RgbPatch& patch);

/// Predictions for the given samples, evaluated in batches of `batch_size`.
std::vector<Prediction> predict_batch(const NetworkSpec& spec, const ModelParams& model,
                                      const TrainingData& data,
                                      std::span<const std::size_t> indices, int batch_size = 32);

}  // namespace tipscan
