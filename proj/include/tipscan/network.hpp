#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tipscan/tensor.hpp"

namespace tipscan {

enum class LayerKind { conv2d, relu, maxpool, avgpool_global, dense, residual_block, softmax_output };

std::string_view to_string(LayerKind kind);

struct ConvSpec {
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 1;

    bool operator==(const ConvSpec&) const = default;
};

struct PoolSpec {
    int window = 2;
    int stride = 2;

    bool operator==(const PoolSpec&) const = default;
};

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    ConvSpec conv;                     // conv2d
    PoolSpec pool;                     // maxpool
    int out_features = 0;              // dense
    std::array<ConvSpec, 2> residual;  // residual_block: conv -> relu -> conv, + x, relu

    static LayerSpec conv2d(int out_channels, int kernel = 3, int stride = 1, int padding = 1);
    static LayerSpec relu();
    static LayerSpec maxpool(int window = 2, int stride = 2);
    static LayerSpec avgpool_global();
    static LayerSpec dense(int out_features);
    static LayerSpec residual_block(int channels);
    static LayerSpec softmax_output();

    bool operator==(const LayerSpec&) const = default;
};

struct Dims3 {
    int c = 0;
    int h = 0;
    int w = 0;

    bool operator==(const Dims3&) const = default;
};

struct NetworkSpec {
    std::string name;
    Dims3 input;
    std::vector<LayerSpec> layers;
    int num_classes = 2;
};

/// Output dims of every layer, in order. Throws Error on an inconsistent chain
/// (non-positive parameters, padding >= kernel, window larger than input,
/// residual channel mismatch, or a final layer that does not emit
/// num_classes values).
std::vector<Dims3> infer_dims(const NetworkSpec& spec);

inline constexpr int kDefaultInputSide = 64;

/// Registered desk-scale architectures: mini_plain, mini_resnet, mini_resnet_deep.
NetworkSpec build_architecture(std::string_view name, int input_side = kDefaultInputSide);

/// Same network with every residual block unrolled into conv, relu, conv, relu
/// and no shortcut. Weight tensors appear in the same order, so a shared init
/// seed gives both networks identical weights.
NetworkSpec strip_shortcuts(const NetworkSpec& spec);

/// Trainable tensors per layer index: conv/dense hold {W, b}; residual blocks
/// {W1, b1, W2, b2}; parameter-free layers hold nothing.
struct ModelParams {
    std::vector<std::vector<Tensor4>> layers;

    std::size_t parameter_count() const;
    bool same_shape(const ModelParams& other) const;
    bool all_finite() const;
    bool operator==(const ModelParams&) const = default;
};

ModelParams zeros_like(const ModelParams& params);

/// Zero-filled parameters with the shapes the spec requires.
ModelParams allocate_params(const NetworkSpec& spec);

/// He-normal weights (stddev sqrt(2/fan_in)), zero biases. Weight tensors draw
/// from one stream in layer order.
ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Per-layer state kept by forward for backward.
struct LayerCache {
    Tensor4 input;
    Tensor4 pre1;  // residual: conv1(x) before relu
    Tensor4 pre2;  // residual: conv2(relu(pre1)) + x before the final relu
    Tensor4 output;               // softmax_output only
    std::vector<std::size_t> argmax;  // maxpool: flat input index per output
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    Shape4 input_shape;
};

/// Logits shaped (batch, num_classes, 1, 1). Pass a cache to keep activations
/// for backward.
Tensor4 forward(const NetworkSpec& spec, const ModelParams& params, const Tensor4& batch,
                ForwardCache* cache = nullptr);

/// Gradients of a scalar loss given dL/dlogits. Maxpool routes to the first
/// maximum in row-major order.
ModelParams backward(const NetworkSpec& spec, const ModelParams& params, const ForwardCache& cache,
                     const Tensor4& dlogits, Tensor4* dinput = nullptr);

}  // namespace tipscan
