#pragma once

#include <span>

#include "nael/nn/graph.hpp"
#include "nael/nn/tensor.hpp"

namespace nael::nn {

enum class Mode { train, infer };

// Plain forward kernels on tensors. Activations are NCHW; conv kernels are
// [Co, Ci, Kh, Kw] (standard), [C, Kh, Kw] (depth-wise) and [Co, Ci]
// (point-wise).
namespace kernels {

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad);
Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, int stride, int pad);
Tensor pointwise_conv2d(const Tensor& x, const Tensor& w);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor relu6(const Tensor& x);
Tensor global_avg_pool(const Tensor& x);
// Row-wise softmax of [N, K] logits with max subtraction.
Tensor softmax(const Tensor& logits);

int conv_output_size(int in, int kernel, int stride, int pad);

}  // namespace kernels

// Per-channel running statistics of a batch-norm layer.
struct BatchNormState {
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.1;
    double eps = 1e-5;

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean({channels}, 0.0), running_var({channels}, 1.0) {}
};

// Graph operations. Each records its forward result and a backward rule.
Value conv2d(Value x, Value w, int stride, int pad);
Value depthwise_conv2d(Value x, Value w, int stride, int pad);
Value pointwise_conv2d(Value x, Value w);
Value linear(Value x, Value w, Value b);

// Normalizes over every axis except 1 for [N, C] and [N, C, H, W] inputs.
// Train mode uses batch statistics (requires N >= 2) and updates `state`.
Value batch_norm(Value x, Value gamma, Value beta, BatchNormState& state, Mode mode);

Value relu6(Value x);
Value relu(Value x);
Value add(Value a, Value b);
Value mul(Value a, Value b);
Value sum(Value x);
Value global_avg_pool(Value x);
Value flatten(Value x);

// Mean of -log softmax(logits)[label] over the batch. Optional per-class
// weights give the weighted mean sum(w_y * l) / sum(w_y).
Value softmax_cross_entropy(Value logits, std::span<const int> labels,
                            std::span<const double> class_weights = {});

}  // namespace nael::nn
