#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nael/nn/flops.hpp"
#include "nael/nn/graph.hpp"
#include "nael/nn/ops.hpp"

namespace nael::nn {

using Rng = std::mt19937_64;

// Named view of every tensor a network persists. Buffers (running
// statistics) have param == nullptr and are never optimized.
struct TensorRef {
    std::string name;
    Tensor* tensor = nullptr;
    Parameter* param = nullptr;
};

class Registry {
public:
    void add_param(std::string name, Parameter& p) { refs_.push_back({std::move(name), &p.value, &p}); }
    void add_buffer(std::string name, Tensor& t) { refs_.push_back({std::move(name), &t, nullptr}); }

    const std::vector<TensorRef>& refs() const noexcept { return refs_; }
    std::vector<Parameter*> params() const;

private:
    std::vector<TensorRef> refs_;
};

// Standard convolution without bias (always followed by batch norm here).
class Conv2d {
public:
    Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad);

    Value forward(Graph& g, Value x) const;
    void init(Rng& rng);
    void collect(const std::string& prefix, Registry& r) { r.add_param(prefix + ".weight", weight); }
    LayerSpec spec() const;

    Parameter weight;  // [Co, Ci, K, K]
    int stride;
    int pad;
};

class DepthwiseConv2d {
public:
    DepthwiseConv2d(int channels, int kernel, int stride, int pad);

    Value forward(Graph& g, Value x) const;
    void init(Rng& rng);
    void collect(const std::string& prefix, Registry& r) { r.add_param(prefix + ".weight", weight); }
    LayerSpec spec() const;

    Parameter weight;  // [C, K, K]
    int stride;
    int pad;
};

class PointwiseConv2d {
public:
    PointwiseConv2d(int in_channels, int out_channels);

    Value forward(Graph& g, Value x) const;
    void init(Rng& rng);
    void collect(const std::string& prefix, Registry& r) { r.add_param(prefix + ".weight", weight); }
    LayerSpec spec() const;

    Parameter weight;  // [Co, Ci]
};

class BatchNorm {
public:
    explicit BatchNorm(int channels);

    // Train mode refreshes the running statistics; training is serialized
    // by contract so the mutation is not synchronized.
    Value forward(Graph& g, Value x, Mode mode) const;
    void collect(const std::string& prefix, Registry& r);

    Parameter gamma;
    Parameter beta;
    mutable BatchNormState state;
};

class Linear {
public:
    Linear(int in_features, int out_features);

    Value forward(Graph& g, Value x) const;
    void init(Rng& rng);
    void collect(const std::string& prefix, Registry& r);
    LayerSpec spec() const;

    Parameter weight;  // [Out, In]
    Parameter bias;    // [Out]
};

}  // namespace nael::nn
