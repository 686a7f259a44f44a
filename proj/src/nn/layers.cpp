#include "nael/nn/layers.hpp"

#include <cmath>

namespace nael::nn {

namespace {

// Kaiming-uniform with fan-in scaling for ReLU-family activations.
void kaiming_uniform(Tensor& t, std::size_t fan_in, Rng& rng)
{
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : t.values()) v = u(rng);
}

std::size_t sz(int v) { return static_cast<std::size_t>(v); }

}  // namespace

std::vector<Parameter*> Registry::params() const
{
    std::vector<Parameter*> out;
    for (const auto& r : refs_)
        if (r.param) out.push_back(r.param);
    return out;
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride_, int pad_)
    : weight{Tensor({sz(out_channels), sz(in_channels), sz(kernel), sz(kernel)})}, stride(stride_), pad(pad_)
{
}

Value Conv2d::forward(Graph& g, Value x) const { return conv2d(x, g.parameter(weight), stride, pad); }

void Conv2d::init(Rng& rng)
{
    const auto& s = weight.value.shape();
    kaiming_uniform(weight.value, s[1] * s[2] * s[3], rng);
}

LayerSpec Conv2d::spec() const
{
    const auto& s = weight.value.shape();
    return {LayerKind::sc_conv, static_cast<int>(s[2]), static_cast<int>(s[3]), stride,
            static_cast<int>(s[1]), static_cast<int>(s[0]), pad};
}

DepthwiseConv2d::DepthwiseConv2d(int channels, int kernel, int stride_, int pad_)
    : weight{Tensor({sz(channels), sz(kernel), sz(kernel)})}, stride(stride_), pad(pad_)
{
}

Value DepthwiseConv2d::forward(Graph& g, Value x) const
{
    return depthwise_conv2d(x, g.parameter(weight), stride, pad);
}

void DepthwiseConv2d::init(Rng& rng)
{
    const auto& s = weight.value.shape();
    kaiming_uniform(weight.value, s[1] * s[2], rng);
}

LayerSpec DepthwiseConv2d::spec() const
{
    const auto& s = weight.value.shape();
    const int c = static_cast<int>(s[0]);
    return {LayerKind::dw_conv, static_cast<int>(s[1]), static_cast<int>(s[2]), stride, c, c, pad};
}

PointwiseConv2d::PointwiseConv2d(int in_channels, int out_channels)
    : weight{Tensor({sz(out_channels), sz(in_channels)})}
{
}

Value PointwiseConv2d::forward(Graph& g, Value x) const { return pointwise_conv2d(x, g.parameter(weight)); }

void PointwiseConv2d::init(Rng& rng) { kaiming_uniform(weight.value, weight.value.dim(1), rng); }

LayerSpec PointwiseConv2d::spec() const
{
    return {LayerKind::pw_conv, 1, 1, 1, static_cast<int>(weight.value.dim(1)),
            static_cast<int>(weight.value.dim(0)), 0};
}

BatchNorm::BatchNorm(int channels)
    : gamma{Tensor({sz(channels)}, 1.0)}, beta{Tensor({sz(channels)}, 0.0)}, state(sz(channels))
{
}

Value BatchNorm::forward(Graph& g, Value x, Mode mode) const
{
    return batch_norm(x, g.parameter(gamma), g.parameter(beta), state, mode);
}

void BatchNorm::collect(const std::string& prefix, Registry& r)
{
    r.add_param(prefix + ".gamma", gamma);
    r.add_param(prefix + ".beta", beta);
    r.add_buffer(prefix + ".running_mean", state.running_mean);
    r.add_buffer(prefix + ".running_var", state.running_var);
}

Linear::Linear(int in_features, int out_features)
    : weight{Tensor({sz(out_features), sz(in_features)})}, bias{Tensor({sz(out_features)})}
{
}

Value Linear::forward(Graph& g, Value x) const
{
    return linear(x, g.parameter(weight), g.parameter(bias));
}

void Linear::init(Rng& rng)
{
    kaiming_uniform(weight.value, weight.value.dim(1), rng);
    bias.value.fill(0.0);
}

void Linear::collect(const std::string& prefix, Registry& r)
{
    r.add_param(prefix + ".weight", weight);
    r.add_param(prefix + ".bias", bias);
}

LayerSpec Linear::spec() const
{
    return {LayerKind::fc, 1, 1, 1, static_cast<int>(weight.value.dim(1)), static_cast<int>(weight.value.dim(0)),
            0};
}

}  // namespace nael::nn
