#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nael/nn/graph.hpp"

namespace nael::nn {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<Tensor> m;  // first moments, one per parameter
    std::vector<Tensor> v;  // second moments
};

// One bias-corrected Adam update. Moments are created on the first call.
void adam_step(std::span<Parameter* const> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace nael::nn
