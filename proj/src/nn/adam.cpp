#include "nael/nn/adam.hpp"

#include <cmath>

#include "nael/error.hpp"

namespace nael::nn {

void adam_step(std::span<Parameter* const> params, std::span<const Tensor> grads, AdamState& state)
{
    if (params.size() != grads.size()) throw ShapeError("adam_step: one gradient per parameter required");
    if (state.m.empty()) {
        for (const Parameter* p : params) {
            state.m.emplace_back(p->value.shape());
            state.v.emplace_back(p->value.shape());
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state has a different arity");
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_shape(grads[i], params[i]->value.shape(), "adam_step gradient");
        require_shape(state.m[i], params[i]->value.shape(), "adam_step moment");
    }

    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = params[i]->value;
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        const Tensor& g = grads[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            w[j] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace nael::nn
