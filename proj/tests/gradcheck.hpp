#pragma once
// Finite-difference gradient checking for graph-built functions. The loss
// is a fixed random projection sum(out * R) so every output element
// contributes with an O(1) weight.

#include <functional>
#include <random>
#include <vector>

#include "nael/nn/graph.hpp"
#include "nael/nn/ops.hpp"
#include "oracles.hpp"

namespace gradcheck {

using nael::nn::Graph;
using nael::nn::Parameter;
using nael::nn::Tensor;
using nael::nn::Value;

using Builder = std::function<Value(Graph&, const std::vector<Value>&)>;

inline Tensor random_tensor(const nael::nn::Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor t(shape);
    for (double& v : t.values()) v = u(rng);
    return t;
}

// Max relative error between analytic and central-difference gradients
// over all inputs and all listed parameters.
inline double check(const Builder& build, std::vector<Tensor> inputs, const std::vector<Parameter*>& params,
                    std::uint64_t seed, double h = 1e-4)
{
    std::mt19937_64 rng(seed);
    Tensor projection;

    auto evaluate = [&](const std::vector<Tensor>& xs) {
        Graph g;
        std::vector<Value> vs;
        for (const auto& x : xs) vs.push_back(g.constant(x));
        const Tensor& out = build(g, vs).value();
        double acc = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) acc += out[i] * projection[i];
        return acc;
    };

    Graph g;
    g.set_trainable(params);
    std::vector<Value> vars;
    for (const auto& x : inputs) vars.push_back(g.variable(x));
    Value out = build(g, vars);
    projection = random_tensor(out.shape(), rng);
    Value loss = nael::nn::sum(nael::nn::mul(out, g.constant(projection)));
    g.backward(loss);

    std::vector<double> analytic, numeric;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor& grad = g.grad(vars[k]);
        analytic.insert(analytic.end(), grad.values().begin(), grad.values().end());
        auto f = [&](const std::vector<double>& flat) {
            std::vector<Tensor> xs = inputs;
            xs[k] = Tensor(inputs[k].shape(), flat);
            return evaluate(xs);
        };
        const auto fd = oracle::finite_difference(f, inputs[k].storage(), h);
        numeric.insert(numeric.end(), fd.begin(), fd.end());
    }
    for (Parameter* p : params) {
        const Tensor grad = g.parameter_grad(*p);
        analytic.insert(analytic.end(), grad.values().begin(), grad.values().end());
        const Tensor original = p->value;
        auto f = [&](const std::vector<double>& flat) {
            p->value = Tensor(original.shape(), flat);
            const double r = evaluate(inputs);
            p->value = original;
            return r;
        };
        const auto fd = oracle::finite_difference(f, original.storage(), h);
        numeric.insert(numeric.end(), fd.begin(), fd.end());
    }
    return oracle::max_relative_error(analytic, numeric);
}

}  // namespace gradcheck
