#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nael/nn/tensor.hpp"

namespace nael::nn {

// A learnable tensor owned by a layer. Graphs only read it; optimizers write.
struct Parameter {
    Tensor value;
};

class Graph;

// Handle to a node recorded on a Graph.
class Value {
public:
    Value() = default;

    Graph& graph() const { return *graph_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return graph_ != nullptr; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }

private:
    friend class Graph;
    Value(Graph* g, std::size_t id) : graph_(g), id_(id) {}
    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
// tape backwards visits every node after all of its consumers.
class Graph {
public:
    // Adds the node's incoming gradient into its parents' accumulators.
    using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Parameters listed here receive gradients; every other parameter is
    // treated as a constant on this graph.
    void set_trainable(std::span<Parameter* const> params);

    Value constant(Tensor t);
    Value variable(Tensor t);
    Value parameter(const Parameter& p);

    // Identity node that always requires grad, used to request gradients of
    // an intermediate activation.
    Value watch(Value v);

    Value record(Tensor value, const std::vector<Value>& parents, BackwardFn fn);

    const Tensor& value(Value v) const { return nodes_.at(v.id_).value; }
    bool requires_grad(Value v) const { return nodes_.at(v.id_).requires_grad; }

    // Zero-initialized gradient buffer of v, for use inside BackwardFn.
    Tensor& grad_accumulator(Value v);

    // Seeds d(out)/d(out) = 1; out must hold a single element.
    void backward(Value out);
    void backward(Value out, const Tensor& seed);

    bool backward_done() const noexcept { return backward_done_; }

    // Gradient of the last backward pass w.r.t. v. A node the output does
    // not depend on has a zero gradient.
    const Tensor& grad(Value v) const;
    Tensor parameter_grad(const Parameter& p) const;

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        mutable Tensor grad;  // materialized lazily as zeros
        bool requires_grad = false;
        BackwardFn backward;
    };

    Value push(Tensor value, bool requires_grad, BackwardFn fn);

    std::deque<Node> nodes_;
    std::unordered_map<const Parameter*, std::size_t> parameter_nodes_;
    std::unordered_set<const Parameter*> trainable_;
    bool backward_done_ = false;
};

}  // namespace nael::nn
