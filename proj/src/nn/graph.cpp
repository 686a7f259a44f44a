#include "nael/nn/graph.hpp"

#include "nael/error.hpp"

namespace nael::nn {

const Tensor& Value::value() const
{
    if (!graph_) throw StateError("value handle is not bound to a graph");
    return graph_->value(*this);
}

void Graph::set_trainable(std::span<Parameter* const> params)
{
    trainable_.clear();
    trainable_.insert(params.begin(), params.end());
}

Value Graph::push(Tensor value, bool requires_grad, BackwardFn fn)
{
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, std::move(fn)});
    backward_done_ = false;
    return Value(this, nodes_.size() - 1);
}

Value Graph::constant(Tensor t) { return push(std::move(t), false, nullptr); }

Value Graph::variable(Tensor t) { return push(std::move(t), true, nullptr); }

Value Graph::parameter(const Parameter& p)
{
    if (auto it = parameter_nodes_.find(&p); it != parameter_nodes_.end()) return Value(this, it->second);
    Value v = push(p.value, trainable_.contains(&p), nullptr);
    parameter_nodes_.emplace(&p, v.id_);
    return v;
}

Value Graph::watch(Value v)
{
    Value in = v;
    return push(value(v), true, [in](Graph& g, const Tensor& grad_out) {
        if (!g.requires_grad(in)) return;
        Tensor& acc = g.grad_accumulator(in);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += grad_out[i];
    });
}

Value Graph::record(Tensor value, const std::vector<Value>& parents, BackwardFn fn)
{
    bool needs = false;
    for (const Value& p : parents) {
        if (p.graph_ != this) throw StateError("operand recorded on a different graph");
        needs = needs || nodes_.at(p.id_).requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : nullptr);
}

Tensor& Graph::grad_accumulator(Value v)
{
    Node& n = nodes_.at(v.id_);
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Graph::backward(Value out)
{
    if (out.graph_ != this) throw StateError("backward: output belongs to another graph");
    if (value(out).size() != 1)
        throw ShapeError("backward without a seed needs a single-element output, got " +
                         shape_string(value(out).shape()));
    backward(out, Tensor(value(out).shape(), 1.0));
}

void Graph::backward(Value out, const Tensor& seed)
{
    if (out.graph_ != this) throw StateError("backward: output belongs to another graph");
    if (nodes_.empty()) throw StateError("backward called before any forward pass");
    require_shape(seed, value(out).shape(), "backward seed");
    if (!requires_grad(out)) throw StateError("backward: output does not depend on any gradient source");
    for (Node& n : nodes_) n.grad = Tensor{};
    grad_accumulator(out) = seed;
    for (std::size_t i = out.id_ + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
        n.backward(*this, n.grad);
    }
    backward_done_ = true;
}

const Tensor& Graph::grad(Value v) const
{
    if (!backward_done_) throw StateError("gradient requested before backward");
    const Node& n = nodes_.at(v.id_);
    if (!n.requires_grad) throw StateError("gradient requested for a value that does not require grad");
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

Tensor Graph::parameter_grad(const Parameter& p) const
{
    auto it = parameter_nodes_.find(&p);
    if (it == parameter_nodes_.end() || !nodes_[it->second].requires_grad) return Tensor(p.value.shape());
    return grad(Value(const_cast<Graph*>(this), it->second));
}

}  // namespace nael::nn
