#include "nael/training.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "nael/error.hpp"
#include "nael/nn/adam.hpp"
#include "nael/nn/checkpoint.hpp"
#include "nael/parallel.hpp"

namespace nael::training {

namespace {

using model::Graph;
using model::Mode;
using model::Value;
using nn::Tensor;

// Builds the logits of a batch on a graph whose trainable set is already
// configured.
using ForwardFn = std::function<Value(Graph&, std::span<const std::size_t> rows)>;

std::vector<std::span<const std::size_t>> batches(const std::vector<std::size_t>& order, std::size_t batch_size)
{
    std::vector<std::span<const std::size_t>> out;
    const std::size_t n = order.size();
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
        std::size_t end = std::min(n, begin + batch_size);
        if (n - end == 1) end = n;
        out.emplace_back(order.data() + begin, end - begin);
        if (end == n) break;
    }
    return out;
}

History fit(nn::Registry registry, const std::vector<int>& labels, const std::vector<double>& class_weights,
            const Hyper& hyper, const char* what, const ForwardFn& forward)
{
    if (labels.size() < 2) throw ParameterError(std::string(what) + ": training needs at least two samples");
    if (hyper.batch_size < 2) throw ParameterError(std::string(what) + ": batch size must be at least 2");
    if (hyper.epochs == 0) throw ParameterError(std::string(what) + ": epochs must be positive");
    const std::vector<nn::Parameter*> params = registry.params();
    nn::AdamState adam;
    adam.lr = hyper.learning_rate;
    History history;
    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch) {
        const auto order = dataset::permutation(labels.size(), hyper.seed * 1000003ULL + epoch);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (const auto rows : batches(order, hyper.batch_size)) {
            Graph g;
            g.set_trainable(params);
            const Value logits = forward(g, rows);
            std::vector<int> batch_labels(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) batch_labels[i] = labels[rows[i]];
            const Value loss = nn::softmax_cross_entropy(logits, batch_labels, class_weights);
            const double l = loss.value()[0];
            if (!std::isfinite(l))
                throw NumericError(std::string(what) + ": non-finite loss at update " +
                                   std::to_string(adam.step + 1) + " (epoch " + std::to_string(epoch) + ")");
            g.backward(loss);
            std::vector<Tensor> grads;
            grads.reserve(params.size());
            for (nn::Parameter* p : params) grads.push_back(g.parameter_grad(*p));
            nn::adam_step(params, grads, adam);

            loss_sum += l * static_cast<double>(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                correct += model::argmax_row(logits.value(), i) == batch_labels[i];
        }
        HistoryRow row{epoch, "train", loss_sum / static_cast<double>(labels.size()),
                       static_cast<double>(correct) / static_cast<double>(labels.size()),
                       static_cast<std::size_t>(adam.step)};
        history.rows.push_back(row);
        if (hyper.on_row) hyper.on_row(row);
    }
    nn::round_to_storage_precision(registry);
    return history;
}

std::vector<int> record_labels(const dataset::Dataset& data)
{
    std::vector<int> labels(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data.records[i].class_index;
    return labels;
}

}  // namespace

void History::write_csv(std::ostream& out) const
{
    const auto old = out.precision(10);
    out << "epoch,split,loss,accuracy,updates\n";
    for (const auto& r : rows) out << r.epoch << ',' << r.split << ',' << r.loss << ',' << r.accuracy << ',' << r.updates << '\n';
    out.precision(old);
}

void History::write_csv(const std::string& path) const
{
    std::ofstream f(path);
    if (!f) throw Error("cannot open " + path + " for writing");
    write_csv(f);
}

std::size_t updates_per_epoch(std::size_t n, std::size_t batch_size)
{
    std::vector<std::size_t> order(n);
    return batches(order, batch_size).size();
}

History train_prn(model::Prn& prn, const dataset::Dataset& data, const Hyper& hyper)
{
    return fit(prn.registry(), record_labels(data), {}, hyper, "train prn",
               [&](Graph& g, std::span<const std::size_t> rows) {
                   return prn.forward(g, g.constant(dataset::batch_tensor(data, rows)), Mode::train).logits;
               });
}

History train_arn(model::Arn& arn, const model::Prn& prn, const dataset::Dataset& data, const Hyper& hyper)
{
    const auto reuse = static_cast<std::size_t>(arn.config.arn_reuse_point);
    return fit(arn.registry(), record_labels(data), {}, hyper, "train arn",
               [&](Graph& g, std::span<const std::size_t> rows) {
                   Graph frozen;
                   const auto out = prn.forward(frozen, frozen.constant(dataset::batch_tensor(data, rows)), Mode::infer);
                   return arn.forward(g, g.constant(out.stages.at(reuse).value()), Mode::train);
               });
}

PrnPass prn_pass(const model::Prn& prn, const dataset::Dataset& data, std::size_t batch_size)
{
    const std::size_t n = data.size();
    PrnPass pass;
    pass.maps.resize(n);
    pass.predicted.resize(n);
    const std::size_t chunks = (n + batch_size - 1) / batch_size;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t begin = c * batch_size, end = std::min(n, begin + batch_size);
        std::vector<std::size_t> rows(end - begin);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = begin + i;
        Graph g;
        const auto out = prn.forward(g, g.constant(dataset::batch_tensor(data, rows)), Mode::infer, true);
        std::vector<int> classes(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) classes[i] = model::argmax_row(out.logits.value(), i);
        auto maps = model::gradient_maps(out.feature_map.value(), model::importance_weights(g, out, classes), classes);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            pass.maps[begin + i] = std::move(maps[i]);
            pass.predicted[begin + i] = classes[i];
        }
    });
    return pass;
}

MapDataset label_maps(const std::vector<model::GradientMap>& maps, const std::vector<int>& predicted,
                      const std::vector<int>& actual)
{
    if (maps.size() != predicted.size() || maps.size() != actual.size())
        throw ShapeError("label_maps: maps, predictions and labels differ in length");
    MapDataset out;
    if (maps.empty()) return out;
    const auto h = static_cast<std::size_t>(maps[0].height), w = static_cast<std::size_t>(maps[0].width);
    out.maps = Tensor({maps.size(), h, w});
    out.labels.resize(maps.size());
    for (std::size_t i = 0; i < maps.size(); ++i) {
        if (maps[i].values.size() != h * w) throw ShapeError("label_maps: maps differ in size");
        std::copy(maps[i].values.begin(), maps[i].values.end(), out.maps.data() + i * h * w);
        out.labels[i] = predicted[i] == actual[i] ? model::kReliable : model::kUnreliable;
        ++(out.labels[i] == model::kReliable ? out.reliable : out.unreliable);
    }
    return out;
}

MapDataset label_nan_dataset(const model::Prn& prn, const dataset::Dataset& data)
{
    const PrnPass pass = prn_pass(prn, data);
    return label_maps(pass.maps, pass.predicted, record_labels(data));
}

History train_nan(model::Nan& nan, const MapDataset& data, const Hyper& hyper)
{
    if (data.reliable == 0 || data.unreliable == 0)
        throw Error("train nan: every gradient map carries the same label; the gate cannot be trained");
    const double n = static_cast<double>(data.labels.size());
    const std::vector<double> weights{n / (2.0 * static_cast<double>(data.reliable)),
                                      n / (2.0 * static_cast<double>(data.unreliable))};
    return fit(nan.registry(), data.labels, weights, hyper, "train nan",
               [&](Graph& g, std::span<const std::size_t> rows) {
                   return nan.forward(g, g.constant(model::gather_batch(data.maps, rows)), Mode::train);
               });
}

}  // namespace nael::training
