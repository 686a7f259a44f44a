#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "nael/dataset.hpp"
#include "nael/model.hpp"

namespace nael::training {

struct HistoryRow {
    std::size_t epoch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;  // fraction in [0, 1]
    std::size_t updates = 0;  // cumulative optimizer steps
};

struct History {
    std::vector<HistoryRow> rows;

    void write_csv(std::ostream& out) const;
    void write_csv(const std::string& path) const;
};

struct Hyper {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    // Called after every history row, e.g. for progress logging.
    std::function<void(const HistoryRow&)> on_row;
};

// Number of optimizer steps one epoch over n samples takes. A trailing
// batch of a single sample is merged into the previous one because batch
// normalization needs two samples.
std::size_t updates_per_epoch(std::size_t n, std::size_t batch_size);

// Trains an initialized PRN with Adam on softmax cross-entropy. Weights end
// rounded to checkpoint precision.
History train_prn(model::Prn& prn, const dataset::Dataset& data, const Hyper& hyper);

// Trains ARN on the frozen PRN's reused stage output.
History train_arn(model::Arn& arn, const model::Prn& prn, const dataset::Dataset& data, const Hyper& hyper);

struct MapDataset {
    nn::Tensor maps;  // [N, H, W]
    std::vector<int> labels;  // model::kReliable or model::kUnreliable
    std::size_t reliable = 0;
    std::size_t unreliable = 0;
};

// Gradient maps and top-class predictions of a frozen PRN.
struct PrnPass {
    std::vector<model::GradientMap> maps;
    std::vector<int> predicted;
};
PrnPass prn_pass(const model::Prn& prn, const dataset::Dataset& data, std::size_t batch_size = 16);

// Reliable exactly when the prediction equals the true class.
MapDataset label_maps(const std::vector<model::GradientMap>& maps, const std::vector<int>& predicted,
                      const std::vector<int>& actual);
MapDataset label_nan_dataset(const model::Prn& prn, const dataset::Dataset& data);

// Binary cross-entropy with inverse-frequency class weights.
History train_nan(model::Nan& nan, const MapDataset& data, const Hyper& hyper);

}  // namespace nael::training
