#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nael/nn/flops.hpp"
#include "nael/nn/layers.hpp"
#include "nael/tfa.hpp"

namespace nael::model {

using nn::Graph;
using nn::Mode;
using nn::Tensor;
using nn::Value;

struct FEStageConfig {
    int c_out = 0;
    int alpha = 1;
    int repeats = 1;  // blocks in the stage, counting the first one
    int stride = 1;
};

struct NetworkConfig {
    int input_size = 128;
    int sc_channels = 16;
    std::vector<FEStageConfig> prn_stages{{24, 2, 2, 2}, {32, 2, 2, 2}, {64, 2, 2, 2}};
    int prn_ce_channels = 256;
    // ARN consumes the output of this PRN stage.
    int arn_reuse_point = 0;
    std::vector<FEStageConfig> arn_stages{{48, 4, 3, 2}, {96, 4, 3, 2}, {160, 4, 3, 2}};
    int arn_ce_channels = 512;
    std::array<int, 4> nan_dims{64, 256, 512, 2};
    int num_classes = 12;

    void validate() const;
    // Spatial side of the PRN feature map F.
    int prn_map_size() const;
    int arn_map_size() const;
    int prn_stage_channels(int stage) const;
    int prn_stage_size(int stage) const;
};

class SCBlock {
public:
    SCBlock(int in_channels, int out_channels);

    Value forward(Graph& g, Value x, Mode mode) const;
    void init(nn::Rng& rng) { conv.init(rng); }
    void collect(const std::string& prefix, nn::Registry& r);
    void flops(nn::FlopsReport& report, const std::string& prefix, int in_size) const;

    nn::Conv2d conv;
    nn::BatchNorm bn;
};

// Inverted-residual feature-extraction block. The first block of a stage
// changes channels and stride and has no skip; repeats keep the shape and
// add the input back.
class FEBlock {
public:
    FEBlock(int in_channels, int out_channels, int alpha, int stride, bool skip);

    Value forward(Graph& g, Value x, Mode mode) const;
    void init(nn::Rng& rng);
    void collect(const std::string& prefix, nn::Registry& r);
    // Returns the output spatial size.
    int flops(nn::FlopsReport& report, const std::string& prefix, int in_size) const;

    nn::PointwiseConv2d expand;
    nn::BatchNorm bn_expand;
    nn::DepthwiseConv2d dw;
    nn::BatchNorm bn_dw;
    nn::PointwiseConv2d project;
    nn::BatchNorm bn_project;
    bool skip;
};

class CEBlock {
public:
    CEBlock(int in_channels, int out_channels);

    Value forward(Graph& g, Value x, Mode mode) const;
    void init(nn::Rng& rng) { conv.init(rng); }
    void collect(const std::string& prefix, nn::Registry& r);
    void flops(nn::FlopsReport& report, const std::string& prefix, int size) const;

    nn::PointwiseConv2d conv;
    nn::BatchNorm bn;
};

// A run of FE blocks built from one stage config.
std::vector<FEBlock> make_stage(int in_channels, const FEStageConfig& config);

struct PrnOutput {
    Value logits;
    Value feature_map;          // F, [N, C_e, H, W]
    std::vector<Value> stages;  // output of every FE stage
};

class Prn {
public:
    explicit Prn(const NetworkConfig& config);

    // Pass watch_feature_map to make F a gradient source for gradient maps.
    PrnOutput forward(Graph& g, Value input, Mode mode, bool watch_feature_map = false) const;
    void init(nn::Rng& rng);
    nn::Registry registry();
    nn::FlopsReport flops() const;

    NetworkConfig config;
    SCBlock sc;
    std::vector<std::vector<FEBlock>> stages;
    CEBlock ce;
    nn::Linear fc;
};

class Arn {
public:
    explicit Arn(const NetworkConfig& config);

    // reused: the PRN stage output at config.arn_reuse_point.
    Value forward(Graph& g, Value reused, Mode mode) const;
    void init(nn::Rng& rng);
    nn::Registry registry();
    // Marginal cost on top of a PRN pass.
    nn::FlopsReport flops() const;

    NetworkConfig config;
    std::vector<std::vector<FEBlock>> stages;
    CEBlock ce;
    nn::Linear fc;
};

class Nan {
public:
    explicit Nan(const NetworkConfig& config);

    // maps: [N, H, W] or [N, H*W]; returns [N, 2] logits.
    Value forward(Graph& g, Value maps, Mode mode) const;
    void init(nn::Rng& rng);
    nn::Registry registry();
    nn::FlopsReport flops() const;

    NetworkConfig config;
    nn::Linear fc1;
    nn::BatchNorm bn1;
    nn::Linear fc2;
    nn::BatchNorm bn2;
    nn::Linear fc3;
};

inline constexpr int kReliable = 0;
inline constexpr int kUnreliable = 1;

struct GradientMap {
    int height = 0;
    int width = 0;
    std::vector<double> values;  // row-major, row = frequency
    int class_index = 0;
    int f_max = 0;

    double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
};

// Converts a normalized TFI into a [1, 1, H, W] tensor.
Tensor tfi_tensor(const tfa::TFI& tfi);

// w^c for every sample: mean over H and W of d(logits[n, classes[n]])/dF.
// Runs a backward pass on the graph; F must have been watched.
Tensor importance_weights(Graph& g, const PrnOutput& out, std::span<const int> classes);

// Closed form for a GAP -> FC head: W_fc[c, k] / (H * W).
std::vector<double> importance_weights_closed_form(const nn::Linear& fc, int c, int height, int width);

// ReLU(sum_k F[n, k] * w[n, k]) for every sample of a [N, C, H, W] map.
std::vector<GradientMap> gradient_maps(const Tensor& feature_map, const Tensor& weights,
                                       std::span<const int> classes);

// Row with the largest time sum; ties go to the lowest row.
int f_max(const GradientMap& map);
int f_max(std::span<const double> values, int height, int width);

// Rows treated as the frequency center of a map of the given height.
bool is_center_row(int row, int height);

void write_map_csv(std::ostream& out, const GradientMap& map);
void write_map_pgm(std::ostream& out, const GradientMap& map);

// Cost of extracting a gradient map with the closed-form head backward.
std::uint64_t gradient_map_flops(const NetworkConfig& config);

struct NaelNetworks {
    explicit NaelNetworks(const NetworkConfig& config = {});

    NetworkConfig config;
    Prn prn;
    Nan nan;
    Arn arn;
};

struct CostModel {
    std::uint64_t base = 0;      // PRN + gradient map + NAN
    std::uint64_t marginal = 0;  // ARN on top of the base pass
};

CostModel cost_model(const NaelNetworks& nets);
// Static per-network reports, including the routing totals.
nn::FlopsReport flops_report(const NaelNetworks& nets);

enum class Routing { nan, always_reliable, always_unreliable };

struct InferOptions {
    Routing routing = Routing::nan;
    // Also run ARN on samples the router accepted, for baselines. Does not
    // change flops_spent or predicted_class.
    bool arn_for_all = false;
    std::size_t batch_size = 16;
};

struct NaelDecision {
    int predicted_class = 0;
    bool used_arn = false;
    std::array<double, 2> nan_probs{0.5, 0.5};
    std::uint64_t flops_spent = 0;

    int prn_class = 0;
    int arn_class = -1;  // -1 when ARN was not run
    GradientMap map;
};

// Frozen-weight adaptive inference over a batch of [1, H, W] inputs stacked
// as [N, 1, H, W]. Safe to call concurrently on shared networks.
std::vector<NaelDecision> nael_infer(const NaelNetworks& nets, const Tensor& inputs, const InferOptions& options = {});
NaelDecision nael_infer(const NaelNetworks& nets, const tfa::TFI& tfi, const InferOptions& options = {});

// Rows [begin, end) of the leading dimension.
Tensor slice_batch(const Tensor& t, std::size_t begin, std::size_t end);
Tensor gather_batch(const Tensor& t, std::span<const std::size_t> rows);

int argmax_row(const Tensor& t, std::size_t row);

}  // namespace nael::model
