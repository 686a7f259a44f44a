#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nael::nn {

enum class LayerKind { sc_conv, dw_conv, pw_conv, batchnorm, relu6, fc, gap, softmax };

struct LayerSpec {
    LayerKind kind = LayerKind::sc_conv;
    int kernel_h = 1;
    int kernel_w = 1;
    int stride = 1;
    int in_channels = 1;
    int out_channels = 1;
    int padding = 0;
};

// Multiply-accumulate products of one layer. Spatial factors are the
// layer's OUTPUT height and width; normalization, activations, pooling and
// softmax count as zero.
std::uint64_t flops_of(const LayerSpec& layer, int out_h, int out_w);

struct FlopsEntry {
    std::string name;
    std::uint64_t flops = 0;
};

struct FlopsReport {
    std::vector<FlopsEntry> entries;

    void add(std::string name, std::uint64_t flops) { entries.push_back({std::move(name), flops}); }
    void append(const FlopsReport& other, const std::string& prefix = {});
    std::uint64_t total() const;
    double mflops() const { return static_cast<double>(total()) / 1e6; }
};

}  // namespace nael::nn
