#include "nael/nn/flops.hpp"

namespace nael::nn {

std::uint64_t flops_of(const LayerSpec& layer, int out_h, int out_w)
{
    const std::uint64_t kh = layer.kernel_h, kw = layer.kernel_w;
    const std::uint64_t ci = layer.in_channels, co = layer.out_channels;
    const std::uint64_t spatial = static_cast<std::uint64_t>(out_h) * static_cast<std::uint64_t>(out_w);
    switch (layer.kind) {
    case LayerKind::sc_conv:
        return kh * kw * ci * co * spatial;
    case LayerKind::dw_conv:
        return kh * kw * ci * spatial;
    case LayerKind::pw_conv:
        return ci * co * spatial;
    case LayerKind::fc:
        return ci * co;
    case LayerKind::batchnorm:
    case LayerKind::relu6:
    case LayerKind::gap:
    case LayerKind::softmax:
        return 0;
    }
    return 0;
}

void FlopsReport::append(const FlopsReport& other, const std::string& prefix)
{
    for (const auto& e : other.entries) entries.push_back({prefix + e.name, e.flops});
}

std::uint64_t FlopsReport::total() const
{
    std::uint64_t t = 0;
    for (const auto& e : entries) t += e.flops;
    return t;
}

}  // namespace nael::nn
