#include "nael/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "nael/binary_io.hpp"
#include "nael/error.hpp"

namespace nael::nn {

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors)
{
    io::ByteWriter w(out);
    w.bytes(std::string_view(kCheckpointMagic, 8));
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw Error("tensor name too long: " + name);
        if (t.rank() > std::numeric_limits<std::uint8_t>::max()) throw Error("tensor rank too large: " + name);
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.bytes(name);
        w.u8(static_cast<std::uint8_t>(t.rank()));
        for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
        for (double v : t.values()) w.f32(static_cast<float>(v));
    }
    w.check("checkpoint");
}

std::vector<NamedTensor> read_checkpoint(std::istream& in)
{
    io::ByteReader r(in);
    const std::string magic = r.bytes(8, "checkpoint magic");
    if (std::memcmp(magic.data(), kCheckpointMagic, 8) != 0) throw FormatError("bad checkpoint magic", 0);
    const std::size_t version_at = r.offset();
    if (r.u32("version") != kCheckpointVersion) throw FormatError("unsupported checkpoint version", version_at);
    const std::uint32_t count = r.u32("tensor count");
    std::vector<NamedTensor> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor nt;
        const std::uint16_t len = r.u16("name length");
        nt.name = r.bytes(len, "tensor name");
        const std::uint8_t rank = r.u8("rank");
        Shape shape(rank);
        for (auto& d : shape) d = r.u32("dimension");
        std::vector<double> data(shape_size(shape));
        for (double& v : data) v = r.f32("tensor data");
        nt.tensor = Tensor(std::move(shape), std::move(data));
        out.push_back(std::move(nt));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after checkpoint", r.offset());
    return out;
}

std::vector<NamedTensor> snapshot(const Registry& registry)
{
    std::vector<NamedTensor> out;
    for (const auto& ref : registry.refs()) out.push_back({ref.name, *ref.tensor});
    return out;
}

void save_checkpoint(const std::string& path, const Registry& registry)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    write_checkpoint(f, snapshot(registry));
}

void load_tensors(const std::vector<NamedTensor>& tensors, Registry& registry)
{
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& nt : tensors) by_name[nt.name] = &nt.tensor;
    for (const auto& ref : registry.refs()) {
        auto it = by_name.find(ref.name);
        if (it == by_name.end()) throw CompatibilityError("checkpoint is missing tensor " + ref.name);
        if (it->second->shape() != ref.tensor->shape())
            throw CompatibilityError("checkpoint tensor " + ref.name + " has shape " + shape_string(it->second->shape()) +
                        ", network expects " + shape_string(ref.tensor->shape()));
        *ref.tensor = *it->second;
    }
}

void load_checkpoint(const std::string& path, Registry& registry)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DependencyError("cannot open checkpoint " + path);
    load_tensors(read_checkpoint(f), registry);
}

void round_to_storage_precision(Registry& registry)
{
    for (const auto& ref : registry.refs())
        for (double& v : ref.tensor->values()) v = static_cast<float>(v);
}

}  // namespace nael::nn
