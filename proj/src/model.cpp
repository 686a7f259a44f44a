#include "nael/model.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "nael/error.hpp"
#include "nael/parallel.hpp"

namespace nael::model {

namespace {

using nn::FlopsReport;
using nn::LayerKind;

std::string stage_name(int s, int b) { return "stage" + std::to_string(s) + ".block" + std::to_string(b); }

int stage_output(int size, const FEStageConfig& st) { return nn::kernels::conv_output_size(size, 3, st.stride, 1); }

void validate_stage(const FEStageConfig& s, const char* what)
{
    if (s.c_out < 1 || s.alpha < 1 || s.repeats < 1 || (s.stride != 1 && s.stride != 2))
        throw ParameterError(std::string(what) + ": stage needs c_out >= 1, alpha >= 1, repeats >= 1, stride 1 or 2");
}

}  // namespace

void NetworkConfig::validate() const
{
    if (input_size < 8 || sc_channels < 1 || prn_ce_channels < 1 || arn_ce_channels < 1 || num_classes < 2)
        throw ParameterError("network config: sizes must be positive and num_classes >= 2");
    if (prn_stages.empty() || arn_stages.empty()) throw ParameterError("network config: empty stage list");
    for (const auto& s : prn_stages) validate_stage(s, "prn");
    for (const auto& s : arn_stages) validate_stage(s, "arn");
    if (arn_reuse_point < 0 || arn_reuse_point >= static_cast<int>(prn_stages.size()))
        throw ParameterError("network config: arn_reuse_point outside the PRN stages");
    const int m = prn_map_size();
    if (nan_dims[0] != m * m || nan_dims[3] != 2)
        throw ParameterError("network config: NAN must map " + std::to_string(m * m) + " inputs to 2 outputs");
    if (arn_map_size() < 1) throw ParameterError("network config: ARN downsamples below 1x1");
}

int NetworkConfig::prn_stage_size(int stage) const
{
    int size = nn::kernels::conv_output_size(input_size, 3, 2, 1);
    for (int s = 0; s <= stage; ++s) size = stage_output(size, prn_stages[s]);
    return size;
}

int NetworkConfig::prn_stage_channels(int stage) const { return prn_stages[stage].c_out; }

int NetworkConfig::prn_map_size() const { return prn_stage_size(static_cast<int>(prn_stages.size()) - 1); }

int NetworkConfig::arn_map_size() const
{
    int size = prn_stage_size(arn_reuse_point);
    for (const auto& s : arn_stages) size = stage_output(size, s);
    return size;
}

SCBlock::SCBlock(int in_channels, int out_channels) : conv(in_channels, out_channels, 3, 2, 1), bn(out_channels) {}

Value SCBlock::forward(Graph& g, Value x, Mode mode) const
{
    return nn::relu6(bn.forward(g, conv.forward(g, x), mode));
}

void SCBlock::collect(const std::string& prefix, nn::Registry& r)
{
    conv.collect(prefix + ".conv", r);
    bn.collect(prefix + ".bn", r);
}

void SCBlock::flops(FlopsReport& report, const std::string& prefix, int in_size) const
{
    const int out = nn::kernels::conv_output_size(in_size, 3, conv.stride, conv.pad);
    report.add(prefix + ".conv", nn::flops_of(conv.spec(), out, out));
}

FEBlock::FEBlock(int in_channels, int out_channels, int alpha, int stride, bool skip_)
    : expand(in_channels, alpha * in_channels),
      bn_expand(alpha * in_channels),
      dw(alpha * in_channels, 3, stride, 1),
      bn_dw(alpha * in_channels),
      project(alpha * in_channels, out_channels),
      bn_project(out_channels),
      skip(skip_)
{
    if (skip && (stride != 1 || in_channels != out_channels))
        throw ParameterError("FE block: a skip connection needs stride 1 and equal channels");
}

Value FEBlock::forward(Graph& g, Value x, Mode mode) const
{
    Value h = nn::relu6(bn_expand.forward(g, expand.forward(g, x), mode));
    h = nn::relu6(bn_dw.forward(g, dw.forward(g, h), mode));
    h = bn_project.forward(g, project.forward(g, h), mode);
    return skip ? nn::add(h, x) : h;
}

void FEBlock::init(nn::Rng& rng)
{
    expand.init(rng);
    dw.init(rng);
    project.init(rng);
}

void FEBlock::collect(const std::string& prefix, nn::Registry& r)
{
    expand.collect(prefix + ".expand", r);
    bn_expand.collect(prefix + ".bn_expand", r);
    dw.collect(prefix + ".dw", r);
    bn_dw.collect(prefix + ".bn_dw", r);
    project.collect(prefix + ".project", r);
    bn_project.collect(prefix + ".bn_project", r);
}

int FEBlock::flops(FlopsReport& report, const std::string& prefix, int in_size) const
{
    const int out = nn::kernels::conv_output_size(in_size, 3, dw.stride, dw.pad);
    report.add(prefix + ".expand", nn::flops_of(expand.spec(), in_size, in_size));
    report.add(prefix + ".dw", nn::flops_of(dw.spec(), out, out));
    report.add(prefix + ".project", nn::flops_of(project.spec(), out, out));
    return out;
}

CEBlock::CEBlock(int in_channels, int out_channels) : conv(in_channels, out_channels), bn(out_channels) {}

Value CEBlock::forward(Graph& g, Value x, Mode mode) const
{
    return nn::relu6(bn.forward(g, conv.forward(g, x), mode));
}

void CEBlock::collect(const std::string& prefix, nn::Registry& r)
{
    conv.collect(prefix + ".conv", r);
    bn.collect(prefix + ".bn", r);
}

void CEBlock::flops(FlopsReport& report, const std::string& prefix, int size) const
{
    report.add(prefix + ".conv", nn::flops_of(conv.spec(), size, size));
}

std::vector<FEBlock> make_stage(int in_channels, const FEStageConfig& config)
{
    std::vector<FEBlock> blocks;
    blocks.emplace_back(in_channels, config.c_out, config.alpha, config.stride, false);
    for (int r = 1; r < config.repeats; ++r) blocks.emplace_back(config.c_out, config.c_out, config.alpha, 1, true);
    return blocks;
}

namespace {

Value run_stage(Graph& g, const std::vector<FEBlock>& blocks, Value x, Mode mode)
{
    for (const auto& b : blocks) x = b.forward(g, x, mode);
    return x;
}

std::vector<std::vector<FEBlock>> make_stages(int in_channels, const std::vector<FEStageConfig>& configs)
{
    std::vector<std::vector<FEBlock>> out;
    for (const auto& c : configs) {
        out.push_back(make_stage(in_channels, c));
        in_channels = c.c_out;
    }
    return out;
}

}  // namespace

Prn::Prn(const NetworkConfig& config_)
    : config((config_.validate(), config_)),
      sc(1, config.sc_channels),
      stages(make_stages(config.sc_channels, config.prn_stages)),
      ce(config.prn_stages.back().c_out, config.prn_ce_channels),
      fc(config.prn_ce_channels, config.num_classes)
{
}

PrnOutput Prn::forward(Graph& g, Value input, Mode mode, bool watch_feature_map) const
{
    const auto& s = input.shape();
    const auto side = static_cast<std::size_t>(config.input_size);
    if (s.size() != 4 || s[1] != 1 || s[2] != side || s[3] != side)
        throw ShapeError("PRN input must be [N, 1, " + std::to_string(side) + ", " + std::to_string(side) + "], got " +
                         nn::shape_string(s));
    PrnOutput out;
    Value x = sc.forward(g, input, mode);
    for (const auto& stage : stages) {
        x = run_stage(g, stage, x, mode);
        out.stages.push_back(x);
    }
    out.feature_map = ce.forward(g, x, mode);
    if (watch_feature_map) out.feature_map = g.watch(out.feature_map);
    out.logits = fc.forward(g, nn::global_avg_pool(out.feature_map));
    return out;
}

void Prn::init(nn::Rng& rng)
{
    sc.init(rng);
    for (auto& st : stages)
        for (auto& b : st) b.init(rng);
    ce.init(rng);
    fc.init(rng);
}

nn::Registry Prn::registry()
{
    nn::Registry r;
    sc.collect("sc", r);
    for (std::size_t s = 0; s < stages.size(); ++s)
        for (std::size_t b = 0; b < stages[s].size(); ++b)
            stages[s][b].collect(stage_name(static_cast<int>(s), static_cast<int>(b)), r);
    ce.collect("ce", r);
    fc.collect("fc", r);
    return r;
}

FlopsReport Prn::flops() const
{
    FlopsReport r;
    sc.flops(r, "prn.sc", config.input_size);
    int size = nn::kernels::conv_output_size(config.input_size, 3, 2, 1);
    for (std::size_t s = 0; s < stages.size(); ++s)
        for (std::size_t b = 0; b < stages[s].size(); ++b)
            size = stages[s][b].flops(r, "prn." + stage_name(static_cast<int>(s), static_cast<int>(b)), size);
    ce.flops(r, "prn.ce", size);
    r.add("prn.fc", nn::flops_of(fc.spec(), 1, 1));
    return r;
}

Arn::Arn(const NetworkConfig& config_)
    : config((config_.validate(), config_)),
      stages(make_stages(config.prn_stage_channels(config.arn_reuse_point), config.arn_stages)),
      ce(config.arn_stages.back().c_out, config.arn_ce_channels),
      fc(config.arn_ce_channels, config.num_classes)
{
}

Value Arn::forward(Graph& g, Value reused, Mode mode) const
{
    const auto& s = reused.shape();
    const auto c = static_cast<std::size_t>(config.prn_stage_channels(config.arn_reuse_point));
    const auto side = static_cast<std::size_t>(config.prn_stage_size(config.arn_reuse_point));
    if (s.size() != 4 || s[1] != c || s[2] != side || s[3] != side)
        throw ShapeError("ARN input must be the reused PRN stage output [N, " + std::to_string(c) + ", " +
                         std::to_string(side) + ", " + std::to_string(side) + "], got " + nn::shape_string(s));
    Value x = reused;
    for (const auto& stage : stages) x = run_stage(g, stage, x, mode);
    return fc.forward(g, nn::global_avg_pool(ce.forward(g, x, mode)));
}

void Arn::init(nn::Rng& rng)
{
    for (auto& st : stages)
        for (auto& b : st) b.init(rng);
    ce.init(rng);
    fc.init(rng);
}

nn::Registry Arn::registry()
{
    nn::Registry r;
    for (std::size_t s = 0; s < stages.size(); ++s)
        for (std::size_t b = 0; b < stages[s].size(); ++b)
            stages[s][b].collect(stage_name(static_cast<int>(s), static_cast<int>(b)), r);
    ce.collect("ce", r);
    fc.collect("fc", r);
    return r;
}

FlopsReport Arn::flops() const
{
    FlopsReport r;
    int size = config.prn_stage_size(config.arn_reuse_point);
    for (std::size_t s = 0; s < stages.size(); ++s)
        for (std::size_t b = 0; b < stages[s].size(); ++b)
            size = stages[s][b].flops(r, "arn." + stage_name(static_cast<int>(s), static_cast<int>(b)), size);
    ce.flops(r, "arn.ce", size);
    r.add("arn.fc", nn::flops_of(fc.spec(), 1, 1));
    return r;
}

Nan::Nan(const NetworkConfig& config_)
    : config((config_.validate(), config_)),
      fc1(config.nan_dims[0], config.nan_dims[1]),
      bn1(config.nan_dims[1]),
      fc2(config.nan_dims[1], config.nan_dims[2]),
      bn2(config.nan_dims[2]),
      fc3(config.nan_dims[2], config.nan_dims[3])
{
}

Value Nan::forward(Graph& g, Value maps, Mode mode) const
{
    Value x = maps.shape().size() == 2 ? maps : nn::flatten(maps);
    if (x.shape()[1] != static_cast<std::size_t>(config.nan_dims[0]))
        throw ShapeError("NAN input must hold " + std::to_string(config.nan_dims[0]) + " values per sample, got " +
                         nn::shape_string(maps.shape()));
    x = nn::relu6(bn1.forward(g, fc1.forward(g, x), mode));
    x = nn::relu6(bn2.forward(g, fc2.forward(g, x), mode));
    return fc3.forward(g, x);
}

void Nan::init(nn::Rng& rng)
{
    fc1.init(rng);
    fc2.init(rng);
    fc3.init(rng);
}

nn::Registry Nan::registry()
{
    nn::Registry r;
    fc1.collect("fc1", r);
    bn1.collect("bn1", r);
    fc2.collect("fc2", r);
    bn2.collect("bn2", r);
    fc3.collect("fc3", r);
    return r;
}

FlopsReport Nan::flops() const
{
    FlopsReport r;
    r.add("nan.fc1", nn::flops_of(fc1.spec(), 1, 1));
    r.add("nan.fc2", nn::flops_of(fc2.spec(), 1, 1));
    r.add("nan.fc3", nn::flops_of(fc3.spec(), 1, 1));
    return r;
}

Tensor tfi_tensor(const tfa::TFI& tfi)
{
    if (!tfi.normalized) throw Error("network input must be a normalized TFI");
    if (tfi.height <= 0 || tfi.width <= 0 ||
        tfi.values.size() != static_cast<std::size_t>(tfi.height) * static_cast<std::size_t>(tfi.width))
        throw ShapeError("TFI dimensions do not match its value count");
    return Tensor({1, 1, static_cast<std::size_t>(tfi.height), static_cast<std::size_t>(tfi.width)}, tfi.values);
}

Tensor importance_weights(Graph& g, const PrnOutput& out, std::span<const int> classes)
{
    if (!out.feature_map.valid() || !out.logits.valid())
        throw StateError("importance weights need a recorded PRN forward pass");
    if (!g.requires_grad(out.feature_map))
        throw StateError("importance weights need the feature map to be watched");
    const auto& ls = out.logits.shape();
    if (classes.size() != ls[0]) throw ShapeError("importance weights: one class per sample is required");
    Tensor seed(ls);
    for (std::size_t n = 0; n < ls[0]; ++n) {
        if (classes[n] < 0 || static_cast<std::size_t>(classes[n]) >= ls[1])
            throw ParameterError("importance weights: class index out of range");
        seed[n * ls[1] + static_cast<std::size_t>(classes[n])] = 1.0;
    }
    g.backward(out.logits, seed);
    return nn::kernels::global_avg_pool(g.grad(out.feature_map));
}

std::vector<double> importance_weights_closed_form(const nn::Linear& fc, int c, int height, int width)
{
    const auto& w = fc.weight.value;
    if (c < 0 || static_cast<std::size_t>(c) >= w.dim(0)) throw ParameterError("class index out of range");
    std::vector<double> out(w.dim(1));
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = w[static_cast<std::size_t>(c) * w.dim(1) + k] / (height * width);
    return out;
}

std::vector<GradientMap> gradient_maps(const Tensor& feature_map, const Tensor& weights, std::span<const int> classes)
{
    if (feature_map.rank() != 4) throw ShapeError("gradient map: feature map must be [N, C, H, W]");
    const std::size_t n = feature_map.dim(0), c = feature_map.dim(1), h = feature_map.dim(2), w = feature_map.dim(3);
    nn::require_shape(weights, {n, c}, "gradient map weights");
    if (classes.size() != n) throw ShapeError("gradient map: one class per sample is required");
    std::vector<GradientMap> maps(n);
    const std::size_t plane = h * w;
    for (std::size_t b = 0; b < n; ++b) {
        GradientMap& m = maps[b];
        m.height = static_cast<int>(h);
        m.width = static_cast<int>(w);
        m.class_index = classes[b];
        m.values.assign(plane, 0.0);
        for (std::size_t k = 0; k < c; ++k) {
            const double wk = weights[b * c + k];
            const double* f = feature_map.data() + (b * c + k) * plane;
            for (std::size_t i = 0; i < plane; ++i) m.values[i] += f[i] * wk;
        }
        for (double& v : m.values) v = std::max(v, 0.0);
        m.f_max = f_max(m);
    }
    return maps;
}

int f_max(std::span<const double> values, int height, int width)
{
    if (height <= 0 || width <= 0 || values.size() != static_cast<std::size_t>(height) * width)
        throw ShapeError("f_max: map dimensions do not match its value count");
    int best = 0;
    double best_sum = -1.0;
    for (int r = 0; r < height; ++r) {
        double s = 0.0;
        for (int c = 0; c < width; ++c) s += values[static_cast<std::size_t>(r) * width + c];
        if (s > best_sum) {
            best_sum = s;
            best = r;
        }
    }
    return best;
}

int f_max(const GradientMap& map) { return f_max(map.values, map.height, map.width); }

bool is_center_row(int row, int height) { return row == height / 2 - 1 || row == height / 2; }

void write_map_csv(std::ostream& out, const GradientMap& map)
{
    const auto old = out.precision(17);
    for (int r = 0; r < map.height; ++r) {
        for (int c = 0; c < map.width; ++c) out << (c ? "," : "") << map.at(r, c);
        out << '\n';
    }
    out.precision(old);
}

void write_map_pgm(std::ostream& out, const GradientMap& map)
{
    tfa::write_pgm(out, map.values, map.height, map.width);
}

std::uint64_t gradient_map_flops(const NetworkConfig& config)
{
    return static_cast<std::uint64_t>(config.prn_ce_channels) * static_cast<std::uint64_t>(config.num_classes);
}

NaelNetworks::NaelNetworks(const NetworkConfig& config_) : config(config_), prn(config), nan(config), arn(config) {}

CostModel cost_model(const NaelNetworks& nets)
{
    return {nets.prn.flops().total() + gradient_map_flops(nets.config) + nets.nan.flops().total(),
            nets.arn.flops().total()};
}

nn::FlopsReport flops_report(const NaelNetworks& nets)
{
    FlopsReport r = nets.prn.flops();
    r.add("gradient_map", gradient_map_flops(nets.config));
    r.append(nets.nan.flops());
    r.append(nets.arn.flops());
    return r;
}

Tensor slice_batch(const Tensor& t, std::size_t begin, std::size_t end)
{
    if (t.rank() == 0 || begin > end || end > t.dim(0)) throw ShapeError("slice_batch: rows out of range");
    nn::Shape s = t.shape();
    const std::size_t row = t.size() / s[0];
    s[0] = end - begin;
    return Tensor(s, std::vector<double>(t.data() + begin * row, t.data() + end * row));
}

Tensor gather_batch(const Tensor& t, std::span<const std::size_t> rows)
{
    nn::Shape s = t.shape();
    const std::size_t row = t.size() / s[0];
    s[0] = rows.size();
    Tensor out(s);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= t.dim(0)) throw ShapeError("gather_batch: row out of range");
        std::copy_n(t.data() + rows[i] * row, row, out.data() + i * row);
    }
    return out;
}

int argmax_row(const Tensor& t, std::size_t row)
{
    const std::size_t w = t.dim(1);
    const double* p = t.data() + row * w;
    return static_cast<int>(std::max_element(p, p + w) - p);
}

namespace {

void infer_chunk(const NaelNetworks& nets, const Tensor& inputs, const InferOptions& options, const CostModel& cost,
                 std::vector<NaelDecision>& decisions, std::size_t begin)
{
    const std::size_t n = inputs.dim(0);
    Graph g;
    const PrnOutput out = nets.prn.forward(g, g.constant(inputs), Mode::infer, true);
    const Tensor& logits = out.logits.value();
    std::vector<int> classes(n);
    for (std::size_t i = 0; i < n; ++i) classes[i] = argmax_row(logits, i);
    const Tensor weights = importance_weights(g, out, classes);
    std::vector<GradientMap> maps = gradient_maps(out.feature_map.value(), weights, classes);

    Tensor map_batch({n, maps[0].values.size()});
    for (std::size_t i = 0; i < n; ++i) std::copy(maps[i].values.begin(), maps[i].values.end(), map_batch.data() + i * map_batch.dim(1));
    Graph ng;
    const Tensor nan_probs = nn::kernels::softmax(nets.nan.forward(ng, ng.constant(map_batch), Mode::infer).value());

    std::vector<std::size_t> arn_rows;
    for (std::size_t i = 0; i < n; ++i) {
        NaelDecision& d = decisions[begin + i];
        d.prn_class = classes[i];
        d.predicted_class = classes[i];
        d.nan_probs = {nan_probs[i * 2], nan_probs[i * 2 + 1]};
        switch (options.routing) {
        case Routing::nan: d.used_arn = d.nan_probs[kUnreliable] > d.nan_probs[kReliable]; break;
        case Routing::always_reliable: d.used_arn = false; break;
        case Routing::always_unreliable: d.used_arn = true; break;
        }
        d.flops_spent = cost.base + (d.used_arn ? cost.marginal : 0);
        d.map = std::move(maps[i]);
        if (d.used_arn || options.arn_for_all) arn_rows.push_back(i);
    }
    if (arn_rows.empty()) return;

    const Tensor& reused = out.stages[static_cast<std::size_t>(nets.config.arn_reuse_point)].value();
    Graph ag;
    const Tensor arn_logits = nets.arn
                                  .forward(ag,
                                           ag.constant(arn_rows.size() == n ? reused : gather_batch(reused, arn_rows)),
                                           Mode::infer)
                                  .value();
    for (std::size_t j = 0; j < arn_rows.size(); ++j) {
        NaelDecision& d = decisions[begin + arn_rows[j]];
        d.arn_class = argmax_row(arn_logits, j);
        if (d.used_arn) d.predicted_class = d.arn_class;
    }
}

}  // namespace

std::vector<NaelDecision> nael_infer(const NaelNetworks& nets, const Tensor& inputs, const InferOptions& options)
{
    if (inputs.rank() != 4) throw ShapeError("nael_infer: inputs must be [N, 1, H, W]");
    const std::size_t n = inputs.dim(0);
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    const CostModel cost = cost_model(nets);
    std::vector<NaelDecision> decisions(n);
    const std::size_t chunks = (n + batch - 1) / batch;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t begin = c * batch, end = std::min(n, begin + batch);
        infer_chunk(nets, slice_batch(inputs, begin, end), options, cost, decisions, begin);
    });
    return decisions;
}

NaelDecision nael_infer(const NaelNetworks& nets, const tfa::TFI& tfi, const InferOptions& options)
{
    return nael_infer(nets, tfi_tensor(tfi), options).front();
}

}  // namespace nael::model
