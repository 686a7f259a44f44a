#include "nael/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "nael/error.hpp"

namespace nael::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct ConvGeom {
    int n = 0, ci = 0, h = 0, w = 0;
    int co = 0, kh = 0, kw = 0;
    int ho = 0, wo = 0;
    int stride = 1, pad = 0;

    std::size_t in_plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t out_plane() const { return static_cast<std::size_t>(ho) * wo; }
};

[[noreturn]] void shape_error(const char* op, const std::string& detail)
{
    throw ShapeError(std::string(op) + ": " + detail);
}

ConvGeom conv_geometry(const Tensor& x, int co, int ci_kernel, int kh, int kw, int stride, int pad,
                       const char* op)
{
    if (x.rank() != 4) shape_error(op, "input must be NCHW, got " + shape_string(x.shape()));
    if (stride != 1 && stride != 2) shape_error(op, "stride must be 1 or 2");
    if (pad < 0) shape_error(op, "padding must be non-negative");
    ConvGeom g;
    g.n = static_cast<int>(x.dim(0));
    g.ci = static_cast<int>(x.dim(1));
    g.h = static_cast<int>(x.dim(2));
    g.w = static_cast<int>(x.dim(3));
    if (ci_kernel != g.ci)
        shape_error(op, "kernel expects " + std::to_string(ci_kernel) + " input channels, input has " +
                            std::to_string(g.ci));
    g.co = co;
    g.kh = kh;
    g.kw = kw;
    g.stride = stride;
    g.pad = pad;
    g.ho = kernels::conv_output_size(g.h, kh, stride, pad);
    g.wo = kernels::conv_output_size(g.w, kw, stride, pad);
    if (g.ho <= 0 || g.wo <= 0) shape_error(op, "kernel larger than padded input");
    return g;
}

// Output indices o with o*stride - pad + k inside [0, in).
std::pair<int, int> valid_range(int in, int out, int k, int stride, int pad)
{
    const int lo_num = pad - k;
    const int lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
    const int hi_num = in - 1 + pad - k;
    const int hi = hi_num < 0 ? 0 : std::min(out, hi_num / stride + 1);
    return {lo, std::max(lo, hi)};
}

void im2col(const double* x, const ConvGeom& g, double* col)
{
    const std::size_t plane = g.out_plane();
    for (int c = 0; c < g.ci; ++c) {
        const double* xc = x + c * g.in_plane();
        for (int kh = 0; kh < g.kh; ++kh) {
            for (int kw = 0; kw < g.kw; ++kw) {
                double* row = col + ((static_cast<std::size_t>(c) * g.kh + kh) * g.kw + kw) * plane;
                std::fill(row, row + plane, 0.0);
                const auto [oh0, oh1] = valid_range(g.h, g.ho, kh, g.stride, g.pad);
                const auto [ow0, ow1] = valid_range(g.w, g.wo, kw, g.stride, g.pad);
                for (int oh = oh0; oh < oh1; ++oh) {
                    const double* xr = xc + static_cast<std::size_t>(oh * g.stride - g.pad + kh) * g.w;
                    double* r = row + static_cast<std::size_t>(oh) * g.wo;
                    for (int ow = ow0; ow < ow1; ++ow) r[ow] = xr[ow * g.stride - g.pad + kw];
                }
            }
        }
    }
}

void col2im(const double* col, const ConvGeom& g, double* dx)
{
    const std::size_t plane = g.out_plane();
    for (int c = 0; c < g.ci; ++c) {
        double* dxc = dx + c * g.in_plane();
        for (int kh = 0; kh < g.kh; ++kh) {
            for (int kw = 0; kw < g.kw; ++kw) {
                const double* row = col + ((static_cast<std::size_t>(c) * g.kh + kh) * g.kw + kw) * plane;
                const auto [oh0, oh1] = valid_range(g.h, g.ho, kh, g.stride, g.pad);
                const auto [ow0, ow1] = valid_range(g.w, g.wo, kw, g.stride, g.pad);
                for (int oh = oh0; oh < oh1; ++oh) {
                    double* xr = dxc + static_cast<std::size_t>(oh * g.stride - g.pad + kh) * g.w;
                    const double* r = row + static_cast<std::size_t>(oh) * g.wo;
                    for (int ow = ow0; ow < ow1; ++ow) xr[ow * g.stride - g.pad + kw] += r[ow];
                }
            }
        }
    }
}

ConvGeom conv2d_geometry(const Tensor& x, const Tensor& w, int stride, int pad)
{
    if (w.rank() != 4) shape_error("conv2d", "kernel must be [Co, Ci, Kh, Kw]");
    return conv_geometry(x, static_cast<int>(w.dim(0)), static_cast<int>(w.dim(1)),
                         static_cast<int>(w.dim(2)), static_cast<int>(w.dim(3)), stride, pad, "conv2d");
}

ConvGeom depthwise_geometry(const Tensor& x, const Tensor& w, int stride, int pad)
{
    if (w.rank() != 3) shape_error("depthwise_conv2d", "kernel must be [C, Kh, Kw]");
    return conv_geometry(x, static_cast<int>(w.dim(0)), static_cast<int>(w.dim(0)),
                         static_cast<int>(w.dim(1)), static_cast<int>(w.dim(2)), stride, pad,
                         "depthwise_conv2d");
}

void check_pointwise(const Tensor& x, const Tensor& w)
{
    if (x.rank() != 4) shape_error("pointwise_conv2d", "input must be NCHW");
    if (w.rank() != 2) shape_error("pointwise_conv2d", "kernel must be [Co, Ci]");
    if (w.dim(1) != x.dim(1))
        shape_error("pointwise_conv2d", "kernel expects " + std::to_string(w.dim(1)) +
                                            " input channels, input has " + std::to_string(x.dim(1)));
}

void check_linear(const Tensor& x, const Tensor& w, const Tensor& b)
{
    if (x.rank() != 2) shape_error("linear", "input must be [N, In], got " + shape_string(x.shape()));
    if (w.rank() != 2 || w.dim(1) != x.dim(1))
        shape_error("linear", "weight " + shape_string(w.shape()) + " does not match input " +
                                  shape_string(x.shape()));
    if (b.rank() != 1 || b.dim(0) != w.dim(0)) shape_error("linear", "bias does not match weight rows");
}

void check_same(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.shape() != b.shape())
        shape_error(op, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

}  // namespace

namespace kernels {

int conv_output_size(int in, int kernel, int stride, int pad) { return (in + 2 * pad - kernel) / stride + 1; }

Tensor conv2d(const Tensor& x, const Tensor& w, int stride, int pad)
{
    const ConvGeom g = conv2d_geometry(x, w, stride, pad);
    Tensor y({static_cast<std::size_t>(g.n), static_cast<std::size_t>(g.co),
              static_cast<std::size_t>(g.ho), static_cast<std::size_t>(g.wo)});
    const int k = g.ci * g.kh * g.kw;
    const int plane = static_cast<int>(g.out_plane());
    std::vector<double> col(static_cast<std::size_t>(k) * plane);
    ConstMatMap wm(w.data(), g.co, k);
    for (int n = 0; n < g.n; ++n) {
        im2col(x.data() + n * g.ci * g.in_plane(), g, col.data());
        MatMap(y.data() + n * g.co * g.out_plane(), g.co, plane).noalias() =
            wm * ConstMatMap(col.data(), k, plane);
    }
    return y;
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& w, int stride, int pad)
{
    const ConvGeom g = depthwise_geometry(x, w, stride, pad);
    Tensor y({static_cast<std::size_t>(g.n), static_cast<std::size_t>(g.co),
              static_cast<std::size_t>(g.ho), static_cast<std::size_t>(g.wo)});
    for (int n = 0; n < g.n; ++n) {
        for (int c = 0; c < g.ci; ++c) {
            const double* xc = x.data() + (static_cast<std::size_t>(n) * g.ci + c) * g.in_plane();
            double* yc = y.data() + (static_cast<std::size_t>(n) * g.ci + c) * g.out_plane();
            const double* wc = w.data() + static_cast<std::size_t>(c) * g.kh * g.kw;
            for (int kh = 0; kh < g.kh; ++kh) {
                const auto [oh0, oh1] = valid_range(g.h, g.ho, kh, g.stride, g.pad);
                for (int kw = 0; kw < g.kw; ++kw) {
                    const auto [ow0, ow1] = valid_range(g.w, g.wo, kw, g.stride, g.pad);
                    const double wv = wc[kh * g.kw + kw];
                    for (int oh = oh0; oh < oh1; ++oh) {
                        const double* xr =
                            xc + static_cast<std::size_t>(oh * g.stride - g.pad + kh) * g.w - g.pad + kw;
                        double* yr = yc + static_cast<std::size_t>(oh) * g.wo;
                        if (g.stride == 1) {
                            for (int ow = ow0; ow < ow1; ++ow) yr[ow] += wv * xr[ow];
                        } else {
                            for (int ow = ow0; ow < ow1; ++ow) yr[ow] += wv * xr[2 * ow];
                        }
                    }
                }
            }
        }
    }
    return y;
}

Tensor pointwise_conv2d(const Tensor& x, const Tensor& w)
{
    check_pointwise(x, w);
    const auto n = x.dim(0), ci = x.dim(1), co = w.dim(0);
    const auto plane = x.dim(2) * x.dim(3);
    Tensor y({n, co, x.dim(2), x.dim(3)});
    ConstMatMap wm(w.data(), co, ci);
    for (std::size_t i = 0; i < n; ++i)
        MatMap(y.data() + i * co * plane, co, plane).noalias() =
            wm * ConstMatMap(x.data() + i * ci * plane, ci, plane);
    return y;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b)
{
    check_linear(x, w, b);
    const auto n = x.dim(0), in = x.dim(1), out = w.dim(0);
    Tensor y({n, out});
    MatMap ym(y.data(), n, out);
    ym.noalias() = ConstMatMap(x.data(), n, in) * ConstMatMap(w.data(), out, in).transpose();
    ym.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data(), out);
    return y;
}

Tensor relu6(const Tensor& x)
{
    Tensor y = x;
    for (double& v : y.values()) v = std::min(std::max(v, 0.0), 6.0);
    return y;
}

Tensor global_avg_pool(const Tensor& x)
{
    if (x.rank() != 4) shape_error("global_avg_pool", "input must be NCHW");
    const auto n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor y({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
        double acc = 0.0;
        const double* p = x.data() + i * plane;
        for (std::size_t j = 0; j < plane; ++j) acc += p[j];
        y[i] = acc / static_cast<double>(plane);
    }
    return y;
}

Tensor softmax(const Tensor& logits)
{
    if (logits.rank() != 2) shape_error("softmax", "logits must be [N, K]");
    const auto n = logits.dim(0), k = logits.dim(1);
    Tensor p(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = logits.data() + i * k;
        double* q = p.data() + i * k;
        const double mx = *std::max_element(z, z + k);
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) total += (q[j] = std::exp(z[j] - mx));
        for (std::size_t j = 0; j < k; ++j) q[j] /= total;
    }
    return p;
}

}  // namespace kernels

Value conv2d(Value x, Value w, int stride, int pad)
{
    Graph& gr = x.graph();
    Tensor y = kernels::conv2d(x.value(), w.value(), stride, pad);
    const ConvGeom g = conv2d_geometry(x.value(), w.value(), stride, pad);
    return gr.record(std::move(y), {x, w}, [x, w, g](Graph& graph, const Tensor& dy) {
        const int k = g.ci * g.kh * g.kw;
        const int plane = static_cast<int>(g.out_plane());
        std::vector<double> col(static_cast<std::size_t>(k) * plane);
        const Tensor& xv = graph.value(x);
        const Tensor& wv = graph.value(w);
        const bool need_w = graph.requires_grad(w);
        const bool need_x = graph.requires_grad(x);
        for (int n = 0; n < g.n; ++n) {
            ConstMatMap dyn(dy.data() + n * g.co * g.out_plane(), g.co, plane);
            if (need_w) {
                im2col(xv.data() + n * g.ci * g.in_plane(), g, col.data());
                MatMap(graph.grad_accumulator(w).data(), g.co, k).noalias() +=
                    dyn * ConstMatMap(col.data(), k, plane).transpose();
            }
            if (need_x) {
                MatMap(col.data(), k, plane).noalias() = ConstMatMap(wv.data(), g.co, k).transpose() * dyn;
                col2im(col.data(), g, graph.grad_accumulator(x).data() + n * g.ci * g.in_plane());
            }
        }
    });
}

Value depthwise_conv2d(Value x, Value w, int stride, int pad)
{
    Graph& gr = x.graph();
    Tensor y = kernels::depthwise_conv2d(x.value(), w.value(), stride, pad);
    const ConvGeom g = depthwise_geometry(x.value(), w.value(), stride, pad);
    return gr.record(std::move(y), {x, w}, [x, w, g](Graph& graph, const Tensor& dy) {
        const Tensor& xv = graph.value(x);
        const Tensor& wv = graph.value(w);
        double* dw = graph.requires_grad(w) ? graph.grad_accumulator(w).data() : nullptr;
        double* dx = graph.requires_grad(x) ? graph.grad_accumulator(x).data() : nullptr;
        for (int n = 0; n < g.n; ++n) {
            for (int c = 0; c < g.ci; ++c) {
                const std::size_t in_off = (static_cast<std::size_t>(n) * g.ci + c) * g.in_plane();
                const double* dyc = dy.data() + (static_cast<std::size_t>(n) * g.ci + c) * g.out_plane();
                const double* xc = xv.data() + in_off;
                const double* wc = wv.data() + static_cast<std::size_t>(c) * g.kh * g.kw;
                for (int kh = 0; kh < g.kh; ++kh) {
                    const auto [oh0, oh1] = valid_range(g.h, g.ho, kh, g.stride, g.pad);
                    for (int kw = 0; kw < g.kw; ++kw) {
                        const auto [ow0, ow1] = valid_range(g.w, g.wo, kw, g.stride, g.pad);
                        const double wk = wc[kh * g.kw + kw];
                        double acc = 0.0;
                        for (int oh = oh0; oh < oh1; ++oh) {
                            const std::size_t row =
                                static_cast<std::size_t>(oh * g.stride - g.pad + kh) * g.w - g.pad + kw;
                            const double* dyr = dyc + static_cast<std::size_t>(oh) * g.wo;
                            const double* xr = xc + row;
                            for (int ow = ow0; ow < ow1; ++ow) acc += dyr[ow] * xr[ow * g.stride];
                            if (dx) {
                                double* dxr = dx + in_off + row;
                                for (int ow = ow0; ow < ow1; ++ow) dxr[ow * g.stride] += wk * dyr[ow];
                            }
                        }
                        if (dw) dw[static_cast<std::size_t>(c) * g.kh * g.kw + kh * g.kw + kw] += acc;
                    }
                }
            }
        }
    });
}

Value pointwise_conv2d(Value x, Value w)
{
    Graph& gr = x.graph();
    Tensor y = kernels::pointwise_conv2d(x.value(), w.value());
    return gr.record(std::move(y), {x, w}, [x, w](Graph& graph, const Tensor& dy) {
        const Tensor& xv = graph.value(x);
        const Tensor& wv = graph.value(w);
        const auto n = xv.dim(0), ci = xv.dim(1), co = wv.dim(0);
        const auto plane = xv.dim(2) * xv.dim(3);
        const bool need_w = graph.requires_grad(w);
        const bool need_x = graph.requires_grad(x);
        for (std::size_t i = 0; i < n; ++i) {
            ConstMatMap dyn(dy.data() + i * co * plane, co, plane);
            if (need_w)
                MatMap(graph.grad_accumulator(w).data(), co, ci).noalias() +=
                    dyn * ConstMatMap(xv.data() + i * ci * plane, ci, plane).transpose();
            if (need_x)
                MatMap(graph.grad_accumulator(x).data() + i * ci * plane, ci, plane).noalias() +=
                    ConstMatMap(wv.data(), co, ci).transpose() * dyn;
        }
    });
}

Value linear(Value x, Value w, Value b)
{
    Graph& gr = x.graph();
    Tensor y = kernels::linear(x.value(), w.value(), b.value());
    return gr.record(std::move(y), {x, w, b}, [x, w, b](Graph& graph, const Tensor& dy) {
        const Tensor& xv = graph.value(x);
        const Tensor& wv = graph.value(w);
        const auto n = xv.dim(0), in = xv.dim(1), out = wv.dim(0);
        ConstMatMap dym(dy.data(), n, out);
        if (graph.requires_grad(w))
            MatMap(graph.grad_accumulator(w).data(), out, in).noalias() +=
                dym.transpose() * ConstMatMap(xv.data(), n, in);
        if (graph.requires_grad(b))
            Eigen::Map<Eigen::RowVectorXd>(graph.grad_accumulator(b).data(), out) += dym.colwise().sum();
        if (graph.requires_grad(x))
            MatMap(graph.grad_accumulator(x).data(), n, in).noalias() += dym * ConstMatMap(wv.data(), out, in);
    });
}

Value batch_norm(Value x, Value gamma, Value beta, BatchNormState& state, Mode mode)
{
    const Tensor& xv = x.value();
    if (xv.rank() != 2 && xv.rank() != 4)
        shape_error("batch_norm", "input must be [N, C] or [N, C, H, W], got " + shape_string(xv.shape()));
    const auto n = xv.dim(0), c = xv.dim(1);
    const std::size_t inner = xv.rank() == 4 ? xv.dim(2) * xv.dim(3) : 1;
    require_shape(gamma.value(), {c}, "batch_norm gamma");
    require_shape(beta.value(), {c}, "batch_norm beta");
    require_shape(state.running_mean, {c}, "batch_norm running mean");
    require_shape(state.running_var, {c}, "batch_norm running variance");
    if (mode == Mode::train && n < 2) throw ShapeError("batch_norm: train mode needs a batch of at least 2");

    const double count = static_cast<double>(n * inner);
    std::vector<double> mean(c), inv_std(c);
    if (mode == Mode::train) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* p = xv.data() + (i * c + ch) * inner;
                for (std::size_t s = 0; s < inner; ++s) m += p[s];
            }
            m /= count;
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* p = xv.data() + (i * c + ch) * inner;
                for (std::size_t s = 0; s < inner; ++s) v += (p[s] - m) * (p[s] - m);
            }
            v /= count;
            mean[ch] = m;
            inv_std[ch] = 1.0 / std::sqrt(v + state.eps);
            const double unbiased = v * count / (count - 1.0);
            state.running_mean[ch] = (1.0 - state.momentum) * state.running_mean[ch] + state.momentum * m;
            state.running_var[ch] = (1.0 - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
        }
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            mean[ch] = state.running_mean[ch];
            inv_std[ch] = 1.0 / std::sqrt(state.running_var[ch] + state.eps);
        }
    }

    Tensor xhat(xv.shape());
    Tensor y(xv.shape());
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (i * c + ch) * inner;
            for (std::size_t s = 0; s < inner; ++s) {
                const double h = (xv[off + s] - mean[ch]) * inv_std[ch];
                xhat[off + s] = h;
                y[off + s] = gv[ch] * h + bv[ch];
            }
        }
    }

    Graph& gr = x.graph();
    return gr.record(std::move(y), {x, gamma, beta},
                     [x, gamma, beta, mode, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c,
                      inner](Graph& graph, const Tensor& dy) {
                         const double count = static_cast<double>(n * inner);
                         std::vector<double> dbeta(c, 0.0), dgamma(c, 0.0);
                         for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t ch = 0; ch < c; ++ch) {
                                 const std::size_t off = (i * c + ch) * inner;
                                 for (std::size_t s = 0; s < inner; ++s) {
                                     dbeta[ch] += dy[off + s];
                                     dgamma[ch] += dy[off + s] * xhat[off + s];
                                 }
                             }
                         if (graph.requires_grad(gamma)) {
                             Tensor& acc = graph.grad_accumulator(gamma);
                             for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += dgamma[ch];
                         }
                         if (graph.requires_grad(beta)) {
                             Tensor& acc = graph.grad_accumulator(beta);
                             for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += dbeta[ch];
                         }
                         if (!graph.requires_grad(x)) return;
                         const Tensor& gv = graph.value(gamma);
                         Tensor& dx = graph.grad_accumulator(x);
                         for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t ch = 0; ch < c; ++ch) {
                                 const std::size_t off = (i * c + ch) * inner;
                                 const double scale = gv[ch] * inv_std[ch];
                                 if (mode == Mode::train) {
                                     const double mb = dbeta[ch] / count;
                                     const double mg = dgamma[ch] / count;
                                     for (std::size_t s = 0; s < inner; ++s)
                                         dx[off + s] += scale * (dy[off + s] - mb - xhat[off + s] * mg);
                                 } else {
                                     for (std::size_t s = 0; s < inner; ++s) dx[off + s] += scale * dy[off + s];
                                 }
                             }
                     });
}

Value relu6(Value x)
{
    Graph& gr = x.graph();
    return gr.record(kernels::relu6(x.value()), {x}, [x](Graph& graph, const Tensor& dy) {
        const Tensor& xv = graph.value(x);
        Tensor& dx = graph.grad_accumulator(x);
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (xv[i] > 0.0 && xv[i] < 6.0) dx[i] += dy[i];
    });
}

Value relu(Value x)
{
    Graph& gr = x.graph();
    Tensor y = x.value();
    for (double& v : y.values()) v = std::max(v, 0.0);
    return gr.record(std::move(y), {x}, [x](Graph& graph, const Tensor& dy) {
        const Tensor& xv = graph.value(x);
        Tensor& dx = graph.grad_accumulator(x);
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (xv[i] > 0.0) dx[i] += dy[i];
    });
}

Value add(Value a, Value b)
{
    check_same(a.value(), b.value(), "add");
    Tensor y = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
    Graph& gr = a.graph();
    return gr.record(std::move(y), {a, b}, [a, b](Graph& graph, const Tensor& dy) {
        for (Value v : {a, b}) {
            if (!graph.requires_grad(v)) continue;
            Tensor& acc = graph.grad_accumulator(v);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += dy[i];
        }
    });
}

Value mul(Value a, Value b)
{
    check_same(a.value(), b.value(), "mul");
    Tensor y = a.value();
    const Tensor& bv = b.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
    Graph& gr = a.graph();
    return gr.record(std::move(y), {a, b}, [a, b](Graph& graph, const Tensor& dy) {
        const Tensor& av = graph.value(a);
        const Tensor& bv = graph.value(b);
        if (graph.requires_grad(a)) {
            Tensor& acc = graph.grad_accumulator(a);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += dy[i] * bv[i];
        }
        if (graph.requires_grad(b)) {
            Tensor& acc = graph.grad_accumulator(b);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += dy[i] * av[i];
        }
    });
}

Value sum(Value x)
{
    Graph& gr = x.graph();
    return gr.record(Tensor::scalar(x.value().sum()), {x}, [x](Graph& graph, const Tensor& dy) {
        Tensor& acc = graph.grad_accumulator(x);
        for (double& v : acc.values()) v += dy[0];
    });
}

Value global_avg_pool(Value x)
{
    Graph& gr = x.graph();
    return gr.record(kernels::global_avg_pool(x.value()), {x}, [x](Graph& graph, const Tensor& dy) {
        Tensor& dx = graph.grad_accumulator(x);
        const auto& s = graph.value(x).shape();
        const std::size_t plane = s[2] * s[3];
        const double inv = 1.0 / static_cast<double>(plane);
        for (std::size_t i = 0; i < dy.size(); ++i) {
            double* p = dx.data() + i * plane;
            const double g = dy[i] * inv;
            for (std::size_t j = 0; j < plane; ++j) p[j] += g;
        }
    });
}

Value flatten(Value x)
{
    const Tensor& xv = x.value();
    if (xv.rank() < 2) shape_error("flatten", "input needs a batch axis");
    Tensor y = xv.reshaped({xv.dim(0), xv.size() / xv.dim(0)});
    Graph& gr = x.graph();
    return gr.record(std::move(y), {x}, [x](Graph& graph, const Tensor& dy) {
        Tensor& acc = graph.grad_accumulator(x);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += dy[i];
    });
}

Value softmax_cross_entropy(Value logits, std::span<const int> labels, std::span<const double> class_weights)
{
    const Tensor& z = logits.value();
    if (z.rank() != 2) shape_error("softmax_cross_entropy", "logits must be [N, K]");
    const auto n = z.dim(0), k = z.dim(1);
    if (labels.size() != n) shape_error("softmax_cross_entropy", "one label per row required");
    if (!class_weights.empty() && class_weights.size() != k)
        shape_error("softmax_cross_entropy", "one weight per class required");
    for (int label : labels)
        if (label < 0 || static_cast<std::size_t>(label) >= k)
            throw ParameterError("softmax_cross_entropy: label " + std::to_string(label) + " outside [0, " +
                                 std::to_string(k) + ")");

    Tensor p = kernels::softmax(z);
    std::vector<double> w(n, 1.0);
    double total_w = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto y = static_cast<std::size_t>(labels[i]);
        if (!class_weights.empty()) w[i] = class_weights[y];
        total_w += w[i];
        // log-sum-exp form keeps the loss finite for saturated logits
        const double* zi = z.data() + i * k;
        const double mx = *std::max_element(zi, zi + k);
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += std::exp(zi[j] - mx);
        loss += w[i] * (mx + std::log(s) - zi[y]);
    }
    if (!(total_w > 0.0)) throw NumericError("softmax_cross_entropy: total class weight is zero");
    loss /= total_w;

    std::vector<int> lab(labels.begin(), labels.end());
    Graph& gr = logits.graph();
    return gr.record(Tensor::scalar(loss), {logits},
                     [logits, p = std::move(p), lab = std::move(lab), w = std::move(w), total_w, k](
                         Graph& graph, const Tensor& dy) {
                         Tensor& dz = graph.grad_accumulator(logits);
                         for (std::size_t i = 0; i < lab.size(); ++i) {
                             const double scale = dy[0] * w[i] / total_w;
                             for (std::size_t j = 0; j < k; ++j) {
                                 const double target = static_cast<std::size_t>(lab[i]) == j ? 1.0 : 0.0;
                                 dz[i * k + j] += scale * (p[i * k + j] - target);
                             }
                         }
                     });
}

}  // namespace nael::nn
