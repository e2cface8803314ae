#include "tipscan/network.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "tipscan/error.hpp"
#include "tipscan/rng.hpp"

namespace tipscan {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

std::string to_string(const Shape4& s) {
    return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) +
           "," + std::to_string(s.w) + ")";
}

Tensor4::Tensor4(Shape4 shape, std::vector<double> values)
    : shape_(shape), values_(values.begin(), values.end()) {
    if (values_.size() != shape_.count()) {
        throw Error("tensor value count does not match shape " + to_string(shape_));
    }
}

void Tensor4::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor4::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor4::squared_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s;
}

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::avgpool_global: return "avgpool_global";
        case LayerKind::dense: return "dense";
        case LayerKind::residual_block: return "residual_block";
        case LayerKind::softmax_output: return "softmax_output";
    }
    return "?";
}

LayerSpec LayerSpec::conv2d(int out_channels, int kernel, int stride, int padding) {
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.conv = {out_channels, kernel, stride, padding};
    return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::maxpool(int window, int stride) {
    LayerSpec l;
    l.kind = LayerKind::maxpool;
    l.pool = {window, stride};
    return l;
}

LayerSpec LayerSpec::avgpool_global() {
    LayerSpec l;
    l.kind = LayerKind::avgpool_global;
    return l;
}

LayerSpec LayerSpec::dense(int out_features) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.out_features = out_features;
    return l;
}

LayerSpec LayerSpec::residual_block(int channels) {
    LayerSpec l;
    l.kind = LayerKind::residual_block;
    l.residual = {ConvSpec{channels, 3, 1, 1}, ConvSpec{channels, 3, 1, 1}};
    return l;
}

LayerSpec LayerSpec::softmax_output() {
    LayerSpec l;
    l.kind = LayerKind::softmax_output;
    return l;
}

namespace {

[[noreturn]] void bad_layer(std::size_t index, const std::string& why) {
    throw Error("layer " + std::to_string(index) + ": " + why);
}

Dims3 conv_dims(const Dims3& in, const ConvSpec& cs, std::size_t index) {
    if (cs.out_channels <= 0 || cs.kernel <= 0 || cs.stride <= 0 || cs.padding < 0) {
        bad_layer(index, "conv parameters must be positive");
    }
    if (cs.padding >= cs.kernel) bad_layer(index, "conv padding must be smaller than kernel");
    const int h = (in.h + 2 * cs.padding - cs.kernel) / cs.stride + 1;
    const int w = (in.w + 2 * cs.padding - cs.kernel) / cs.stride + 1;
    if (in.h + 2 * cs.padding < cs.kernel || in.w + 2 * cs.padding < cs.kernel || h <= 0 ||
        w <= 0) {
        bad_layer(index, "conv kernel larger than padded input");
    }
    return {cs.out_channels, h, w};
}

}  // namespace

std::vector<Dims3> infer_dims(const NetworkSpec& spec) {
    if (spec.input.c <= 0 || spec.input.h <= 0 || spec.input.w <= 0) {
        throw Error("network input dims must be positive");
    }
    if (spec.layers.empty()) throw Error("network has no layers");
    std::vector<Dims3> dims;
    Dims3 cur = spec.input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::conv2d:
                cur = conv_dims(cur, l.conv, i);
                break;
            case LayerKind::relu:
                break;
            case LayerKind::maxpool:
                if (l.pool.window <= 0 || l.pool.stride <= 0) {
                    bad_layer(i, "pool parameters must be positive");
                }
                if (l.pool.window > cur.h || l.pool.window > cur.w) {
                    bad_layer(i, "pool window larger than input");
                }
                cur = {cur.c, (cur.h - l.pool.window) / l.pool.stride + 1,
                       (cur.w - l.pool.window) / l.pool.stride + 1};
                break;
            case LayerKind::avgpool_global:
                cur = {cur.c, 1, 1};
                break;
            case LayerKind::dense:
                if (l.out_features <= 0) bad_layer(i, "dense out_features must be positive");
                cur = {l.out_features, 1, 1};
                break;
            case LayerKind::residual_block: {
                const Dims3 mid = conv_dims(cur, l.residual[0], i);
                const Dims3 out = conv_dims(mid, l.residual[1], i);
                if (!(mid == cur) || !(out == cur)) {
                    bad_layer(i, "residual block must preserve its input dims");
                }
                break;
            }
            case LayerKind::softmax_output:
                if (i + 1 != spec.layers.size()) bad_layer(i, "softmax_output must be last");
                break;
        }
        dims.push_back(cur);
    }
    if (!(cur == Dims3{spec.num_classes, 1, 1})) {
        throw Error("final layer must produce " + std::to_string(spec.num_classes) + " logits");
    }
    return dims;
}

NetworkSpec build_architecture(std::string_view name, int input_side) {
    if (input_side <= 0) throw Error("input side must be positive");
    NetworkSpec spec;
    spec.name = std::string(name);
    spec.input = {3, input_side, input_side};
    using L = LayerSpec;
    if (name == "mini_plain") {
        spec.layers = {L::conv2d(16), L::relu(),   L::maxpool(2),        L::conv2d(32),
                       L::relu(),     L::maxpool(2), L::avgpool_global(), L::dense(2)};
    } else if (name == "mini_resnet" || name == "mini_resnet_deep") {
        const int blocks = name == "mini_resnet" ? 2 : 8;
        spec.layers = {L::conv2d(16), L::relu(), L::maxpool(2)};
        for (int b = 0; b < blocks; ++b) spec.layers.push_back(L::residual_block(16));
        spec.layers.push_back(L::maxpool(2));
        spec.layers.push_back(L::avgpool_global());
        spec.layers.push_back(L::dense(2));
    } else {
        throw Error("unknown architecture '" + std::string(name) +
                    "' (expected mini_plain, mini_resnet or mini_resnet_deep)");
    }
    infer_dims(spec);
    return spec;
}

NetworkSpec strip_shortcuts(const NetworkSpec& spec) {
    NetworkSpec out = spec;
    out.name = spec.name + "_noskip";
    out.layers.clear();
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::residual_block) {
            out.layers.push_back(l);
            continue;
        }
        for (const auto& cs : l.residual) {
            out.layers.push_back(LayerSpec::conv2d(cs.out_channels, cs.kernel, cs.stride,
                                                   cs.padding));
            out.layers.push_back(LayerSpec::relu());
        }
    }
    infer_dims(out);
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) {
        for (const auto& t : layer) n += t.size();
    }
    return n;
}

bool ModelParams::same_shape(const ModelParams& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].size() != other.layers[i].size()) return false;
        for (std::size_t j = 0; j < layers[i].size(); ++j) {
            if (!(layers[i][j].shape() == other.layers[i][j].shape())) return false;
        }
    }
    return true;
}

bool ModelParams::all_finite() const {
    for (const auto& layer : layers) {
        for (const auto& t : layer) {
            if (!t.all_finite()) return false;
        }
    }
    return true;
}

ModelParams zeros_like(const ModelParams& params) {
    ModelParams out;
    out.layers.reserve(params.layers.size());
    for (const auto& layer : params.layers) {
        std::vector<Tensor4> ts;
        for (const auto& t : layer) ts.emplace_back(t.shape());
        out.layers.push_back(std::move(ts));
    }
    return out;
}

ModelParams allocate_params(const NetworkSpec& spec) {
    const auto dims = infer_dims(spec);
    ModelParams params;
    Dims3 in = spec.input;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        std::vector<Tensor4> ts;
        switch (l.kind) {
            case LayerKind::conv2d:
                ts.emplace_back(Shape4{l.conv.out_channels, in.c, l.conv.kernel, l.conv.kernel});
                ts.emplace_back(Shape4{1, l.conv.out_channels, 1, 1});
                break;
            case LayerKind::dense:
                ts.emplace_back(Shape4{l.out_features, in.c * in.h * in.w, 1, 1});
                ts.emplace_back(Shape4{1, l.out_features, 1, 1});
                break;
            case LayerKind::residual_block:
                for (const auto& cs : l.residual) {
                    ts.emplace_back(Shape4{cs.out_channels, in.c, cs.kernel, cs.kernel});
                    ts.emplace_back(Shape4{1, cs.out_channels, 1, 1});
                }
                break;
            default:
                break;
        }
        params.layers.push_back(std::move(ts));
        in = dims[i];
    }
    return params;
}

ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
    ModelParams params = allocate_params(spec);
    Rng rng(derive_seed(seed, "init"));
    for (auto& layer : params.layers) {
        // Weights sit at even positions, biases (left at zero) at odd ones.
        for (std::size_t j = 0; j < layer.size(); j += 2) {
            auto& w = layer[j];
            const auto& s = w.shape();
            const double fan_in = static_cast<double>(s.c) * s.h * s.w;
            const double stddev = std::sqrt(2.0 / fan_in);
            for (auto& v : w.values()) v = rng.normal() * stddev;
        }
    }
    return params;
}

namespace {

struct ConvGeom {
    int c, h, w;     // input
    int k, s, p;
    int oh, ow;      // output
    int cout;
    int rows() const { return c * k * k; }
    int cols() const { return oh * ow; }
};

ConvGeom conv_geom(const Shape4& in, const ConvSpec& cs) {
    ConvGeom g{in.c, in.h, in.w, cs.kernel, cs.stride, cs.padding, 0, 0, cs.out_channels};
    g.oh = (in.h + 2 * cs.padding - cs.kernel) / cs.stride + 1;
    g.ow = (in.w + 2 * cs.padding - cs.kernel) / cs.stride + 1;
    return g;
}

void im2col(const double* x, const ConvGeom& g, double* col) {
    const int cols = g.cols();
    for (int c = 0; c < g.c; ++c) {
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                double* row = col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * cols;
                for (int oy = 0; oy < g.oh; ++oy) {
                    const int iy = oy * g.s - g.p + ky;
                    double* dst = row + oy * g.ow;
                    if (iy < 0 || iy >= g.h) {
                        std::fill(dst, dst + g.ow, 0.0);
                        continue;
                    }
                    const double* src = x + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        const int ix = ox * g.s - g.p + kx;
                        dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double* col, const ConvGeom& g, double* dx) {
    const int cols = g.cols();
    std::fill(dx, dx + static_cast<std::size_t>(g.c) * g.h * g.w, 0.0);
    for (int c = 0; c < g.c; ++c) {
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                const double* row =
                    col + static_cast<std::size_t>((c * g.k + ky) * g.k + kx) * cols;
                for (int oy = 0; oy < g.oh; ++oy) {
                    const int iy = oy * g.s - g.p + ky;
                    if (iy < 0 || iy >= g.h) continue;
                    double* dst = dx + (static_cast<std::size_t>(c) * g.h + iy) * g.w;
                    const double* src = row + oy * g.ow;
                    for (int ox = 0; ox < g.ow; ++ox) {
                        const int ix = ox * g.s - g.p + kx;
                        if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

Tensor4 conv_forward(const Tensor4& x, const Tensor4& weight, const Tensor4& bias,
                     const ConvSpec& cs) {
    const ConvGeom g = conv_geom(x.shape(), cs);
    Tensor4 y(Shape4{x.shape().n, g.cout, g.oh, g.ow});
    AlignedDoubles col(static_cast<std::size_t>(g.rows()) * g.cols());
    ConstMapMat w(weight.data(), g.cout, g.rows());
    ConstMapVec b(bias.data(), g.cout);
    ConstMapMat colm(col.data(), g.rows(), g.cols());
    for (int n = 0; n < x.shape().n; ++n) {
        im2col(x.sample(n), g, col.data());
        MapMat out(y.sample(n), g.cout, g.cols());
        out.noalias() = w * colm;
        out.colwise() += b;
    }
    return y;
}

// Accumulates dW, db; writes dx when requested.
void conv_backward(const Tensor4& x, const Tensor4& weight, const ConvSpec& cs, const Tensor4& dy,
                   Tensor4& dweight, Tensor4& dbias, Tensor4* dx) {
    const ConvGeom g = conv_geom(x.shape(), cs);
    AlignedDoubles col(static_cast<std::size_t>(g.rows()) * g.cols());
    AlignedDoubles dcol(dx ? col.size() : 0);
    ConstMapMat w(weight.data(), g.cout, g.rows());
    MapMat dw(dweight.data(), g.cout, g.rows());
    MapVec db(dbias.data(), g.cout);
    ConstMapMat colm(col.data(), g.rows(), g.cols());
    if (dx) *dx = Tensor4(x.shape());
    for (int n = 0; n < x.shape().n; ++n) {
        ConstMapMat dout(dy.sample(n), g.cout, g.cols());
        im2col(x.sample(n), g, col.data());
        dw.noalias() += dout * colm.transpose();
        db += dout.rowwise().sum();
        if (dx) {
            MapMat dcolm(dcol.data(), g.rows(), g.cols());
            dcolm.noalias() = w.transpose() * dout;
            col2im(dcol.data(), g, dx->sample(n));
        }
    }
}

Tensor4 relu_forward(const Tensor4& x) {
    Tensor4 y = x;
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    return y;
}

// dy masked by pre > 0, in place.
void relu_backward_inplace(const Tensor4& pre, Tensor4& grad) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(pre[i] > 0.0)) grad[i] = 0.0;
    }
}

Tensor4 maxpool_forward(const Tensor4& x, const PoolSpec& ps, std::vector<std::size_t>* argmax) {
    const auto& s = x.shape();
    const int oh = (s.h - ps.window) / ps.stride + 1;
    const int ow = (s.w - ps.window) / ps.stride + 1;
    Tensor4 y(Shape4{s.n, s.c, oh, ow});
    if (argmax) argmax->assign(y.size(), 0);
    std::size_t o = 0;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const std::size_t plane = (static_cast<std::size_t>(n) * s.c + c) * s.h * s.w;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox, ++o) {
                    std::size_t best = plane + static_cast<std::size_t>(oy * ps.stride) * s.w +
                                       ox * ps.stride;
                    double best_v = x[best];
                    for (int ky = 0; ky < ps.window; ++ky) {
                        for (int kx = 0; kx < ps.window; ++kx) {
                            const std::size_t idx =
                                plane + static_cast<std::size_t>(oy * ps.stride + ky) * s.w +
                                ox * ps.stride + kx;
                            // Strict comparison keeps the first maximum in row-major order.
                            if (x[idx] > best_v) {
                                best_v = x[idx];
                                best = idx;
                            }
                        }
                    }
                    y[o] = best_v;
                    if (argmax) (*argmax)[o] = best;
                }
            }
        }
    }
    return y;
}

Tensor4 avgpool_forward(const Tensor4& x) {
    const auto& s = x.shape();
    Tensor4 y(Shape4{s.n, s.c, 1, 1});
    const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double sum = 0.0;
        const double* p = x.data() + i * plane;
        for (std::size_t j = 0; j < plane; ++j) sum += p[j];
        y[i] = sum / static_cast<double>(plane);
    }
    return y;
}

Tensor4 dense_forward(const Tensor4& x, const Tensor4& weight, const Tensor4& bias) {
    const int n = x.shape().n;
    const auto in = static_cast<Eigen::Index>(x.per_sample());
    const int out = weight.shape().n;
    Tensor4 y(Shape4{n, out, 1, 1});
    ConstMapMat xm(x.data(), n, in);
    ConstMapMat w(weight.data(), out, in);
    MapMat ym(y.data(), n, out);
    ym.noalias() = xm * w.transpose();
    ym.rowwise() += ConstMapVec(bias.data(), out).transpose();
    return y;
}

Tensor4 softmax_rows(const Tensor4& x) {
    Tensor4 y(x.shape());
    const int n = x.shape().n;
    const auto k = x.per_sample();
    for (int i = 0; i < n; ++i) {
        const double* row = x.sample(i);
        double* out = y.sample(i);
        const double m = *std::max_element(row, row + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += (out[j] = std::exp(row[j] - m));
        for (std::size_t j = 0; j < k; ++j) out[j] /= z;
    }
    return y;
}

}  // namespace

Tensor4 forward(const NetworkSpec& spec, const ModelParams& params, const Tensor4& batch,
                ForwardCache* cache) {
    const auto& s = batch.shape();
    if (s.n < 1 || s.c != spec.input.c || s.h != spec.input.h || s.w != spec.input.w) {
        throw Error("batch shape " + to_string(s) + " does not match network input (" +
                    std::to_string(spec.input.c) + "," + std::to_string(spec.input.h) + "," +
                    std::to_string(spec.input.w) + ")");
    }
    if (params.layers.size() != spec.layers.size()) {
        throw Error("parameter set does not match network spec");
    }
    if (!batch.all_finite()) throw Error("non-finite value in input batch");
    if (cache) {
        cache->layers.assign(spec.layers.size(), LayerCache{});
        cache->input_shape = s;
    }
    Tensor4 x = batch;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        const auto& p = params.layers[i];
        LayerCache* lc = cache ? &cache->layers[i] : nullptr;
        Tensor4 y;
        switch (l.kind) {
            case LayerKind::conv2d:
                y = conv_forward(x, p[0], p[1], l.conv);
                break;
            case LayerKind::relu:
                y = relu_forward(x);
                break;
            case LayerKind::maxpool:
                y = maxpool_forward(x, l.pool, lc ? &lc->argmax : nullptr);
                break;
            case LayerKind::avgpool_global:
                y = avgpool_forward(x);
                break;
            case LayerKind::dense:
                y = dense_forward(x, p[0], p[1]);
                break;
            case LayerKind::residual_block: {
                Tensor4 pre1 = conv_forward(x, p[0], p[1], l.residual[0]);
                Tensor4 pre2 = conv_forward(relu_forward(pre1), p[2], p[3], l.residual[1]);
                for (std::size_t j = 0; j < pre2.size(); ++j) pre2[j] += x[j];
                y = relu_forward(pre2);
                if (lc) {
                    lc->pre1 = std::move(pre1);
                    lc->pre2 = std::move(pre2);
                }
                break;
            }
            case LayerKind::softmax_output:
                y = softmax_rows(x);
                if (lc) lc->output = y;
                break;
        }
        if (lc) lc->input = std::move(x);
        x = std::move(y);
    }
    if (!x.all_finite()) throw Error("non-finite activation in network output");
    return x;
}

ModelParams backward(const NetworkSpec& spec, const ModelParams& params, const ForwardCache& cache,
                     const Tensor4& dlogits, Tensor4* dinput) {
    if (cache.layers.size() != spec.layers.size() || params.layers.size() != spec.layers.size()) {
        throw Error("activation cache does not match network spec");
    }
    if (dlogits.shape() != Shape4{cache.input_shape.n, spec.num_classes, 1, 1}) {
        throw Error("dlogits shape " + to_string(dlogits.shape()) + " does not match the cached batch");
    }
    ModelParams grads = zeros_like(params);
    Tensor4 g = dlogits;
    for (std::size_t idx = spec.layers.size(); idx-- > 0;) {
        const auto& l = spec.layers[idx];
        const auto& p = params.layers[idx];
        auto& gp = grads.layers[idx];
        const LayerCache& lc = cache.layers[idx];
        const bool need_dx = idx > 0 || dinput != nullptr;
        Tensor4 dx;
        switch (l.kind) {
            case LayerKind::conv2d:
                conv_backward(lc.input, p[0], l.conv, g, gp[0], gp[1], need_dx ? &dx : nullptr);
                break;
            case LayerKind::relu:
                dx = std::move(g);
                relu_backward_inplace(lc.input, dx);
                break;
            case LayerKind::maxpool:
                dx = Tensor4(lc.input.shape());
                for (std::size_t o = 0; o < g.size(); ++o) dx[lc.argmax[o]] += g[o];
                break;
            case LayerKind::avgpool_global: {
                dx = Tensor4(lc.input.shape());
                const std::size_t plane =
                    static_cast<std::size_t>(lc.input.shape().h) * lc.input.shape().w;
                const double scale = 1.0 / static_cast<double>(plane);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double* d = dx.data() + i * plane;
                    std::fill(d, d + plane, g[i] * scale);
                }
                break;
            }
            case LayerKind::dense: {
                const int n = lc.input.shape().n;
                const auto in = static_cast<Eigen::Index>(lc.input.per_sample());
                const int out = p[0].shape().n;
                ConstMapMat dy(g.data(), n, out);
                ConstMapMat xm(lc.input.data(), n, in);
                MapMat(gp[0].data(), out, in).noalias() = dy.transpose() * xm;
                MapVec(gp[1].data(), out) = dy.colwise().sum().transpose();
                if (need_dx) {
                    dx = Tensor4(lc.input.shape());
                    MapMat(dx.data(), n, in).noalias() = dy * ConstMapMat(p[0].data(), out, in);
                }
                break;
            }
            case LayerKind::residual_block: {
                Tensor4 dpre2 = std::move(g);
                relu_backward_inplace(lc.pre2, dpre2);
                Tensor4 dmid;
                conv_backward(relu_forward(lc.pre1), p[2], l.residual[1], dpre2, gp[2], gp[3],
                              &dmid);
                relu_backward_inplace(lc.pre1, dmid);
                Tensor4 dbranch;
                conv_backward(lc.input, p[0], l.residual[0], dmid, gp[0], gp[1],
                              need_dx ? &dbranch : nullptr);
                if (need_dx) {
                    dx = std::move(dpre2);
                    for (std::size_t j = 0; j < dx.size(); ++j) dx[j] += dbranch[j];
                }
                break;
            }
            case LayerKind::softmax_output: {
                dx = Tensor4(g.shape());
                const auto k = g.per_sample();
                for (int n = 0; n < g.shape().n; ++n) {
                    const double* y = lc.output.sample(n);
                    const double* dy = g.sample(n);
                    double dot = 0.0;
                    for (std::size_t j = 0; j < k; ++j) dot += dy[j] * y[j];
                    double* d = dx.sample(n);
                    for (std::size_t j = 0; j < k; ++j) d[j] = y[j] * (dy[j] - dot);
                }
                break;
            }
        }
        g = std::move(dx);
    }
    if (dinput) *dinput = std::move(g);
    return grads;
}

}  // namespace tipscan
