#include "qn/arch.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "qn/detail/kernels.hpp"
#include "qn/rng.hpp"

namespace qn {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense_conv: return "dense_conv";
        case LayerKind::depthwise_conv: return "depthwise_conv";
        case LayerKind::pointwise_conv: return "pointwise_conv";
        case LayerKind::prelu: return "prelu";
        case LayerKind::leaky_relu: return "leaky_relu";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::gap: return "gap";
        case LayerKind::dropout: return "dropout";
        case LayerKind::softmax: return "softmax";
    }
    return "unknown";
}

bool is_conv_kind(LayerKind k) {
    return k == LayerKind::dense_conv || k == LayerKind::depthwise_conv || k == LayerKind::pointwise_conv;
}

std::vector<Tensor*> LayerSpec::param_tensors() {
    std::vector<Tensor*> out;
    switch (kind) {
        case LayerKind::dense_conv:
        case LayerKind::depthwise_conv:
        case LayerKind::pointwise_conv: {
            ConvParams& c = conv();
            out.push_back(&c.kernel);
            if (c.bias) out.push_back(&*c.bias);
            break;
        }
        case LayerKind::prelu:
            out.push_back(&prelu().slopes);
            break;
        case LayerKind::batchnorm:
            out.push_back(&bn().gamma);
            out.push_back(&bn().beta);
            break;
        default:
            break;
    }
    return out;
}

std::vector<const Tensor*> LayerSpec::param_tensors() const {
    auto list = const_cast<LayerSpec*>(this)->param_tensors();
    return {list.begin(), list.end()};
}

std::int64_t ModelGraph::num_params() const { return param_count(*this).trainable; }

ArchConfig reference_config() { return ArchConfig{}; }

ArchConfig desk2_config() {
    ArchConfig cfg;
    cfg.stem_filters = 32;
    cfg.base_filters = 32;
    cfg.doubling_period = 1;
    cfg.num_blocks = 2;
    return cfg;
}

namespace {

Tensor he_normal(const Shape& shape, int fan_in, Rng& rng) {
    Tensor t(shape);
    const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
    for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0f, stddev);
    return t;
}

LayerSpec make_bn_layer(int c) {
    BNParams p;
    p.gamma = Tensor(Shape{c}, 1.0f);
    p.beta = Tensor(Shape{c}, 0.0f);
    p.running_mean = Tensor(Shape{c}, 0.0f);
    p.running_var = Tensor(Shape{c}, 1.0f);
    return LayerSpec{LayerKind::batchnorm, p};
}

LayerSpec make_prelu_layer(int c) {
    PReLUParams p;
    p.slopes = Tensor(Shape{c}, 0.25f);
    return LayerSpec{LayerKind::prelu, p};
}

int boundary_count(const ArchConfig& cfg) { return (cfg.num_blocks - 1) / cfg.doubling_period; }

ModelGraph build_impl(const ArchConfig& cfg, std::uint64_t seed, bool dense_blocks) {
    if (cfg.stem_filters < 1 || cfg.base_filters < 1 || cfg.doubling_period < 1 || cfg.num_blocks < 1 ||
        cfg.num_classes < 1 || cfg.stem_kernel < 1 || cfg.block_kernel < 1) {
        throw std::invalid_argument("build_quicknet: all architecture knobs must be positive");
    }
    if (cfg.input_shape.rank() != 3) {
        throw std::invalid_argument("build_quicknet: input_shape must be rank 3 (C, H, W)");
    }
    if (cfg.block_kernel % 2 == 0) {
        throw std::invalid_argument("build_quicknet: block kernel must be odd for same padding");
    }
    if (!cfg.downsample.empty() &&
        static_cast<int>(cfg.downsample.size()) != boundary_count(cfg)) {
        throw std::invalid_argument("build_quicknet: downsample schedule must have one entry per doubling boundary (" +
                                    std::to_string(boundary_count(cfg)) + ")");
    }

    ModelGraph g;
    g.mode = GraphMode::train;
    g.input_shape = cfg.input_shape;
    Rng rng(derive_seed(seed, 0x71CB));

    int c = cfg.input_shape.dim(0);
    const int ks = cfg.stem_kernel;

    ConvParams stem;
    stem.kernel = he_normal(Shape{cfg.stem_filters, c, ks, ks}, c * ks * ks, rng);
    stem.padding = Padding::valid;
    g.layers.push_back(LayerSpec{LayerKind::dense_conv, stem});
    g.layers.push_back(make_bn_layer(cfg.stem_filters));
    g.layers.push_back(make_prelu_layer(cfg.stem_filters));
    c = cfg.stem_filters;

    const int kb = cfg.block_kernel;
    int boundary = 0;
    for (int i = 0; i < cfg.num_blocks; ++i) {
        const int stage = i / cfg.doubling_period;
        const int filters = cfg.base_filters << stage;
        if (i > 0 && stage > (i - 1) / cfg.doubling_period) {
            const Downsample ds = cfg.downsample.empty() ? Downsample::maxpool
                                                         : cfg.downsample[static_cast<size_t>(boundary)];
            if (ds == Downsample::maxpool) g.layers.push_back(LayerSpec{LayerKind::maxpool, NoParams{}});
            ++boundary;
        }
        if (dense_blocks) {
            ConvParams dense;
            dense.kernel = he_normal(Shape{filters, c, kb, kb}, c * kb * kb, rng);
            dense.padding = Padding::same;
            g.layers.push_back(LayerSpec{LayerKind::dense_conv, dense});
        } else {
            ConvParams dw;
            dw.kernel = he_normal(Shape{c, 1, kb, kb}, c * kb * kb, rng);  // dense-equivalent fan-in
            dw.padding = Padding::same;
            g.layers.push_back(LayerSpec{LayerKind::depthwise_conv, dw});
            ConvParams pw;
            pw.kernel = he_normal(Shape{filters, c, 1, 1}, c, rng);
            g.layers.push_back(LayerSpec{LayerKind::pointwise_conv, pw});
        }
        g.layers.push_back(make_bn_layer(filters));
        g.layers.push_back(make_prelu_layer(filters));
        c = filters;
    }

    g.layers.push_back(LayerSpec{LayerKind::gap, NoParams{}});
    g.layers.push_back(LayerSpec{LayerKind::dropout, DropoutParams{cfg.dropout_rate}});
    ConvParams head;
    head.kernel = he_normal(Shape{cfg.num_classes, c, 1, 1}, c, rng);
    head.bias = Tensor(Shape{cfg.num_classes}, 0.0f);
    g.layers.push_back(LayerSpec{LayerKind::pointwise_conv, head});
    g.layers.push_back(LayerSpec{LayerKind::softmax, NoParams{}});

    layer_output_shapes(g, 1);  // rejects spatial collapse before anything runs
    return g;
}

}  // namespace

ModelGraph build_quicknet(const ArchConfig& cfg, std::uint64_t seed) { return build_impl(cfg, seed, false); }

ModelGraph build_dense_equivalent(const ArchConfig& cfg, std::uint64_t seed) {
    return build_impl(cfg, seed, true);
}

namespace {

[[noreturn]] void shape_error(size_t idx, LayerKind kind, const std::string& msg) {
    throw std::invalid_argument("layer " + std::to_string(idx) + " (" + layer_kind_name(kind) + "): " + msg);
}

}  // namespace

std::vector<Shape> layer_output_shapes(const ModelGraph& g, int batch) {
    if (batch < 1) throw std::invalid_argument("layer_output_shapes: batch must be >= 1");
    if (g.input_shape.rank() != 3) throw std::invalid_argument("layer_output_shapes: input_shape must be rank 3");
    int c = g.input_shape.dim(0), h = g.input_shape.dim(1), w = g.input_shape.dim(2);

    std::vector<Shape> out;
    out.reserve(g.layers.size());
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& l = g.layers[i];
        switch (l.kind) {
            case LayerKind::dense_conv:
            case LayerKind::pointwise_conv:
            case LayerKind::depthwise_conv: {
                const ConvParams& p = l.conv();
                const int k = p.kernel.shape().dim(2);
                const int cin = l.kind == LayerKind::depthwise_conv ? p.kernel.shape().dim(0)
                                                                    : p.kernel.shape().dim(1);
                if (cin != c) shape_error(i, l.kind, "expects " + std::to_string(cin) + " channels, got " + std::to_string(c));
                int pad = 0;
                if (p.padding == Padding::same) {
                    if (k % 2 == 0) shape_error(i, l.kind, "same padding requires odd kernel");
                    pad = (k - 1) / 2;
                } else if (h < k || w < k) {
                    shape_error(i, l.kind, "spatial " + std::to_string(h) + "x" + std::to_string(w) +
                                               " smaller than kernel " + std::to_string(k));
                }
                h = conv_out_dim(h, k, p.stride, pad);
                w = conv_out_dim(w, k, p.stride, pad);
                if (h < 1 || w < 1) shape_error(i, l.kind, "spatial size collapsed");
                c = p.kernel.shape().dim(0);
                break;
            }
            case LayerKind::prelu:
                if (l.prelu().slopes.size() != c) shape_error(i, l.kind, "slope count does not match channels");
                break;
            case LayerKind::leaky_relu:
                if (static_cast<int>(l.leaky().alphas.size()) != c) shape_error(i, l.kind, "alpha count does not match channels");
                break;
            case LayerKind::batchnorm:
                if (l.bn().gamma.size() != c) shape_error(i, l.kind, "channel count does not match");
                break;
            case LayerKind::maxpool:
                if (h % 2 != 0 || w % 2 != 0) {
                    shape_error(i, l.kind, "needs even spatial dims, got " + std::to_string(h) + "x" + std::to_string(w));
                }
                h /= 2;
                w /= 2;
                break;
            case LayerKind::gap:
                h = 1;
                w = 1;
                break;
            case LayerKind::dropout:
            case LayerKind::softmax:
                break;
        }
        out.push_back(Shape{batch, c, h, w});
    }
    return out;
}

namespace {

Tensor softmax_channels(const Tensor& logits) {
    const int batch = logits.shape().dim(0);
    const int k = logits.shape().dim(1);
    Tensor out(logits.shape());
    std::vector<int> zeros(static_cast<size_t>(batch), 0);
    detail::softmax_xent_raw(logits.data(), batch, k, zeros.data(), out.data());
    return out;
}

Tensor forward_impl(const ModelGraph& g, const Tensor& x, bool stop_before_softmax) {
    Tensor cur = x;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& l = g.layers[i];
        switch (l.kind) {
            case LayerKind::dense_conv: cur = conv2d(cur, l.conv(), ConvKind::dense); break;
            case LayerKind::depthwise_conv: cur = conv2d(cur, l.conv(), ConvKind::depthwise); break;
            case LayerKind::pointwise_conv: cur = conv2d(cur, l.conv(), ConvKind::pointwise); break;
            case LayerKind::prelu: cur = prelu(cur, l.prelu()); break;
            case LayerKind::leaky_relu: cur = leaky_relu(cur, l.leaky().alphas); break;
            case LayerKind::batchnorm: cur = batchnorm_infer(cur, l.bn()); break;
            case LayerKind::maxpool: cur = maxpool2d(cur); break;
            case LayerKind::gap: cur = global_avg_pool(cur); break;
            case LayerKind::dropout: break;  // identity outside training
            case LayerKind::softmax:
                if (stop_before_softmax && i + 1 == g.layers.size()) return cur;
                cur = softmax_channels(cur);
                break;
        }
    }
    return cur;
}

}  // namespace

Tensor forward(const ModelGraph& g, const Tensor& x) { return forward_impl(g, x, false); }

Tensor forward_logits(const ModelGraph& g, const Tensor& x) { return forward_impl(g, x, true); }

ModelGraph fold_for_inference(const ModelGraph& g) {
    if (g.mode != GraphMode::train) {
        throw std::invalid_argument("fold_for_inference: graph is already folded");
    }
    ModelGraph out;
    out.mode = GraphMode::infer_folded;
    out.input_shape = g.input_shape;
    out.norm = g.norm;
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& l = g.layers[i];
        switch (l.kind) {
            case LayerKind::batchnorm: {
                if (out.layers.empty() || !is_conv_kind(out.layers.back().kind)) {
                    throw std::invalid_argument("fold_for_inference: batchnorm at layer " + std::to_string(i) +
                                                " has no preceding conv to fold into");
                }
                out.layers.back().conv() = fold_bn_into_conv(out.layers.back().conv(), l.bn());
                break;
            }
            case LayerKind::prelu:
                out.layers.push_back(LayerSpec{LayerKind::leaky_relu, LeakyParams{fold_prelu(l.prelu())}});
                break;
            case LayerKind::dropout:
                break;
            default:
                out.layers.push_back(l);
                break;
        }
    }
    return out;
}

ParamCountReport param_count(const ModelGraph& g) {
    ParamCountReport r;
    for (const LayerSpec& l : g.layers) {
        LayerParamCount row;
        row.kind = layer_kind_name(l.kind);
        switch (l.kind) {
            case LayerKind::dense_conv:
            case LayerKind::depthwise_conv:
            case LayerKind::pointwise_conv:
                row.trainable = l.conv().kernel.size() + (l.conv().bias ? l.conv().bias->size() : 0);
                break;
            case LayerKind::prelu:
                row.trainable = l.prelu().slopes.size();
                break;
            case LayerKind::batchnorm:
                row.trainable = l.bn().gamma.size() + l.bn().beta.size();
                row.non_trainable = l.bn().running_mean.size() + l.bn().running_var.size();
                break;
            case LayerKind::leaky_relu:
                row.non_trainable = static_cast<std::int64_t>(l.leaky().alphas.size());
                break;
            default:
                break;
        }
        r.per_layer.push_back(row);
        r.trainable += row.trainable;
        r.non_trainable += row.non_trainable;
    }
    return r;
}

FlopCountReport flop_count(const ModelGraph& g, int batch) {
    FlopCountReport r;
    const std::vector<Shape> shapes = layer_output_shapes(g, batch);
    int c = g.input_shape.dim(0), h = g.input_shape.dim(1), w = g.input_shape.dim(2);
    for (size_t i = 0; i < g.layers.size(); ++i) {
        const LayerSpec& l = g.layers[i];
        const Shape& os = shapes[i];
        const std::uint64_t out_elems = static_cast<std::uint64_t>(os.count());
        const std::uint64_t in_elems = static_cast<std::uint64_t>(batch) * c * h * w;
        LayerFlopCount row;
        row.kind = layer_kind_name(l.kind);
        row.out_shape = os;
        switch (l.kind) {
            case LayerKind::dense_conv: {
                const int k = l.conv().kernel.shape().dim(2);
                row.macs = static_cast<std::uint64_t>(k) * k * c * os.dim(1) *
                           static_cast<std::uint64_t>(os.dim(2)) * os.dim(3) * batch;
                row.flops = 2 * row.macs;
                break;
            }
            case LayerKind::depthwise_conv: {
                const int k = l.conv().kernel.shape().dim(2);
                row.macs = static_cast<std::uint64_t>(k) * k * c * static_cast<std::uint64_t>(os.dim(2)) *
                           os.dim(3) * batch;
                row.flops = 2 * row.macs;
                break;
            }
            case LayerKind::pointwise_conv:
                row.macs = static_cast<std::uint64_t>(c) * os.dim(1) * static_cast<std::uint64_t>(os.dim(2)) *
                           os.dim(3) * batch;
                row.flops = 2 * row.macs;
                break;
            case LayerKind::gap:
                row.flops = in_elems;  // adds
                break;
            case LayerKind::maxpool:
                row.flops = in_elems;  // comparisons
                break;
            case LayerKind::prelu:
            case LayerKind::leaky_relu:
            case LayerKind::batchnorm:
            case LayerKind::dropout:
            case LayerKind::softmax:
                row.flops = out_elems;
                break;
        }
        r.per_layer.push_back(row);
        r.macs += row.macs;
        r.flops += row.flops;
        c = os.dim(1);
        h = os.dim(2);
        w = os.dim(3);
    }
    return r;
}

std::string summarize(const ModelGraph& g) {
    const ParamCountReport pc = param_count(g);
    const FlopCountReport fc = flop_count(g, 1);
    std::ostringstream os;
    os << "kind\tout_shape\tparams\tmacs\n";
    for (size_t i = 0; i < g.layers.size(); ++i) {
        os << pc.per_layer[i].kind << '\t' << fc.per_layer[i].out_shape.str() << '\t'
           << pc.per_layer[i].trainable << '\t' << fc.per_layer[i].macs << '\n';
    }
    os << "total\t-\t" << pc.trainable << '\t' << fc.macs << '\n';
    const double bytes = static_cast<double>(pc.trainable) * 4.0;
    char line[128];
    std::snprintf(line, sizeof(line), "fp32 size: %.2f MB (2^20) / %.2f MB (10^6)\n", bytes / 1048576.0,
                  bytes / 1e6);
    os << line;
    return os.str();
}

}  // namespace qn
