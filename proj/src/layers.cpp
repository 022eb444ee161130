#include "qn/layers.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "qn/detail/kernels.hpp"

namespace qn {

std::uint64_t conv_mac_count() { return detail::conv_mac_count(); }
void reset_conv_mac_count() { detail::reset_conv_mac_count(); }

int conv_out_dim(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

namespace {

struct ConvDims {
    int batch, cin, h, w, cout, k, pad, hout, wout;
};

ConvDims check_conv(const Tensor& x, const ConvParams& p, ConvKind kind) {
    if (x.shape().rank() != 4) throw std::invalid_argument("conv2d: input must be rank 4");
    if (p.kernel.shape().rank() != 4) throw std::invalid_argument("conv2d: kernel must be rank 4");
    if (p.stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");

    ConvDims d{};
    d.batch = x.shape().dim(0);
    d.cin = x.shape().dim(1);
    d.h = x.shape().dim(2);
    d.w = x.shape().dim(3);
    d.cout = p.kernel.shape().dim(0);
    d.k = p.kernel.shape().dim(2);

    if (p.kernel.shape().dim(3) != d.k) throw std::invalid_argument("conv2d: kernel must be square");
    switch (kind) {
        case ConvKind::dense:
            if (p.kernel.shape().dim(1) != d.cin) {
                throw std::invalid_argument("conv2d: kernel C_in " + std::to_string(p.kernel.shape().dim(1)) +
                                            " does not match input channels " + std::to_string(d.cin));
            }
            break;
        case ConvKind::pointwise:
            if (d.k != 1) throw std::invalid_argument("conv2d: pointwise kernel must be 1x1");
            if (p.kernel.shape().dim(1) != d.cin) {
                throw std::invalid_argument("conv2d: kernel C_in " + std::to_string(p.kernel.shape().dim(1)) +
                                            " does not match input channels " + std::to_string(d.cin));
            }
            break;
        case ConvKind::depthwise:
            if (p.kernel.shape().dim(1) != 1) {
                throw std::invalid_argument("conv2d: depthwise channel multiplier must be 1");
            }
            if (d.cout != d.cin) {
                throw std::invalid_argument("conv2d: depthwise kernel channels " + std::to_string(d.cout) +
                                            " do not match input channels " + std::to_string(d.cin));
            }
            break;
    }

    if (p.padding == Padding::same) {
        if (d.k % 2 == 0) throw std::invalid_argument("conv2d: same padding requires odd kernel size");
        d.pad = (d.k - 1) / 2;
    } else {
        d.pad = 0;
        if (d.h < d.k || d.w < d.k) {
            throw std::invalid_argument("conv2d: spatial dims " + std::to_string(d.h) + "x" +
                                        std::to_string(d.w) + " too small for kernel " + std::to_string(d.k) +
                                        " under valid padding");
        }
    }
    d.hout = conv_out_dim(d.h, d.k, p.stride, d.pad);
    d.wout = conv_out_dim(d.w, d.k, p.stride, d.pad);
    if (d.hout < 1 || d.wout < 1) throw std::invalid_argument("conv2d: output spatial size collapsed");

    if (p.bias && (p.bias->shape().rank() != 1 || p.bias->shape().dim(0) != d.cout)) {
        throw std::invalid_argument("conv2d: bias length must equal output channels");
    }
    return d;
}

}  // namespace

Tensor conv2d(const Tensor& x, const ConvParams& p, ConvKind kind) {
    const ConvDims d = check_conv(x, p, kind);
    Tensor out(Shape{d.batch, d.cout, d.hout, d.wout});
    const float* bias = p.bias ? p.bias->data() : nullptr;

    const float* src = x.data();
    int h = d.h, w = d.w;
    std::vector<float> padded;
    if (d.pad > 0) {
        padded = detail::pad_hw(x.data(), d.batch, d.cin, d.h, d.w, d.pad);
        src = padded.data();
        h = d.h + 2 * d.pad;
        w = d.w + 2 * d.pad;
    }

    if (kind == ConvKind::depthwise) {
        detail::conv2d_depthwise_raw(src, d.batch, d.cin, h, w, p.kernel.data(), d.k, p.stride, bias,
                                     out.data(), d.hout, d.wout);
    } else {
        detail::conv2d_dense_raw(src, d.batch, d.cin, h, w, p.kernel.data(), d.cout, d.k, p.stride, bias,
                                 out.data(), d.hout, d.wout);
    }
    return out;
}

Tensor separable_conv2d(const Tensor& x, const ConvParams& dw, const ConvParams& pw) {
    return conv2d(conv2d(x, dw, ConvKind::depthwise), pw, ConvKind::pointwise);
}

namespace {

int check_channel_param(const Tensor& x, std::int64_t count, const char* what) {
    if (x.shape().rank() != 4) throw std::invalid_argument(std::string(what) + ": input must be rank 4");
    if (count != x.shape().dim(1)) {
        throw std::invalid_argument(std::string(what) + ": parameter count " + std::to_string(count) +
                                    " does not match input channels " + std::to_string(x.shape().dim(1)));
    }
    return x.shape().dim(1);
}

}  // namespace

Tensor prelu(const Tensor& x, const PReLUParams& p) {
    const int c = check_channel_param(x, p.slopes.size(), "prelu");
    Tensor out(x.shape());
    const std::int64_t plane = static_cast<std::int64_t>(x.shape().dim(2)) * x.shape().dim(3);
    detail::prelu_raw(x.data(), plane, x.shape().dim(0), c, p.slopes.data(), out.data());
    return out;
}

Tensor leaky_relu(const Tensor& x, const std::vector<float>& alphas) {
    const int c = check_channel_param(x, static_cast<std::int64_t>(alphas.size()), "leaky_relu");
    Tensor out(x.shape());
    const std::int64_t plane = static_cast<std::int64_t>(x.shape().dim(2)) * x.shape().dim(3);
    detail::prelu_raw(x.data(), plane, x.shape().dim(0), c, alphas.data(), out.data());
    return out;
}

std::vector<float> fold_prelu(const PReLUParams& p) { return p.slopes.values(); }

BNTrainResult batchnorm_train(const Tensor& x, BNParams& p) {
    const int c = check_channel_param(x, p.gamma.size(), "batchnorm");
    const int batch = x.shape().dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(x.shape().dim(2)) * x.shape().dim(3);
    if (batch * plane < 2) throw std::invalid_argument("batchnorm: train mode needs batch*H*W >= 2");

    BNTrainResult r;
    r.y = Tensor(x.shape());
    r.mean.resize(static_cast<size_t>(c));
    std::vector<float> var(static_cast<size_t>(c));
    detail::bn_batch_raw(x.data(), plane, batch, c, p.gamma.data(), p.beta.data(), p.eps, r.y.data(),
                         r.mean.data(), var.data());
    r.inv_std.resize(static_cast<size_t>(c));
    for (int i = 0; i < c; ++i) {
        r.inv_std[static_cast<size_t>(i)] = 1.0f / std::sqrt(var[static_cast<size_t>(i)] + p.eps);
        p.running_mean.data()[i] = p.momentum * p.running_mean.data()[i] + (1.0f - p.momentum) * r.mean[static_cast<size_t>(i)];
        p.running_var.data()[i] = p.momentum * p.running_var.data()[i] + (1.0f - p.momentum) * var[static_cast<size_t>(i)];
    }
    return r;
}

Tensor batchnorm_infer(const Tensor& x, const BNParams& p) {
    const int c = check_channel_param(x, p.gamma.size(), "batchnorm");
    Tensor out(x.shape());
    const std::int64_t plane = static_cast<std::int64_t>(x.shape().dim(2)) * x.shape().dim(3);
    detail::bn_infer_raw(x.data(), plane, x.shape().dim(0), c, p.gamma.data(), p.beta.data(),
                         p.running_mean.data(), p.running_var.data(), p.eps, out.data());
    return out;
}

ConvParams fold_bn_into_conv(const ConvParams& conv, const BNParams& bn) {
    const int cout = conv.kernel.shape().dim(0);
    if (bn.gamma.size() != cout) {
        throw std::invalid_argument("fold_bn_into_conv: BN channels " + std::to_string(bn.gamma.size()) +
                                    " do not match conv output channels " + std::to_string(cout));
    }
    ConvParams folded;
    folded.stride = conv.stride;
    folded.padding = conv.padding;
    folded.kernel = conv.kernel;
    folded.bias = Tensor(Shape{cout});

    const std::int64_t per_out = conv.kernel.size() / cout;
    for (int oc = 0; oc < cout; ++oc) {
        const float g = bn.gamma.data()[oc] / std::sqrt(bn.running_var.data()[oc] + bn.eps);
        float* kp = folded.kernel.data() + static_cast<std::int64_t>(oc) * per_out;
        for (std::int64_t i = 0; i < per_out; ++i) kp[i] *= g;
        const float b0 = conv.bias ? conv.bias->data()[oc] : 0.0f;
        folded.bias->data()[oc] = (b0 - bn.running_mean.data()[oc]) * g + bn.beta.data()[oc];
    }
    return folded;
}

Tensor maxpool2d(const Tensor& x, std::vector<std::int64_t>* argmax_out) {
    if (x.shape().rank() != 4) throw std::invalid_argument("maxpool2d: input must be rank 4");
    const int h = x.shape().dim(2), w = x.shape().dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw std::invalid_argument("maxpool2d: spatial dims must be even, got " + std::to_string(h) + "x" +
                                    std::to_string(w));
    }
    Tensor out(Shape{x.shape().dim(0), x.shape().dim(1), h / 2, w / 2});
    if (argmax_out) argmax_out->resize(static_cast<size_t>(out.size()));
    detail::maxpool2_raw(x.data(), x.shape().dim(0), x.shape().dim(1), h, w, out.data(),
                         argmax_out ? argmax_out->data() : nullptr);
    return out;
}

Tensor global_avg_pool(const Tensor& x) { return reduce_mean_hw(x); }

SoftmaxXentResult softmax_xent(const Tensor& logits, const std::vector<int>& labels) {
    int batch = 0, k = 0;
    if (logits.shape().rank() == 2) {
        batch = logits.shape().dim(0);
        k = logits.shape().dim(1);
    } else if (logits.shape().rank() == 4 && logits.shape().dim(2) == 1 && logits.shape().dim(3) == 1) {
        batch = logits.shape().dim(0);
        k = logits.shape().dim(1);
    } else {
        throw std::invalid_argument("softmax_xent: logits must be (batch, K) or (batch, K, 1, 1)");
    }
    if (static_cast<int>(labels.size()) != batch) {
        throw std::invalid_argument("softmax_xent: label count does not match batch");
    }
    for (int l : labels) {
        if (l < 0 || l >= k) {
            throw std::invalid_argument("softmax_xent: label " + std::to_string(l) + " out of range [0," +
                                        std::to_string(k) + ")");
        }
    }
    SoftmaxXentResult r;
    r.probs = Tensor(logits.shape());
    r.loss = detail::softmax_xent_raw(logits.data(), batch, k, labels.data(), r.probs.data());
    return r;
}

Tensor dropout(const Tensor& x, float rate, Rng& rng, bool train, std::vector<std::uint8_t>* mask_out) {
    if (rate < 0.0f || rate >= 1.0f) {
        throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
    }
    if (!train || rate == 0.0f) {
        if (mask_out) mask_out->assign(static_cast<size_t>(x.size()), 1);
        return x;
    }
    Tensor out(x.shape());
    if (mask_out) mask_out->resize(static_cast<size_t>(x.size()));
    const float keep_scale = 1.0f / (1.0f - rate);
    const float* px = x.data();
    float* po = out.data();
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const bool drop = rng.uniform() < rate;
        po[i] = drop ? 0.0f : px[i] * keep_scale;
        if (mask_out) (*mask_out)[static_cast<size_t>(i)] = drop ? 0 : 1;
    }
    return out;
}

}  // namespace qn
