#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

// Raw-buffer reference kernels, templated so the finite-difference checker
// can rerun forward passes in double. Convolutions accumulate per output
// element in (input channel, kernel row, kernel col) order, bias last; this
// order is part of the contract and is what makes reruns bit-identical.
//
// Callers pass pre-padded inputs. Every kernel tap multiplies, zeros
// included, so the multiply counter lands exactly on k^2*Cin*Cout*Hout*Wout.

namespace qn::detail {

inline thread_local std::uint64_t g_conv_macs = 0;

inline std::uint64_t conv_mac_count() { return g_conv_macs; }
inline void reset_conv_mac_count() { g_conv_macs = 0; }

// Dense convolution over an unpadded (or pre-padded) input, valid mode.
// Covers pointwise as k=1. kernel layout (cout, cin, k, k).
template <typename T>
void conv2d_dense_raw(const T* x, int batch, int cin, int h, int w, const T* kernel, int cout, int k,
                      int stride, const T* bias, T* out, int hout, int wout) {
    std::uint64_t macs = 0;
    for (int n = 0; n < batch; ++n) {
        const T* xn = x + static_cast<std::int64_t>(n) * cin * h * w;
        T* on = out + static_cast<std::int64_t>(n) * cout * hout * wout;
        for (int oc = 0; oc < cout; ++oc) {
            T* oplane = on + static_cast<std::int64_t>(oc) * hout * wout;
            for (int i = 0; i < hout * wout; ++i) oplane[i] = T(0);
            const T* kbase = kernel + static_cast<std::int64_t>(oc) * cin * k * k;
            for (int ic = 0; ic < cin; ++ic) {
                const T* xplane = xn + static_cast<std::int64_t>(ic) * h * w;
                const T* kc = kbase + static_cast<std::int64_t>(ic) * k * k;
                for (int kh = 0; kh < k; ++kh) {
                    for (int kw = 0; kw < k; ++kw) {
                        const T wv = kc[kh * k + kw];
                        for (int oh = 0; oh < hout; ++oh) {
                            const T* xrow = xplane + static_cast<std::int64_t>(oh * stride + kh) * w + kw;
                            T* orow = oplane + static_cast<std::int64_t>(oh) * wout;
                            if (stride == 1) {
                                for (int ow = 0; ow < wout; ++ow) {
                                    orow[ow] += wv * xrow[ow];
                                    ++macs;
                                }
                            } else {
                                for (int ow = 0; ow < wout; ++ow) {
                                    orow[ow] += wv * xrow[ow * stride];
                                    ++macs;
                                }
                            }
                        }
                    }
                }
            }
            if (bias) {
                const T bv = bias[oc];
                for (int i = 0; i < hout * wout; ++i) oplane[i] += bv;
            }
        }
    }
    g_conv_macs += macs;
}

// Depthwise convolution, channel multiplier 1. kernel layout (c, 1, k, k).
template <typename T>
void conv2d_depthwise_raw(const T* x, int batch, int c, int h, int w, const T* kernel, int k, int stride,
                          const T* bias, T* out, int hout, int wout) {
    std::uint64_t macs = 0;
    for (int n = 0; n < batch; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const T* xplane = x + (static_cast<std::int64_t>(n) * c + ch) * h * w;
            T* oplane = out + (static_cast<std::int64_t>(n) * c + ch) * hout * wout;
            for (int i = 0; i < hout * wout; ++i) oplane[i] = T(0);
            const T* kc = kernel + static_cast<std::int64_t>(ch) * k * k;
            for (int kh = 0; kh < k; ++kh) {
                for (int kw = 0; kw < k; ++kw) {
                    const T wv = kc[kh * k + kw];
                    for (int oh = 0; oh < hout; ++oh) {
                        const T* xrow = xplane + static_cast<std::int64_t>(oh * stride + kh) * w + kw;
                        T* orow = oplane + static_cast<std::int64_t>(oh) * wout;
                        if (stride == 1) {
                            for (int ow = 0; ow < wout; ++ow) {
                                orow[ow] += wv * xrow[ow];
                                ++macs;
                            }
                        } else {
                            for (int ow = 0; ow < wout; ++ow) {
                                orow[ow] += wv * xrow[ow * stride];
                                ++macs;
                            }
                        }
                    }
                }
            }
            if (bias) {
                const T bv = bias[ch];
                for (int i = 0; i < hout * wout; ++i) oplane[i] += bv;
            }
        }
    }
    g_conv_macs += macs;
}

// Zero-pad H and W by p on each side.
template <typename T>
std::vector<T> pad_hw(const T* x, int batch, int c, int h, int w, int p) {
    const int hp = h + 2 * p, wp = w + 2 * p;
    std::vector<T> out(static_cast<size_t>(batch) * c * hp * wp, T(0));
    for (int n = 0; n < batch; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const T* src = x + (static_cast<std::int64_t>(n) * c + ch) * h * w;
            T* dst = out.data() + (static_cast<std::int64_t>(n) * c + ch) * hp * wp;
            for (int i = 0; i < h; ++i) {
                T* drow = dst + static_cast<std::int64_t>(i + p) * wp + p;
                const T* srow = src + static_cast<std::int64_t>(i) * w;
                for (int j = 0; j < w; ++j) drow[j] = srow[j];
            }
        }
    }
    return out;
}

template <typename T>
void prelu_raw(const T* x, std::int64_t plane, int batch, int c, const T* slopes, T* out) {
    for (int n = 0; n < batch; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const T a = slopes[ch];
            const T* xp = x + (static_cast<std::int64_t>(n) * c + ch) * plane;
            T* op = out + (static_cast<std::int64_t>(n) * c + ch) * plane;
            for (std::int64_t i = 0; i < plane; ++i) op[i] = xp[i] >= T(0) ? xp[i] : a * xp[i];
        }
    }
}

template <typename T>
void bn_infer_raw(const T* x, std::int64_t plane, int batch, int c, const T* gamma, const T* beta,
                  const T* mean, const T* var, T eps, T* out) {
    for (int n = 0; n < batch; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const T s = gamma[ch] / std::sqrt(var[ch] + eps);
            const T m = mean[ch];
            const T b = beta[ch];
            const T* xp = x + (static_cast<std::int64_t>(n) * c + ch) * plane;
            T* op = out + (static_cast<std::int64_t>(n) * c + ch) * plane;
            for (std::int64_t i = 0; i < plane; ++i) op[i] = s * (xp[i] - m) + b;
        }
    }
}

// Batch statistics (biased variance) + normalize. Does not touch running stats.
template <typename T>
void bn_batch_raw(const T* x, std::int64_t plane, int batch, int c, const T* gamma, const T* beta, T eps,
                  T* out, T* mean_out, T* var_out) {
    const T m_count = static_cast<T>(batch) * static_cast<T>(plane);
    for (int ch = 0; ch < c; ++ch) {
        T sum = T(0);
        for (int n = 0; n < batch; ++n) {
            const T* xp = x + (static_cast<std::int64_t>(n) * c + ch) * plane;
            for (std::int64_t i = 0; i < plane; ++i) sum += xp[i];
        }
        const T mean = sum / m_count;
        T sq = T(0);
        for (int n = 0; n < batch; ++n) {
            const T* xp = x + (static_cast<std::int64_t>(n) * c + ch) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
                const T d = xp[i] - mean;
                sq += d * d;
            }
        }
        const T var = sq / m_count;
        const T s = gamma[ch] / std::sqrt(var + eps);
        for (int n = 0; n < batch; ++n) {
            const T* xp = x + (static_cast<std::int64_t>(n) * c + ch) * plane;
            T* op = out + (static_cast<std::int64_t>(n) * c + ch) * plane;
            for (std::int64_t i = 0; i < plane; ++i) op[i] = s * (xp[i] - mean) + beta[ch];
        }
        if (mean_out) mean_out[ch] = mean;
        if (var_out) var_out[ch] = var;
    }
}

// 2x2/2 max pool; argmax_out (flat input offsets) feeds the backward pass.
template <typename T>
void maxpool2_raw(const T* x, int batch, int c, int h, int w, T* out, std::int64_t* argmax_out) {
    const int ho = h / 2, wo = w / 2;
    for (int n = 0; n < batch; ++n) {
        for (int ch = 0; ch < c; ++ch) {
            const std::int64_t base = (static_cast<std::int64_t>(n) * c + ch) * h * w;
            T* op = out + (static_cast<std::int64_t>(n) * c + ch) * ho * wo;
            std::int64_t* ap = argmax_out ? argmax_out + (static_cast<std::int64_t>(n) * c + ch) * ho * wo : nullptr;
            for (int i = 0; i < ho; ++i) {
                for (int j = 0; j < wo; ++j) {
                    std::int64_t best = base + static_cast<std::int64_t>(2 * i) * w + 2 * j;
                    T bv = x[best];
                    const std::int64_t cand[3] = {best + 1, best + w, best + w + 1};
                    for (std::int64_t idx : cand) {
                        if (x[idx] > bv) {
                            bv = x[idx];
                            best = idx;
                        }
                    }
                    op[static_cast<std::int64_t>(i) * wo + j] = bv;
                    if (ap) ap[static_cast<std::int64_t>(i) * wo + j] = best;
                }
            }
        }
    }
}

template <typename T>
void gap_raw(const T* x, int batch, int c, int h, int w, T* out) {
    const T denom = static_cast<T>(h) * static_cast<T>(w);
    for (int i = 0; i < batch * c; ++i) {
        const T* plane = x + static_cast<std::int64_t>(i) * h * w;
        T sum = T(0);
        for (int j = 0; j < h * w; ++j) sum += plane[j];
        out[i] = sum / denom;
    }
}

// Max-subtracted softmax + mean cross-entropy. probs_out may be null.
template <typename T>
T softmax_xent_raw(const T* logits, int batch, int k, const int* labels, T* probs_out) {
    T total = T(0);
    std::vector<T> row(static_cast<size_t>(k));
    for (int n = 0; n < batch; ++n) {
        const T* lp = logits + static_cast<std::int64_t>(n) * k;
        T mx = lp[0];
        for (int i = 1; i < k; ++i) mx = lp[i] > mx ? lp[i] : mx;
        T sum = T(0);
        for (int i = 0; i < k; ++i) {
            row[static_cast<size_t>(i)] = std::exp(lp[i] - mx);
            sum += row[static_cast<size_t>(i)];
        }
        for (int i = 0; i < k; ++i) {
            row[static_cast<size_t>(i)] /= sum;
            if (probs_out) probs_out[static_cast<std::int64_t>(n) * k + i] = row[static_cast<size_t>(i)];
        }
        // -log p via log-sum-exp; stays finite even when p underflows.
        total += std::log(sum) - (lp[labels[n]] - mx);
    }
    return total / static_cast<T>(batch);
}

}  // namespace qn::detail
