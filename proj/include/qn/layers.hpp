#pragma once

#include <optional>
#include <vector>

#include "qn/rng.hpp"
#include "qn/tensor.hpp"

namespace qn {

enum class Padding : std::uint8_t { valid = 0, same = 1 };
enum class ConvKind : std::uint8_t { dense, depthwise, pointwise };

// Kernel layouts: dense (C_out, C_in, k, k); depthwise (C, 1, k, k) with
// channel multiplier fixed at 1; pointwise (C_out, C_in, 1, 1).
struct ConvParams {
    Tensor kernel;
    std::optional<Tensor> bias;  // (C_out)
    int stride = 1;
    Padding padding = Padding::valid;
};

struct PReLUParams {
    Tensor slopes;  // (C), one trainable negative-side slope per channel
};

struct BNParams {
    Tensor gamma, beta, running_mean, running_var;  // (C)
    float eps = 1e-5f;
    float momentum = 0.99f;
};

int conv_out_dim(int in, int k, int stride, int pad);

// Cross-correlation (no kernel flip). Output (batch, C_out, H_out, W_out),
// H_out = (H + 2*pad - k)/stride + 1.
Tensor conv2d(const Tensor& x, const ConvParams& p, ConvKind kind);

// Depthwise then pointwise; identical to the two-call composition.
Tensor separable_conv2d(const Tensor& x, const ConvParams& dw, const ConvParams& pw);

// y = x for x >= 0, slope_c * x otherwise.
Tensor prelu(const Tensor& x, const PReLUParams& p);
Tensor leaky_relu(const Tensor& x, const std::vector<float>& alphas);

// The learned slopes, frozen as LeakyReLU coefficients.
std::vector<float> fold_prelu(const PReLUParams& p);

struct BNTrainResult {
    Tensor y;
    std::vector<float> mean, inv_std;  // batch statistics, cached for backward
};

// Train mode: normalize by batch statistics (biased variance) and update
// running stats in place: r = momentum*r + (1-momentum)*batch.
BNTrainResult batchnorm_train(const Tensor& x, BNParams& p);
Tensor batchnorm_infer(const Tensor& x, const BNParams& p);

// kernel'_c = kernel_c * g_c, bias'_c = (bias_c - mean_c) * g_c + beta_c
// with g_c = gamma_c / sqrt(var_c + eps). Result always carries a bias.
ConvParams fold_bn_into_conv(const ConvParams& conv, const BNParams& bn);

// 2x2 window, stride 2. H and W must be even.
Tensor maxpool2d(const Tensor& x, std::vector<std::int64_t>* argmax_out = nullptr);

Tensor global_avg_pool(const Tensor& x);

struct SoftmaxXentResult {
    Tensor probs;
    float loss;
};

// logits (batch, K) or (batch, K, 1, 1); max-subtraction for stability.
SoftmaxXentResult softmax_xent(const Tensor& logits, const std::vector<int>& labels);

// Inverted dropout: train zeroes with probability rate and scales survivors
// by 1/(1-rate); infer is the identity. mask_out gets 0/1 per element.
Tensor dropout(const Tensor& x, float rate, Rng& rng, bool train, std::vector<std::uint8_t>* mask_out = nullptr);

// Multiply-accumulate counter for the conv kernels (thread-local).
std::uint64_t conv_mac_count();
void reset_conv_mac_count();

}  // namespace qn
