#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qn/layers.hpp"
#include "qn/tensor.hpp"

namespace qn {

// Byte values are the on-disk layer ids; keep them stable.
enum class LayerKind : std::uint8_t {
    dense_conv = 1,
    depthwise_conv = 2,
    pointwise_conv = 3,
    prelu = 4,
    leaky_relu = 5,
    batchnorm = 6,
    maxpool = 7,
    gap = 8,
    dropout = 9,
    softmax = 10,
};

const char* layer_kind_name(LayerKind k);
bool is_conv_kind(LayerKind k);

struct LeakyParams {
    std::vector<float> alphas;
};

struct DropoutParams {
    float rate = 0.5f;
};

struct NoParams {};

struct LayerSpec {
    LayerKind kind;
    std::variant<NoParams, ConvParams, PReLUParams, LeakyParams, BNParams, DropoutParams> params;

    ConvParams& conv() { return std::get<ConvParams>(params); }
    const ConvParams& conv() const { return std::get<ConvParams>(params); }
    PReLUParams& prelu() { return std::get<PReLUParams>(params); }
    const PReLUParams& prelu() const { return std::get<PReLUParams>(params); }
    LeakyParams& leaky() { return std::get<LeakyParams>(params); }
    const LeakyParams& leaky() const { return std::get<LeakyParams>(params); }
    BNParams& bn() { return std::get<BNParams>(params); }
    const BNParams& bn() const { return std::get<BNParams>(params); }
    DropoutParams& drop() { return std::get<DropoutParams>(params); }
    const DropoutParams& drop() const { return std::get<DropoutParams>(params); }

    // Trainable parameter tensors in declared order (kernel, bias, slopes, gamma, beta).
    std::vector<Tensor*> param_tensors();
    std::vector<const Tensor*> param_tensors() const;
};

enum class GraphMode : std::uint8_t { train = 0, infer_folded = 1 };

// Per-channel input standardization constants; travel with the model.
struct NormConstants {
    std::array<float, 3> mean{0.0f, 0.0f, 0.0f};
    std::array<float, 3> stddev{1.0f, 1.0f, 1.0f};
};

// Strictly sequential layer list; the single source of truth for inference,
// training, counting, and serialization.
struct ModelGraph {
    std::vector<LayerSpec> layers;
    GraphMode mode = GraphMode::train;
    Shape input_shape{3, 32, 32};  // (C, H, W)
    NormConstants norm;

    std::int64_t num_params() const;
};

enum class Downsample : std::uint8_t { maxpool = 0, none = 1 };

struct ArchConfig {
    int stem_filters = 64;
    int stem_kernel = 5;
    int base_filters = 64;
    int doubling_period = 3;  // filters at block i = base * 2^floor(i/N)
    int num_blocks = 9;
    int block_kernel = 3;
    int num_classes = 10;
    Shape input_shape{3, 32, 32};
    std::vector<Downsample> downsample;  // per doubling boundary; empty = maxpool at every boundary
    float dropout_rate = 0.5f;
};

ArchConfig reference_config();  // stem 64, 9 blocks, N=3: 64@28^2, 128@14^2, 256@7^2
ArchConfig desk2_config();      // 2-block desk model: stem 32, filters 32 -> 64

// Stem conv (k x k, valid) -> BN -> PReLU, then blocks of
// [depthwise 3x3 same -> pointwise -> BN -> PReLU] with a downsample at each
// filter-doubling boundary, then GAP -> dropout -> 1x1 classifier -> softmax.
// He-normal weights, PReLU slopes 0.25, BN gamma=1 beta=0.
ModelGraph build_quicknet(const ArchConfig& cfg, std::uint64_t seed);

// Same macroarchitecture with each separable pair replaced by one dense conv.
ModelGraph build_dense_equivalent(const ArchConfig& cfg, std::uint64_t seed);

// Shape walk; throws on any layer whose input does not compose.
std::vector<Shape> layer_output_shapes(const ModelGraph& g, int batch);

// Eval-semantics forward: BN uses running stats, dropout is identity.
Tensor forward(const ModelGraph& g, const Tensor& x);          // full graph incl. softmax
Tensor forward_logits(const ModelGraph& g, const Tensor& x);   // stops before trailing softmax

// Fold BN into the preceding conv, freeze PReLU into LeakyReLU, drop dropout.
ModelGraph fold_for_inference(const ModelGraph& g);

struct LayerParamCount {
    std::string kind;
    std::int64_t trainable = 0;
    std::int64_t non_trainable = 0;  // BN running stats
};

struct ParamCountReport {
    std::vector<LayerParamCount> per_layer;
    std::int64_t trainable = 0;
    std::int64_t non_trainable = 0;
};

ParamCountReport param_count(const ModelGraph& g);

struct LayerFlopCount {
    std::string kind;
    Shape out_shape;
    std::uint64_t macs = 0;   // conv multiply-accumulates
    std::uint64_t flops = 0;  // 2*macs for convs; element ops elsewhere
};

struct FlopCountReport {
    std::vector<LayerFlopCount> per_layer;
    std::uint64_t macs = 0;
    std::uint64_t flops = 0;
};

FlopCountReport flop_count(const ModelGraph& g, int batch);

// One tab-separated row per layer (kind, out_shape, params, MACs) at batch 1,
// then totals and the fp32 size in both 2^20 and 10^6 megabyte conventions.
std::string summarize(const ModelGraph& g);

}  // namespace qn
