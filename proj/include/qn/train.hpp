#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qn/arch.hpp"
#include "qn/rng.hpp"

namespace qn {

struct Dataset {
    Tensor images;            // (n, C, H, W)
    std::vector<int> labels;  // class ids, one per image
    int size() const { return images.shape().rank() == 4 ? images.shape().dim(0) : 0; }
};

Dataset subset(const Dataset& d, const std::vector<int>& indices);

// Reverse-mode state for one minibatch. input is cached only for layers
// whose backward needs it (conv, prelu, batchnorm).
struct TapeLayer {
    std::vector<Tensor> param_grads;  // matches LayerSpec::param_tensors order
    Tensor input;
    Shape in_shape;
    std::vector<std::uint8_t> mask;      // dropout
    std::vector<std::int64_t> argmax;    // maxpool
    std::vector<float> bn_mean, bn_inv_std;
};

struct GradTape {
    std::vector<TapeLayer> layers;
    static GradTape for_graph(const ModelGraph& g);
    void zero_grads();
};

// Train-mode forward + reverse pass. Fills the tape with dloss/dtheta for
// every trainable parameter, updates BN running stats, draws dropout from
// rng. Returns the minibatch loss; correct_out gets the top-1 hit count.
float backward(ModelGraph& g, const Tensor& batch, const std::vector<int>& labels, GradTape& tape, Rng& rng,
               int* correct_out = nullptr);

struct Velocity {
    std::vector<std::vector<Tensor>> layers;
    static Velocity for_graph(const ModelGraph& g);
};

// v <- momentum*v - lr*grad; theta <- theta + v
void sgd_step(ModelGraph& g, const GradTape& tape, Velocity& vel, float lr, float momentum);

// Per-sample horizontal flip with p=0.5 (when hflip) and integer translation
// drawn uniformly from [-shift_px, +shift_px]^2, zero padded. Flip is applied
// before the shift. Draw order per sample: flip, shift_x, shift_y.
Tensor augment(const Tensor& batch, bool hflip, int shift_px, Rng& rng);

Tensor flip_horizontal(const Tensor& batch);
// out(y, x) = in(y - dy, x - dx), zero outside.
Tensor translate(const Tensor& batch, int dx, int dy);

struct EarlyStop {
    enum class Mode { fixed_epoch, patience };
    Mode mode = Mode::patience;
    int value = 20;
};

struct TrainConfig {
    float lr = 0.01f;
    float momentum = 0.9f;
    int batch_size = 32;
    int max_epochs = 30;
    EarlyStop early_stop{};
    float dropout_rate = 0.5f;
    bool augment_hflip = true;
    int augment_shift_px = 4;
    std::uint64_t seed = 1;
    float val_fraction = 0.10f;
    bool lr_decay = true;  // 10x drop after 50% and 75% of max_epochs
};

struct EpochStats {
    int epoch;
    float train_loss, train_acc, val_loss, val_acc;
};

struct TrainResult {
    ModelGraph best;  // snapshot at the best validation accuracy
    ModelGraph final_graph;
    std::vector<EpochStats> history;
    std::vector<int> train_indices, val_indices;
    int best_epoch = 0;
    float best_val_acc = 0.0f;
};

// Seeded val split, shuffled minibatch epochs with augmentation and dropout,
// SGD with momentum, best-snapshot early stopping. RNG streams derive from
// cfg.seed in the order: split, per-epoch shuffle, augment, dropout.
TrainResult train(const ModelGraph& g, const Dataset& data, const TrainConfig& cfg);

struct EvalResult {
    float accuracy;
    float mean_loss;
};

// Deterministic: no dropout, no augmentation; BN uses running stats.
EvalResult evaluate(const ModelGraph& g, const Dataset& data, int batch_size = 64);

// "epoch,train_loss,train_acc,val_loss,val_acc" header + 6-decimal rows.
std::string history_csv(const std::vector<EpochStats>& history);

// Pure fp64 forward + cross-entropy used by finite-difference checks.
// train_stats selects batch-statistics BN (running stats untouched);
// dropout runs as identity either way.
double forward_loss_fp64(const ModelGraph& g, const Tensor& batch, const std::vector<int>& labels,
                         bool train_stats);

}  // namespace qn
