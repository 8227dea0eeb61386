#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "geminet/ml/model.hpp"
#include "geminet/ml/params.hpp"

namespace geminet::ml {

struct AdamState {
    ParamBuffers m;
    ParamBuffers v;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam(const ModelParams& p);

/// One bias-corrected Adam update. Frozen layers and the constant `input`
/// layer are left untouched (their moments are not advanced either).
void adam_step(AdamState& state, ModelParams& p, const ParamBuffers& gradient, double learning_rate,
               const std::set<std::string>& frozen_layers = {});

struct TrainConfig {
    double learning_rate = 1e-3;
    int epochs = 2000;
    int batch_size = 64;
    double split_fraction = 0.8;
    std::uint64_t seed = 0;
    std::set<std::string> frozen_layers;
    /// Optional learning-rate multiplier per epoch; constant when empty.
    std::function<double(int epoch)> schedule;
    /// Record train/test MAE every this many epochs (and at the last one).
    int curve_every = 1;
    Exec exec = Exec::parallel;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;
    double train_mae = 0.0;
    double test_mae = std::numeric_limits<double>::quiet_NaN();
};

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded shuffle, first round(fraction * n) indices train, the rest test.
Split split_indices(std::size_t n, double fraction, std::uint64_t seed);

struct TrainResult {
    ModelParams params;
    std::vector<EpochStats> curve;
    Split split;
};

/// Mini-batch Adam on `train_set`, reporting MAE on both sets per the curve
/// cadence. `test_set` may be empty.
TrainResult fit(ModelParams init, std::span<const Sample> train_set, std::span<const Sample> test_set,
                const TrainConfig& config);

/// Initializes from `config.seed`, splits the dataset, fits the input
/// standardization on the training side and trains.
TrainResult train(const ModelSpec& spec, std::span<const Sample> dataset, const TrainConfig& config);

/// Retrains only the first layer (`dense0`) of a pretrained MLP on all of
/// `small_dataset`. `config.frozen_layers` must be empty or exactly the
/// other layers.
TrainResult finetune_first_layer(const ModelParams& pretrained, std::span<const Sample> small_dataset,
                                 const TrainConfig& config);

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
    std::vector<double> residuals;  // prediction - target
};

Metrics evaluate(const ModelParams& p, std::span<const Sample> dataset, Exec exec = Exec::parallel);

std::vector<Sample> subset(std::span<const Sample> data, std::span<const std::size_t> indices);

}  // namespace geminet::ml
