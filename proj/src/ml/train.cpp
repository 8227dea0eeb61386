#include "geminet/ml/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "geminet/error.hpp"

namespace geminet::ml {

AdamState make_adam(const ModelParams& p) {
    AdamState s;
    s.m = zeros_like(p);
    s.v = zeros_like(p);
    return s;
}

void adam_step(AdamState& state, ModelParams& p, const ParamBuffers& gradient, double learning_rate,
               const std::set<std::string>& frozen_layers) {
    if (gradient.size() != p.tensors.size() || state.m.size() != p.tensors.size()) {
        throw InputError("adam: buffer count does not match parameters");
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        const auto layer = p.tensors[i].layer();
        if (layer == input_layer || frozen_layers.contains(layer)) continue;
        auto& w = p.tensors[i].value;
        const auto& g = gradient[i];
        if (g.rows() != w.rows() || g.cols() != w.cols()) throw InputError("adam: shape mismatch for " + p.tensors[i].name);
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g.cwiseProduct(g);
        w.array() -= learning_rate * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + state.epsilon);
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw InputError("learning_rate must be positive");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw InputError("split_fraction must lie in (0, 1)");
    if (epochs < 0) throw InputError("epochs must be non-negative");
    if (batch_size <= 0) throw InputError("batch_size must be positive");
    if (curve_every <= 0) throw InputError("curve_every must be positive");
}

Split split_indices(std::size_t n, double fraction, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    Split s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    return s;
}

std::vector<Sample> subset(std::span<const Sample> data, std::span<const std::size_t> indices) {
    std::vector<Sample> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(data[i]);
    return out;
}

Metrics evaluate(const ModelParams& p, std::span<const Sample> dataset, Exec exec) {
    if (dataset.empty()) throw InputError("cannot evaluate on an empty dataset");
    const auto pred = predict_all(p, dataset, exec);
    Metrics m;
    m.residuals.resize(dataset.size());
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const double r = pred[i] - dataset[i].target;
        m.residuals[i] = r;
        abs_sum += std::abs(r);
        sq_sum += r * r;
    }
    m.mae = abs_sum / static_cast<double>(dataset.size());
    m.rmse = std::sqrt(sq_sum / static_cast<double>(dataset.size()));
    return m;
}

TrainResult fit(ModelParams init, std::span<const Sample> train_set, std::span<const Sample> test_set,
                const TrainConfig& config) {
    config.validate();
    if (train_set.empty()) throw InputError("training split is empty");
    TrainResult res;
    res.params = std::move(init);
    AdamState adam = make_adam(res.params);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        const double lr = config.learning_rate * (config.schedule ? config.schedule(epoch) : 1.0);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t stop = std::min(order.size(), start + bs);
            const std::span<const std::size_t> batch(order.data() + start, stop - start);
            const auto lg = backward(res.params, train_set, batch, config.frozen_layers, config.exec);
            adam_step(adam, res.params, lg.gradient, lr, config.frozen_layers);
        }
        if (epoch % config.curve_every == 0 || epoch == config.epochs) {
            EpochStats st;
            st.epoch = epoch;
            st.train_mae = evaluate(res.params, train_set, config.exec).mae;
            if (!test_set.empty()) st.test_mae = evaluate(res.params, test_set, config.exec).mae;
            res.curve.push_back(st);
        }
    }
    return res;
}

TrainResult train(const ModelSpec& spec, std::span<const Sample> dataset, const TrainConfig& config) {
    config.validate();
    if (dataset.empty()) throw InputError("cannot train on an empty dataset");
    Split split = split_indices(dataset.size(), config.split_fraction, config.seed);
    if (split.train.empty() || split.test.empty()) throw InputError("train/test split leaves an empty side");
    const auto tr = subset(dataset, split.train);
    const auto te = subset(dataset, split.test);
    ModelParams init = init_params(spec, config.seed);
    fit_input_standardization(init, tr);
    TrainResult res = fit(std::move(init), tr, te, config);
    res.split = std::move(split);
    return res;
}

TrainResult finetune_first_layer(const ModelParams& pretrained, std::span<const Sample> small_dataset,
                                 const TrainConfig& config) {
    if (!pretrained.is_mlp()) throw InputError("first-layer fine-tuning applies to MLP parameters");
    const auto layers = pretrained.layer_names();
    const std::set<std::string> others(layers.begin() + 1, layers.end());
    if (!config.frozen_layers.empty() && config.frozen_layers != others) {
        throw InputError("fine-tuning must freeze every layer except " + layers.front());
    }
    TrainConfig cfg = config;
    cfg.frozen_layers = others;
    return fit(pretrained, small_dataset, {}, cfg);
}

}  // namespace geminet::ml
