#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "geminet/ml/params.hpp"
#include "geminet/parallel.hpp"

namespace geminet::ml {

enum class Provenance { fci_label, composite };

struct Sample {
    std::vector<double> features;  // sorted geminal eigenvalues
    int n_electrons = 0;
    double e_infinity = 0.0;  // gate anchor, same energy scale as `target`
    double target = 0.0;  // total energy, hartree
    Provenance provenance = Provenance::fci_label;
    std::vector<std::string> source_ids;
};

/// Row-wise softmax((X Wq)(X Wk)^T / sqrt(d_k)) (X Wv); X is T x d_in.
Eigen::MatrixXd attention_layer(const Eigen::MatrixXd& x, const Eigen::MatrixXd& wq, const Eigen::MatrixXd& wk,
                                const Eigen::MatrixXd& wv);

double mlp_forward(const ModelParams& p, std::span<const double> features);

/// One prediction per row of `x` (B x input_width).
Eigen::VectorXd mlp_forward_batch(const ModelParams& p, const Eigen::MatrixXd& x);

struct SetOutput {
    double e_total = 0.0;
    double omega = 0.0;
    double e_corr = 0.0;
};

/// E_total = (1 - omega) E_corr + omega E_inf.
inline double gate_combine(double omega, double e_corr, double e_infinity) {
    return (1.0 - omega) * e_corr + omega * e_infinity;
}

/// Tokens are the features, one scalar per token.
SetOutput set_model_forward(const ModelParams& p, std::span<const double> tokens, double e_infinity);
SetOutput set_model_forward(const ModelParams& p, const Sample& s);

/// Model prediction of the total energy for either model kind.
double predict(const ModelParams& p, const Sample& s);
std::vector<double> predict_all(const ModelParams& p, std::span<const Sample> data, Exec exec = Exec::parallel);

struct LossGradient {
    double loss = 0.0;  // mean squared error
    ParamBuffers gradient;
};

/// Exact reverse-mode gradient of the batch MSE. Tensors whose layer is in
/// `frozen_layers` get zero gradient. The set-model path computes one
/// gradient per sample (threads over samples when `exec` is parallel) and
/// sums them in batch order, so both policies give identical bits.
LossGradient backward(const ModelParams& p, std::span<const Sample> data, std::span<const std::size_t> batch,
                      const std::set<std::string>& frozen_layers = {}, Exec exec = Exec::parallel);

/// Whole-dataset convenience overload.
LossGradient backward(const ModelParams& p, std::span<const Sample> data,
                      const std::set<std::string>& frozen_layers = {}, Exec exec = Exec::parallel);

/// Sets the `input` layer from data: per-feature mean and standard
/// deviation for MLPs, one pooled value over all tokens for the set model.
void fit_input_standardization(ModelParams& p, std::span<const Sample> data);

/// Mean squared error only.
double loss(const ModelParams& p, std::span<const Sample> data);

}  // namespace geminet::ml
