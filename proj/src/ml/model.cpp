#include "geminet/ml/model.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "geminet/error.hpp"

namespace geminet::ml {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

MatrixXd activate(const MatrixXd& z, Activation a) {
    switch (a) {
        case Activation::relu: return z.cwiseMax(0.0);
        case Activation::sigmoid: return z.unaryExpr([](double v) { return sigmoid(v); });
        case Activation::linear: return z;
    }
    return z;
}

// dL/dz from dL/dy where y = act(z).
MatrixXd activation_backward(const MatrixXd& dy, const MatrixXd& z, const MatrixXd& y, Activation a) {
    switch (a) {
        case Activation::relu: return dy.cwiseProduct(z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
        case Activation::sigmoid: return dy.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
        case Activation::linear: return dy;
    }
    return dy;
}

void check_mlp_input(const ModelParams& p, Eigen::Index width) {
    if (width != p.mlp().input_width) {
        throw InputError("feature length " + std::to_string(width) + " does not match model input width " +
                         std::to_string(p.mlp().input_width));
    }
}

bool has_input_layer(const ModelParams& p) {
    return p.is_mlp() ? p.mlp().standardize : p.set_model().standardize;
}

// Columns are samples (MLP) or the token vector (set model).
void standardize_columns(const ModelParams& p, MatrixXd& a) {
    if (!has_input_layer(p)) return;
    const MatrixXd& shift = p.at("input.shift");
    const MatrixXd& scale = p.at("input.scale");
    if (shift.rows() == 1) {
        a.array() = (a.array() - shift(0, 0)) / scale(0, 0);
    } else {
        a = ((a.colwise() - shift.col(0)).array().colwise() / scale.col(0).array()).matrix();
    }
}

struct AttentionCache {
    MatrixXd x, q, k, v, a;
};

MatrixXd softmax_rows(const MatrixXd& s) {
    MatrixXd out(s.rows(), s.cols());
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).maxCoeff();
        out.row(i) = (s.row(i).array() - mx).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

MatrixXd attention_forward(const MatrixXd& x, const MatrixXd& wq, const MatrixXd& wk, const MatrixXd& wv,
                           AttentionCache* cache) {
    const Eigen::Index dk = wq.cols();
    if (dk == 0) throw InputError("attention needs d_k > 0");
    if (wq.rows() != x.cols() || wk.rows() != x.cols() || wv.rows() != x.cols() || wk.cols() != dk) {
        throw InputError("attention weight shapes do not match the input");
    }
    MatrixXd q = x * wq, k = x * wk, v = x * wv;
    MatrixXd a = softmax_rows((q * k.transpose()) / std::sqrt(static_cast<double>(dk)));
    MatrixXd y = a * v;
    if (cache) *cache = {x, std::move(q), std::move(k), std::move(v), std::move(a)};
    return y;
}

// Token-wise dense layer: rows are tokens, W is (out x in).
struct DenseCache {
    MatrixXd in, z, out;
};

MatrixXd dense_tokens(const MatrixXd& h, const MatrixXd& w, const MatrixXd& b, Activation act, DenseCache* cache) {
    MatrixXd z = h * w.transpose();
    z.rowwise() += b.col(0).transpose();
    MatrixXd y = activate(z, act);
    if (cache) *cache = {h, std::move(z), y};
    return y;
}

// Backward through a token-wise dense layer; accumulates into gw, gb and
// returns dL/d(input).
MatrixXd dense_tokens_backward(const MatrixXd& dy, const DenseCache& c, const MatrixXd& w, Activation act,
                               MatrixXd& gw, MatrixXd& gb) {
    const MatrixXd dz = activation_backward(dy, c.z, c.out, act);
    gw += dz.transpose() * c.in;
    gb += dz.colwise().sum().transpose();
    return dz * w;
}

struct SetForward {
    SetOutput out;
    std::vector<AttentionCache> attn;
    std::vector<DenseCache> corr;
    DenseCache corr_out;
    std::vector<DenseCache> gate;
    double gate_sum = 0.0;
};

SetForward set_forward_cached(const ModelParams& p, std::span<const double> tokens, double e_inf, bool keep) {
    const auto& spec = p.set_model();
    if (tokens.empty()) throw InputError("set model needs at least one token");
    SetForward f;
    MatrixXd h = Eigen::Map<const VectorXd>(tokens.data(), static_cast<Eigen::Index>(tokens.size()));
    standardize_columns(p, h);
    if (keep) f.attn.resize(spec.n_attention_layers);
    for (int l = 0; l < spec.n_attention_layers; ++l) {
        const std::string n = "attn" + std::to_string(l);
        h = attention_forward(h, p.at(n + ".wq"), p.at(n + ".wk"), p.at(n + ".wv"), keep ? &f.attn[l] : nullptr);
    }

    MatrixXd c = h;
    if (keep) f.corr.resize(spec.corr_head_widths.size());
    for (std::size_t l = 0; l < spec.corr_head_widths.size(); ++l) {
        const std::string n = "corr" + std::to_string(l);
        c = dense_tokens(c, p.at(n + ".weight"), p.at(n + ".bias"), Activation::relu, keep ? &f.corr[l] : nullptr);
    }
    const MatrixXd per_token = dense_tokens(c, p.at("corr_out.weight"), p.at("corr_out.bias"), Activation::linear,
                                            keep ? &f.corr_out : nullptr);
    f.out.e_corr = per_token.sum();

    MatrixXd g = h;
    if (keep) f.gate.resize(spec.gate_widths.size());
    for (std::size_t l = 0; l < spec.gate_widths.size(); ++l) {
        const std::string n = "gate" + std::to_string(l);
        g = dense_tokens(g, p.at(n + ".weight"), p.at(n + ".bias"), Activation::relu, keep ? &f.gate[l] : nullptr);
    }
    f.gate_sum = g.sum();
    f.out.omega = sigmoid(f.gate_sum);
    f.out.e_total = gate_combine(f.out.omega, f.out.e_corr, e_inf);
    return f;
}

// Accumulates upstream * dE_total/dtheta into `grad`.
void set_backward(const ModelParams& p, const Sample& s, double upstream, ParamBuffers& grad) {
    const auto& spec = p.set_model();
    const SetForward f = set_forward_cached(p, s.features, s.e_infinity, true);
    const double omega = f.out.omega;
    const double g_corr = upstream * (1.0 - omega);
    const double g_sum = upstream * (s.e_infinity - f.out.e_corr) * omega * (1.0 - omega);
    const Eigen::Index t = static_cast<Eigen::Index>(s.features.size());

    auto gw = [&](const std::string& name) -> MatrixXd& { return grad[p.index_of(name)]; };

    // Correlation pathway.
    MatrixXd dc = MatrixXd::Constant(t, 1, g_corr);
    dc = dense_tokens_backward(dc, f.corr_out, p.at("corr_out.weight"), Activation::linear, gw("corr_out.weight"),
                               gw("corr_out.bias"));
    for (int l = static_cast<int>(spec.corr_head_widths.size()) - 1; l >= 0; --l) {
        const std::string n = "corr" + std::to_string(l);
        dc = dense_tokens_backward(dc, f.corr[l], p.at(n + ".weight"), Activation::relu, gw(n + ".weight"),
                                   gw(n + ".bias"));
    }

    // Gate pathway: d(sum)/d(entries) = 1.
    MatrixXd dg = MatrixXd::Constant(t, spec.gate_widths.back(), g_sum);
    for (int l = static_cast<int>(spec.gate_widths.size()) - 1; l >= 0; --l) {
        const std::string n = "gate" + std::to_string(l);
        dg = dense_tokens_backward(dg, f.gate[l], p.at(n + ".weight"), Activation::relu, gw(n + ".weight"),
                                   gw(n + ".bias"));
    }

    MatrixXd dh = dc + dg;
    for (int l = spec.n_attention_layers - 1; l >= 0; --l) {
        const std::string n = "attn" + std::to_string(l);
        const auto& c = f.attn[l];
        const double scale = 1.0 / std::sqrt(static_cast<double>(c.q.cols()));
        const MatrixXd da = dh * c.v.transpose();
        const MatrixXd dv = c.a.transpose() * dh;
        // Softmax Jacobian, row by row: dS = A * (dA - rowsum(dA * A)).
        const VectorXd dot = da.cwiseProduct(c.a).rowwise().sum();
        MatrixXd ds = c.a.cwiseProduct(da.colwise() - dot) * scale;
        const MatrixXd dq = ds * c.k;
        const MatrixXd dk = ds.transpose() * c.q;
        const MatrixXd& wq = p.at(n + ".wq");
        const MatrixXd& wk = p.at(n + ".wk");
        const MatrixXd& wv = p.at(n + ".wv");
        gw(n + ".wq") += c.x.transpose() * dq;
        gw(n + ".wk") += c.x.transpose() * dk;
        gw(n + ".wv") += c.x.transpose() * dv;
        if (l > 0) dh = dq * wq.transpose() + dk * wk.transpose() + dv * wv.transpose();
    }
}

LossGradient mlp_backward(const ModelParams& p, std::span<const Sample> data, std::span<const std::size_t> batch) {
    const auto& spec = p.mlp();
    const Eigen::Index bsz = static_cast<Eigen::Index>(batch.size());
    // Columns are samples.
    MatrixXd a(spec.input_width, bsz);
    VectorXd target(bsz);
    for (Eigen::Index j = 0; j < bsz; ++j) {
        const auto& s = data[batch[j]];
        check_mlp_input(p, static_cast<Eigen::Index>(s.features.size()));
        a.col(j) = Eigen::Map<const VectorXd>(s.features.data(), spec.input_width);
        target(j) = s.target;
    }
    standardize_columns(p, a);
    const std::size_t n_layers = spec.layer_sizes.size();
    std::vector<MatrixXd> acts{a}, pre;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const std::string n = "dense" + std::to_string(l);
        MatrixXd z = p.at(n + ".weight") * acts.back();
        z.colwise() += p.at(n + ".bias").col(0);
        acts.push_back(activate(z, spec.activations[l]));
        pre.push_back(std::move(z));
    }
    const VectorXd diff = acts.back().row(0).transpose() - target;
    LossGradient out;
    out.loss = diff.squaredNorm() / static_cast<double>(bsz);
    out.gradient = zeros_like(p);
    MatrixXd dy = (2.0 / static_cast<double>(bsz)) * diff.transpose();
    for (std::size_t l = n_layers; l-- > 0;) {
        const std::string n = "dense" + std::to_string(l);
        const MatrixXd dz = activation_backward(dy, pre[l], acts[l + 1], spec.activations[l]);
        out.gradient[p.index_of(n + ".weight")] = dz * acts[l].transpose();
        out.gradient[p.index_of(n + ".bias")] = dz.rowwise().sum();
        if (l > 0) dy = p.at(n + ".weight").transpose() * dz;
    }
    return out;
}

LossGradient set_model_backward(const ModelParams& p, std::span<const Sample> data, std::span<const std::size_t> batch,
                                Exec exec) {
    const long bsz = static_cast<long>(batch.size());
    std::vector<ParamBuffers> per_sample(batch.size());
    std::vector<double> sq(batch.size());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
    for (long j = 0; j < bsz; ++j) {
        const Sample& s = data[batch[j]];
        const double pred = set_model_forward(p, s).e_total;
        const double diff = pred - s.target;
        sq[j] = diff * diff;
        per_sample[j] = zeros_like(p);
        set_backward(p, s, 2.0 * diff / static_cast<double>(bsz), per_sample[j]);
    }
    LossGradient out;
    out.gradient = zeros_like(p);
    for (long j = 0; j < bsz; ++j) {
        out.loss += sq[j];
        for (std::size_t i = 0; i < out.gradient.size(); ++i) out.gradient[i] += per_sample[j][i];
    }
    out.loss /= static_cast<double>(bsz);
    return out;
}

}  // namespace

Eigen::MatrixXd attention_layer(const Eigen::MatrixXd& x, const Eigen::MatrixXd& wq, const Eigen::MatrixXd& wk,
                                const Eigen::MatrixXd& wv) {
    return attention_forward(x, wq, wk, wv, nullptr);
}

double mlp_forward(const ModelParams& p, std::span<const double> features) {
    check_mlp_input(p, static_cast<Eigen::Index>(features.size()));
    const MatrixXd x = Eigen::Map<const VectorXd>(features.data(), static_cast<Eigen::Index>(features.size())).transpose();
    return mlp_forward_batch(p, x)(0);
}

Eigen::VectorXd mlp_forward_batch(const ModelParams& p, const Eigen::MatrixXd& x) {
    const auto& spec = p.mlp();
    check_mlp_input(p, x.cols());
    MatrixXd a = x.transpose();
    standardize_columns(p, a);
    for (std::size_t l = 0; l < spec.layer_sizes.size(); ++l) {
        const std::string n = "dense" + std::to_string(l);
        MatrixXd z = p.at(n + ".weight") * a;
        z.colwise() += p.at(n + ".bias").col(0);
        a = activate(z, spec.activations[l]);
    }
    return a.row(0).transpose();
}

SetOutput set_model_forward(const ModelParams& p, std::span<const double> tokens, double e_infinity) {
    return set_forward_cached(p, tokens, e_infinity, false).out;
}

SetOutput set_model_forward(const ModelParams& p, const Sample& s) {
    return set_model_forward(p, s.features, s.e_infinity);
}

double predict(const ModelParams& p, const Sample& s) {
    return p.is_mlp() ? mlp_forward(p, s.features) : set_model_forward(p, s).e_total;
}

std::vector<double> predict_all(const ModelParams& p, std::span<const Sample> data, Exec exec) {
    std::vector<double> out(data.size());
    if (data.empty()) return out;
    if (p.is_mlp()) {
        const int w = p.mlp().input_width;
        MatrixXd x(static_cast<Eigen::Index>(data.size()), w);
        for (std::size_t i = 0; i < data.size(); ++i) {
            check_mlp_input(p, static_cast<Eigen::Index>(data[i].features.size()));
            x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const VectorXd>(data[i].features.data(), w).transpose();
        }
        const VectorXd y = mlp_forward_batch(p, x);
        for (std::size_t i = 0; i < data.size(); ++i) out[i] = y(static_cast<Eigen::Index>(i));
        return out;
    }
    const long n = static_cast<long>(data.size());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
    for (long i = 0; i < n; ++i) out[i] = set_model_forward(p, data[i]).e_total;
    return out;
}

LossGradient backward(const ModelParams& p, std::span<const Sample> data, std::span<const std::size_t> batch,
                      const std::set<std::string>& frozen_layers, Exec exec) {
    if (batch.empty()) throw InputError("empty batch");
    LossGradient out = p.is_mlp() ? mlp_backward(p, data, batch) : set_model_backward(p, data, batch, exec);
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        if (frozen_layers.contains(p.tensors[i].layer())) out.gradient[i].setZero();
    }
    return out;
}

LossGradient backward(const ModelParams& p, std::span<const Sample> data, const std::set<std::string>& frozen_layers,
                      Exec exec) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return backward(p, data, all, frozen_layers, exec);
}

void fit_input_standardization(ModelParams& p, std::span<const Sample> data) {
    if (!has_input_layer(p)) return;
    if (data.empty()) throw InputError("cannot fit standardization on an empty dataset");
    MatrixXd& shift = p.at("input.shift");
    MatrixXd& scale = p.at("input.scale");
    const Eigen::Index w = shift.rows();
    VectorXd sum = VectorXd::Zero(w), sq = VectorXd::Zero(w);
    double count = 0.0;
    for (const auto& s : data) {
        const Eigen::Index n = static_cast<Eigen::Index>(s.features.size());
        const Eigen::Map<const VectorXd> x(s.features.data(), n);
        if (w == 1) {
            sum(0) += x.sum();
            sq(0) += x.squaredNorm();
            count += static_cast<double>(n);
        } else {
            if (n != w) throw InputError("feature length does not match the model input width");
            sum += x;
            sq += x.cwiseProduct(x);
            count += 1.0;
        }
    }
    for (Eigen::Index i = 0; i < w; ++i) {
        const double mean = sum(i) / count;
        const double var = std::max(0.0, sq(i) / count - mean * mean);
        shift(i, 0) = mean;
        // Constant features pass through unscaled.
        scale(i, 0) = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
}

double loss(const ModelParams& p, std::span<const Sample> data) {
    if (data.empty()) throw InputError("empty dataset");
    const auto pred = predict_all(p, data);
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) acc += (pred[i] - data[i].target) * (pred[i] - data[i].target);
    return acc / static_cast<double>(data.size());
}

}  // namespace geminet::ml
