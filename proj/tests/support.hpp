#pragma once

// Helpers shared by the unit and acceptance tests.

#include <cmath>
#include <random>
#include <span>
#include <algorithm>
#include <vector>

#include <Eigen/Dense>

#include "geminet/descriptor.hpp"
#include "geminet/geometry.hpp"
#include "geminet/integrals.hpp"
#include "geminet/mf.hpp"
#include "geminet/ml/model.hpp"

namespace geminet::testing {

// Reference values from PySCF (STO-6G, same geometries), frozen here.
namespace oracle {
inline constexpr double h2_eq_r = 0.7414;  // angstrom
inline constexpr double h2_eq_rhf = -1.125292577717591;
inline constexpr double h2_eq_mp2 = -1.138493246424288;
inline constexpr double h2_eq_fci = -1.1459217373175763;
inline constexpr double h2_8a_rhf = -0.5876528304538744;
inline constexpr double h2_8a_fci = -0.9420781083671299;
inline constexpr double h_atom = -0.47103905418349024;
inline constexpr double boys_f0_1 = 0.746824132812427;
inline constexpr double boys_f0_10 = 0.28024739050664277;  // 0.5 sqrt(pi/10) erf(sqrt(10))
}  // namespace oracle

inline Geometry h2(double r) { return make_hydrogen_cluster({{0, 0, 0}, {0, 0, r}}, "h2", {{"r", r}}); }

inline Eigen::MatrixXd random_orthogonal(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a(i, j) = g(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    // Fix column signs so the distribution is uniform.
    for (int j = 0; j < n; ++j)
        if (qr.matrixQR()(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
    Eigen::Matrix3d r = random_orthogonal(3, rng);
    if (r.determinant() < 0) r.col(0) *= -1.0;
    return r;
}

inline Geometry rigid_motion(const Geometry& g, const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
    Geometry out = g;
    for (auto& p : out.positions) p = r * p + t;
    return out;
}

/// Block-diagonal alpha/beta rotation over 2 m spin-orbitals.
inline Eigen::MatrixXd spin_preserving_rotation(int m, std::mt19937_64& rng) {
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    u.topLeftCorner(m, m) = random_orthogonal(m, rng);
    u.bottomRightCorner(m, m) = random_orthogonal(m, rng);
    return u;
}

/// k'_pqrs = sum U_ap U_bq U_cr U_ds k_abcd: the reduced tensor in the
/// spin-orbital basis phi'_p = sum_a U_ap phi_a.
inline ReducedTensor rotate(const ReducedTensor& t, const Eigen::MatrixXd& u) {
    const int n = t.k.dim();
    Tensor4 a = t.k, b(n);
    for (int step = 0; step < 4; ++step) {
        // Contract the leading index and cycle it to the back.
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q)
                for (int r = 0; r < n; ++r)
                    for (int s = 0; s < n; ++s) {
                        double v = 0.0;
                        for (int x = 0; x < n; ++x) v += u(x, s) * a(x, p, q, r);
                        b(p, q, r, s) = v;
                    }
        std::swap(a, b);
    }
    return {a, t.n_electrons};
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return INFINITY;
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Ten representative clusters: three H2, four H4, three H6.
inline std::vector<Geometry> sample_geometries() {
    std::vector<Geometry> out = {h2(0.55), h2(0.7414), h2(2.5)};
    auto pick = [&](int n, const char* fam, std::size_t i) {
        auto all = generate(n, fam, default_grid(n, fam));
        out.push_back(all[i % all.size()]);
    };
    pick(4, "linear", 17);
    pick(4, "tetrahedral", 301);
    pick(4, "paldus", 40);
    pick(4, "linear", 90);
    pick(6, "hexagon_twist", 123);
    pick(6, "triangular_antiprism", 250);
    pick(6, "octahedral", 77);
    return out;
}

/// Synthetic samples with sorted features of width `width`; targets are a
/// smooth function of the features so a network can fit them.
inline std::vector<ml::Sample> synthetic_samples(int count, int width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 1.0);
    std::vector<ml::Sample> out;
    for (int i = 0; i < count; ++i) {
        ml::Sample s;
        s.n_electrons = 2;
        for (int j = 0; j < width; ++j) s.features.push_back(u(rng));
        std::sort(s.features.begin(), s.features.end());
        s.e_infinity = 0.5 * s.features.front();
        double t = 0.0;
        for (double f : s.features) t += 0.3 * f + 0.1 * std::sin(f);
        s.target = t;
        out.push_back(std::move(s));
    }
    return out;
}

struct GradientCheck {
    int checked = 0;
    double worst_relative = 0.0;
};

/// Compares `count` randomly chosen trainable parameters of the analytic MSE
/// gradient against central differences. The relative error uses
/// max(|analytic|, |numeric|, floor) as denominator so parameters with a
/// vanishing gradient are judged on an absolute scale.
inline GradientCheck finite_difference_check(ml::ModelParams p, std::span<const ml::Sample> data, int count,
                                             std::uint64_t seed, double step = 1e-5, double floor = 1e-4) {
    const auto analytic = ml::backward(p, data).gradient;
    std::vector<std::pair<std::size_t, Eigen::Index>> slots;
    for (std::size_t t = 0; t < p.tensors.size(); ++t) {
        if (p.tensors[t].layer() == ml::input_layer) continue;
        for (Eigen::Index k = 0; k < p.tensors[t].value.size(); ++k) slots.emplace_back(t, k);
    }
    std::mt19937_64 rng(seed);
    std::shuffle(slots.begin(), slots.end(), rng);
    GradientCheck out;
    for (int i = 0; i < count && i < static_cast<int>(slots.size()); ++i) {
        const auto [t, k] = slots[i];
        double& w = p.tensors[t].value.data()[k];
        const double w0 = w;
        w = w0 + step;
        const double up = ml::loss(p, data);
        w = w0 - step;
        const double down = ml::loss(p, data);
        w = w0;
        const double numeric = (up - down) / (2.0 * step);
        const double a = analytic[t].data()[k];
        const double denom = std::max({std::abs(a), std::abs(numeric), floor});
        out.worst_relative = std::max(out.worst_relative, std::abs(a - numeric) / denom);
        ++out.checked;
    }
    return out;
}

}  // namespace geminet::testing
