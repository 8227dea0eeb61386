#include "geminet/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "geminet/error.hpp"

namespace geminet {

namespace {

constexpr int max_materialized_spin_orbitals = 24;

void require_reducible(const IntegralSet& ints) {
    if (!ints.orthonormal) throw InputError("descriptor needs orthonormal integrals");
    if (ints.n_electrons < 2) throw InputError("reduced Hamiltonian needs at least two electrons");
}

// k_pqrs evaluated from spatial integrals (spin-blocked spin-orbitals).
struct ReducedElement {
    const IntegralSet& ints;
    double one_body_scale;

    double operator()(int p, int q, int r, int s) const {
        const int m = ints.n_spatial;
        const bool sp = p < m, sq = q < m, sr = r < m, ss = s < m;
        const int P = p % m, Q = q % m, R = r % m, S = s % m;
        double v = 0.0;
        if (sp == sr && sq == ss) v += 0.5 * ints.eri(P, Q, R, S);
        if (q == s && sp == sr) v += one_body_scale * ints.core_h(P, R);
        if (p == r && sq == ss) v += one_body_scale * ints.core_h(Q, S);
        return v;
    }
};

template <class K>
Eigen::MatrixXd assemble_pairs(const std::vector<std::pair<int, int>>& pairs, const K& k) {
    const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        const auto [p, q] = pairs[a];
        for (Eigen::Index b = 0; b < n; ++b) {
            const auto [r, s] = pairs[b];
            out(a, b) = k(p, q, r, s) + k(q, p, s, r) - k(q, p, r, s) - k(p, q, s, r);
        }
    }
    return out;
}

DescriptorVector finish(std::vector<double> eig, const IntegralSet& meta) {
    std::sort(eig.begin(), eig.end());
    DescriptorVector d;
    d.eigenvalues = std::move(eig);
    d.n_electrons = meta.n_electrons;
    d.e_nuclear = meta.e_nuclear;
    return d;
}

}  // namespace

int GeminalMatrix::n_spin_orbitals() const noexcept {
    // P = M (M - 1) / 2
    const double p = static_cast<double>(pairs.size());
    return static_cast<int>(std::lround(0.5 + std::sqrt(0.25 + 2.0 * p)));
}

int GeminalMatrix::pair_index(int p, int q) const {
    if (p == q) throw InputError("geminal pair needs distinct spin-orbitals");
    if (p > q) std::swap(p, q);
    const int m = n_spin_orbitals();
    if (p < 0 || q >= m) throw InputError("spin-orbital index out of range");
    // rows before p: sum_{i<p} (M - 1 - i)
    return p * (2 * m - p - 1) / 2 + (q - p - 1);
}

std::vector<std::pair<int, int>> spin_orbital_pairs(int n_spin_orbitals) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(n_spin_orbitals) * (n_spin_orbitals - 1) / 2);
    for (int p = 0; p < n_spin_orbitals; ++p)
        for (int q = p + 1; q < n_spin_orbitals; ++q) pairs.emplace_back(p, q);
    return pairs;
}

ReducedTensor reduced_tensor(const IntegralSet& ints) {
    require_reducible(ints);
    const int big_m = 2 * ints.n_spatial;
    const ReducedElement elem{ints, 1.0 / (2.0 * (ints.n_electrons - 1))};
    ReducedTensor t;
    t.n_electrons = ints.n_electrons;
    t.k = Tensor4(big_m);
    for (int p = 0; p < big_m; ++p)
        for (int q = 0; q < big_m; ++q)
            for (int r = 0; r < big_m; ++r)
                for (int s = 0; s < big_m; ++s) t.k(p, q, r, s) = elem(p, q, r, s);
    return t;
}

GeminalMatrix geminal_matrix(const ReducedTensor& t) {
    GeminalMatrix g;
    g.pairs = spin_orbital_pairs(t.n_spin_orbitals());
    g.k = assemble_pairs(g.pairs, [&](int p, int q, int r, int s) { return t.k(p, q, r, s); });
    return g;
}

GeminalMatrix geminal_matrix_direct(const IntegralSet& ints) {
    require_reducible(ints);
    const ReducedElement elem{ints, 1.0 / (2.0 * (ints.n_electrons - 1))};
    GeminalMatrix g;
    g.pairs = spin_orbital_pairs(2 * ints.n_spatial);
    g.k = assemble_pairs(g.pairs, elem);
    return g;
}

DescriptorVector eigen_descriptor(const GeminalMatrix& g, const IntegralSet& meta) {
    if (g.k.rows() != g.k.cols() || g.k.rows() != static_cast<Eigen::Index>(g.pairs.size())) {
        throw InputError("geminal matrix shape mismatch");
    }
    if ((g.k - g.k.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InputError("geminal matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.k);
    if (es.info() != Eigen::Success) throw SolverError("geminal eigendecomposition did not converge");
    const auto& vals = es.eigenvalues();
    const auto& vecs = es.eigenvectors();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        const double res = (g.k * vecs.col(i) - vals(i) * vecs.col(i)).norm();
        if (!(res < 1e-9)) {
            throw SolverError("geminal eigenpair residual " + std::to_string(res) + " exceeds 1e-9");
        }
    }
    return finish({vals.data(), vals.data() + vals.size()}, meta);
}

DescriptorVector eigen_descriptor_fast(const GeminalMatrix& g, const IntegralSet& meta) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.k, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw SolverError("geminal eigendecomposition did not converge");
    const auto& vals = es.eigenvalues();
    return finish({vals.data(), vals.data() + vals.size()}, meta);
}

DescriptorVector describe(const IntegralSet& ints, bool fast) {
    if (fast) return eigen_descriptor_fast(geminal_matrix_direct(ints), ints);
    if (2 * ints.n_spatial <= max_materialized_spin_orbitals) {
        return eigen_descriptor(geminal_matrix(reduced_tensor(ints)), ints);
    }
    return eigen_descriptor(geminal_matrix_direct(ints), ints);
}

std::vector<DescriptorVector> describe_all(std::span<const IntegralSet> systems, Exec exec) {
    std::vector<DescriptorVector> out(systems.size());
    const long n = static_cast<long>(systems.size());
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
    for (long i = 0; i < n; ++i) out[i] = describe(systems[i], true);
    return out;
}

IntegralSet compose_fragments(std::span<const IntegralSet> parts) {
    if (parts.size() < 2) throw InputError("composition needs at least two fragments");
    int m = 0;
    IntegralSet out;
    for (const auto& part : parts) {
        if (!part.orthonormal) throw InputError("fragments must be orthonormal");
        m += part.n_spatial;
        out.n_electrons += part.n_electrons;
        out.e_nuclear += part.e_nuclear;
    }
    out.n_spatial = m;
    out.orthonormal = true;
    out.overlap = Eigen::MatrixXd::Identity(m, m);
    out.core_h = Eigen::MatrixXd::Zero(m, m);
    out.eri = Tensor4(m);
    int off = 0;
    for (const auto& part : parts) {
        const int n = part.n_spatial;
        out.core_h.block(off, off, n, n) = part.core_h;
        for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q)
                for (int r = 0; r < n; ++r)
                    for (int s = 0; s < n; ++s) out.eri(off + p, off + q, off + r, off + s) = part.eri(p, q, r, s);
        off += n;
    }
    return out;
}

double e_infinity(std::span<const double> sorted_eigenvalues, int n_electrons, std::optional<int> n_occ) {
    if (n_electrons % 2 != 0) throw InputError("E_infinity needs an even electron count");
    const int count = n_occ.value_or(default_occupied_geminals(n_electrons));
    if (count < 0 || static_cast<std::size_t>(count) > sorted_eigenvalues.size()) {
        throw InputError("occupied geminal count exceeds the number of eigenvalues");
    }
    double sum = 0.0;
    for (int i = 0; i < count; ++i) sum += sorted_eigenvalues[i];
    return 0.5 * sum;
}

double e_infinity(const DescriptorVector& d, std::optional<int> n_occ) {
    return e_infinity(d.eigenvalues, d.n_electrons, n_occ);
}

}  // namespace geminet
