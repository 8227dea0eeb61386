#include "geminet/fci.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <Eigen/Dense>

#include "geminet/error.hpp"

namespace geminet {

namespace {

inline int parity_below(std::uint64_t mask, int p) {
    return std::popcount(mask & ((std::uint64_t{1} << p) - 1)) & 1;
}

// Fermionic a_p / a+_p on an occupation mask; returns the sign, or 0 when the
// result vanishes.
inline int annihilate(std::uint64_t& mask, int p) {
    const std::uint64_t bit = std::uint64_t{1} << p;
    if (!(mask & bit)) return 0;
    const int sign = parity_below(mask, p) ? -1 : 1;
    mask ^= bit;
    return sign;
}

inline int create(std::uint64_t& mask, int p) {
    const std::uint64_t bit = std::uint64_t{1} << p;
    if (mask & bit) return 0;
    const int sign = parity_below(mask, p) ? -1 : 1;
    mask |= bit;
    return sign;
}

inline std::uint64_t combined(const Determinant& d, int m) { return d.alpha | (d.beta << m); }

// Spin-orbital <pq|rs> from spatial integrals, spin-blocked ordering.
inline double so_eri(const IntegralSet& ints, int p, int q, int r, int s) {
    const int m = ints.n_spatial;
    if ((p < m) != (r < m) || (q < m) != (s < m)) return 0.0;
    return ints.eri(p % m, q % m, r % m, s % m);
}

inline double so_h(const IntegralSet& ints, int p, int r) {
    const int m = ints.n_spatial;
    if ((p < m) != (r < m)) return 0.0;
    return ints.core_h(p % m, r % m);
}

inline double antisym(const IntegralSet& ints, int p, int q, int r, int s) {
    return so_eri(ints, p, q, r, s) - so_eri(ints, p, q, s, r);
}

std::vector<int> bits_of(std::uint64_t mask) {
    std::vector<int> out;
    while (mask) {
        out.push_back(std::countr_zero(mask));
        mask &= mask - 1;
    }
    return out;
}

long binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    long r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

std::vector<Determinant> enumerate_determinants(int m_spatial, int n_alpha, int n_beta) {
    FciSpace space(m_spatial, n_alpha, n_beta);
    std::vector<Determinant> out;
    out.reserve(space.dimension());
    for (std::size_t i = 0; i < space.dimension(); ++i) out.push_back(space.determinant(i));
    return out;
}

double slater_condon(const Determinant& bra, const Determinant& ket, const IntegralSet& ints) {
    if (!ints.orthonormal) throw InputError("Slater-Condon rules need an orthonormal basis");
    const int m = ints.n_spatial;
    const std::uint64_t b = combined(bra, m);
    const std::uint64_t k = combined(ket, m);
    if (std::popcount(b) != std::popcount(k)) return 0.0;
    const std::uint64_t diff = b ^ k;
    const int degree = std::popcount(diff) / 2;
    if (degree > 2) return 0.0;

    if (degree == 0) {
        const auto occ = bits_of(k);
        double e = 0.0;
        for (std::size_t i = 0; i < occ.size(); ++i) {
            e += so_h(ints, occ[i], occ[i]);
            for (std::size_t j = i + 1; j < occ.size(); ++j) e += antisym(ints, occ[i], occ[j], occ[i], occ[j]);
        }
        return e;
    }
    if (degree == 1) {
        const int r = std::countr_zero(k & diff);
        const int p = std::countr_zero(b & diff);
        std::uint64_t t = k;
        const int sign = annihilate(t, r) * create(t, p);
        double v = so_h(ints, p, r);
        for (int j : bits_of(k & b)) v += antisym(ints, p, j, r, j);
        return sign * v;
    }
    const auto holes = bits_of(k & diff);      // r < s
    const auto particles = bits_of(b & diff);  // p < q
    const int r = holes[0], s = holes[1], p = particles[0], q = particles[1];
    std::uint64_t t = k;
    const int sign = annihilate(t, r) * annihilate(t, s) * create(t, q) * create(t, p);
    return sign * antisym(ints, p, q, r, s);
}

// ---------------------------------------------------------------------------

FciSpace::FciSpace(int m_spatial, int n_alpha, int n_beta) : m_(m_spatial) {
    if (m_spatial <= 0 || m_spatial > 31) throw InputError("FCI supports 1..31 spatial orbitals");
    if (n_alpha < 0 || n_beta < 0 || n_alpha > m_spatial || n_beta > m_spatial) {
        throw InputError("occupancy exceeds orbital count");
    }
    alpha_ = make_strings(m_spatial, n_alpha);
    beta_ = make_strings(m_spatial, n_beta);
    for (std::size_t i = 0; i < alpha_.size(); ++i) alpha_index_[alpha_[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < beta_.size(); ++i) beta_index_[beta_[i]] = static_cast<int>(i);
    alpha_repl_ = make_replacements(alpha_, alpha_index_);
    beta_repl_ = make_replacements(beta_, beta_index_);
}

std::vector<std::uint64_t> FciSpace::make_strings(int m, int n) {
    std::vector<std::uint64_t> out;
    out.reserve(binomial(m, n));
    if (n == 0) {
        out.push_back(0);
        return out;
    }
    // Gosper's hack walks n-bit masks in ascending order.
    std::uint64_t v = (std::uint64_t{1} << n) - 1;
    const std::uint64_t limit = std::uint64_t{1} << m;
    while (v < limit) {
        out.push_back(v);
        const std::uint64_t c = v & -v;
        const std::uint64_t r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    return out;
}

std::vector<std::vector<FciSpace::Replacement>> FciSpace::make_replacements(
    const std::vector<std::uint64_t>& strings, const std::unordered_map<std::uint64_t, int>& lookup) const {
    std::vector<std::vector<Replacement>> out(strings.size());
    for (std::size_t i = 0; i < strings.size(); ++i) {
        for (int q : bits_of(strings[i])) {
            for (int p = 0; p < m_; ++p) {
                std::uint64_t t = strings[i];
                const int s1 = annihilate(t, q);
                const int s2 = create(t, p);
                if (s2 == 0) continue;
                // E_pq|I> = sign|J>  implies  <I|E_qp|J> = sign
                out[i].push_back({lookup.at(t), static_cast<std::int16_t>(q * m_ + p),
                                  static_cast<std::int16_t>(s1 * s2)});
            }
        }
    }
    return out;
}

Determinant FciSpace::determinant(std::size_t index) const {
    const std::size_t nb = beta_.size();
    return {alpha_[index / nb], beta_[index % nb]};
}

std::ptrdiff_t FciSpace::index_of(const Determinant& d) const {
    auto a = alpha_index_.find(d.alpha);
    auto b = beta_index_.find(d.beta);
    if (a == alpha_index_.end() || b == beta_index_.end()) return -1;
    return static_cast<std::ptrdiff_t>(a->second) * static_cast<std::ptrdiff_t>(beta_.size()) + b->second;
}

Eigen::VectorXd FciSpace::diagonal(const IntegralSet& ints) const {
    Eigen::VectorXd d(static_cast<Eigen::Index>(dimension()));
    for (std::size_t i = 0; i < dimension(); ++i) {
        const auto det = determinant(i);
        d(static_cast<Eigen::Index>(i)) = slater_condon(det, det, ints);
    }
    return d;
}

Eigen::VectorXd FciSpace::sigma(const IntegralSet& ints, const Eigen::VectorXd& c, Exec exec) const {
    if (!ints.orthonormal) throw InputError("sigma needs an orthonormal basis");
    if (ints.n_spatial != m_) throw InputError("integral set does not match FCI space");
    const Eigen::Index dim = static_cast<Eigen::Index>(dimension());
    if (c.size() != dim) throw InputError("CI vector has wrong length");
    const int m = m_;
    const int m2 = m * m;
    const int na = static_cast<int>(alpha_.size());
    const int nb = static_cast<int>(beta_.size());

    // W(pq, rs) = (pq|rs) = <pr|qs>; k = h - 1/2 sum_r (pr|rq)
    Eigen::MatrixXd w(m2, m2);
    for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q)
            for (int r = 0; r < m; ++r)
                for (int s = 0; s < m; ++s) w(p * m + q, r * m + s) = ints.eri(p, r, q, s);
    Eigen::MatrixXd kmat = ints.core_h;
    for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q)
            for (int r = 0; r < m; ++r) kmat(p, q) -= 0.5 * ints.eri(p, r, r, q);

    // D(I, pq) = <I|E_pq|c>, column-major so each operator column is contiguous.
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(dim, m2);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int ia = 0; ia < na; ++ia) {
        const Eigen::Index row = static_cast<Eigen::Index>(ia) * nb;
        for (const auto& e : alpha_repl_[ia]) {
            const Eigen::Index src = static_cast<Eigen::Index>(e.target) * nb;
            d.col(e.pq).segment(row, nb) += e.sign * c.segment(src, nb);
        }
        for (int ib = 0; ib < nb; ++ib) {
            for (const auto& e : beta_repl_[ib]) d(row + ib, e.pq) += e.sign * c(row + e.target);
        }
    }

    Eigen::MatrixXd f = 0.5 * (d * w);
    for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q) f.col(p * m + q) += kmat(p, q) * c;

    Eigen::VectorXd s = Eigen::VectorXd::Zero(dim);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int ia = 0; ia < na; ++ia) {
        const Eigen::Index row = static_cast<Eigen::Index>(ia) * nb;
        for (const auto& e : alpha_repl_[ia]) {
            const Eigen::Index src = static_cast<Eigen::Index>(e.target) * nb;
            s.segment(row, nb) += e.sign * f.col(e.pq).segment(src, nb);
        }
        for (int ib = 0; ib < nb; ++ib) {
            double acc = 0.0;
            for (const auto& e : beta_repl_[ib]) acc += e.sign * f(row + e.target, e.pq);
            s(row + ib) += acc;
        }
    }
    return s;
}

Eigen::MatrixXd FciSpace::dense_hamiltonian(const IntegralSet& ints, Exec exec) const {
    const Eigen::Index dim = static_cast<Eigen::Index>(dimension());
    Eigen::MatrixXd h(dim, dim);
#pragma omp parallel for schedule(dynamic, 16) if (exec == Exec::parallel)
    for (Eigen::Index i = 0; i < dim; ++i) {
        const auto bra = determinant(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j <= i; ++j) {
            const double v = slater_condon(bra, determinant(static_cast<std::size_t>(j)), ints);
            h(i, j) = v;
            h(j, i) = v;
        }
    }
    return h;
}

// ---------------------------------------------------------------------------

namespace {

void fix_phase(Eigen::VectorXd& v) {
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0) v = -v;
}

FciResult davidson(const FciSpace& space, const IntegralSet& ints, bool want_vector, const FciOptions& opt) {
    const Eigen::Index dim = static_cast<Eigen::Index>(space.dimension());
    const Eigen::VectorXd diag = space.diagonal(ints);

    std::vector<Eigen::VectorXd> basis;
    std::vector<Eigen::VectorXd> images;
    Eigen::Index start = 0;
    diag.minCoeff(&start);
    basis.push_back(Eigen::VectorXd::Unit(dim, start));
    images.push_back(space.sigma(ints, basis.back(), opt.exec));

    FciResult res;
    res.solver = FciSolver::iterative;
    Eigen::VectorXd x, ax;
    double theta = 0.0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        const int n = static_cast<int>(basis.size());
        Eigen::MatrixXd sub(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) sub(i, j) = sub(j, i) = basis[i].dot(images[j]);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
        theta = es.eigenvalues()(0);
        const Eigen::VectorXd y = es.eigenvectors().col(0);
        x = Eigen::VectorXd::Zero(dim);
        ax = Eigen::VectorXd::Zero(dim);
        for (int i = 0; i < n; ++i) {
            x += y(i) * basis[i];
            ax += y(i) * images[i];
        }
        const Eigen::VectorXd r = ax - theta * x;
        res.iterations = it;
        res.residual = r.norm();
        if (res.residual < opt.residual_tol) break;
        if (it == opt.max_iter) {
            throw SolverError("Davidson did not converge in " + std::to_string(opt.max_iter) +
                              " iterations (residual " + std::to_string(res.residual) + ")");
        }

        Eigen::VectorXd t(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            double denom = theta - diag(i);
            if (std::abs(denom) < 1e-8) denom = denom < 0 ? -1e-8 : 1e-8;
            t(i) = r(i) / denom;
        }
        if (n >= opt.subspace_max) {
            const double nx = x.norm();
            basis.assign(1, x / nx);
            images.assign(1, ax / nx);
        }
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) t -= b.dot(t) * b;
        }
        const double nt = t.norm();
        if (nt < 1e-14) throw SolverError("Davidson correction vector collapsed");
        t /= nt;
        basis.push_back(t);
        images.push_back(space.sigma(ints, t, opt.exec));
    }
    res.energy_electronic = theta;
    if (want_vector) {
        x.normalize();
        fix_phase(x);
        res.ground_vector = std::move(x);
    }
    return res;
}

}  // namespace

FciResult ground_state(const IntegralSet& ints, bool want_vector, const FciOptions& opt) {
    if (!ints.orthonormal) throw InputError("FCI needs an orthonormal basis");
    if (ints.n_electrons % 2 != 0) throw InputError("FCI is restricted to the Sz = 0 sector of even N");
    const int n_half = ints.n_electrons / 2;
    FciSpace space(ints.n_spatial, n_half, n_half);
    const FciSolver solver =
        opt.force_solver.value_or(space.dimension() <= opt.dense_max_dim ? FciSolver::dense : FciSolver::iterative);

    FciResult res;
    if (solver == FciSolver::dense) {
        const Eigen::MatrixXd h = space.dense_hamiltonian(ints, opt.exec);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            h, want_vector ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
        if (es.info() != Eigen::Success) throw SolverError("dense FCI eigensolve failed");
        res.solver = FciSolver::dense;
        res.energy_electronic = es.eigenvalues()(0);
        if (want_vector) {
            Eigen::VectorXd v = es.eigenvectors().col(0);
            fix_phase(v);
            res.residual = (h * v - res.energy_electronic * v).norm();
            res.ground_vector = std::move(v);
        }
    } else {
        res = davidson(space, ints, want_vector, opt);
    }
    res.dimension = space.dimension();
    res.energy_total = res.energy_electronic + ints.e_nuclear;
    res.n_spatial = ints.n_spatial;
    res.n_alpha = n_half;
    res.n_beta = n_half;
    return res;
}

Tensor4 rdm2(const FciResult& result, const IntegralSet& ints) {
    if (!result.ground_vector) throw InputError("rdm2 needs the FCI ground vector");
    if (ints.n_spatial != result.n_spatial) throw InputError("integral set does not match FCI result");
    const int m = result.n_spatial;
    const int big_m = 2 * m;
    const FciSpace space(m, result.n_alpha, result.n_beta);
    const auto& c = *result.ground_vector;
    const std::uint64_t low = (std::uint64_t{1} << m) - 1;

    Tensor4 gamma(big_m);
    for (std::size_t k = 0; k < space.dimension(); ++k) {
        const double ck = c(static_cast<Eigen::Index>(k));
        if (ck == 0.0) continue;
        const std::uint64_t ket = combined(space.determinant(k), m);
        const auto occ = bits_of(ket);
        for (int r : occ) {
            for (int s : occ) {
                if (r == s) continue;
                std::uint64_t t = ket;
                const int s1 = annihilate(t, r) * annihilate(t, s);
                for (int q = 0; q < big_m; ++q) {
                    for (int p = 0; p < big_m; ++p) {
                        if (p == q) continue;
                        std::uint64_t u = t;
                        const int s2 = create(u, q);
                        if (s2 == 0) continue;
                        const int s3 = create(u, p);
                        if (s3 == 0) continue;
                        const auto idx = space.index_of({u & low, u >> m});
                        if (idx < 0) continue;
                        gamma(p, q, r, s) += c(idx) * ck * s1 * s2 * s3;
                    }
                }
            }
        }
    }
    return gamma;
}

}  // namespace geminet
