#include "geminet/mf.hpp"

#include <cmath>
#include <deque>
#include <optional>

#include <Eigen/Dense>

#include "geminet/error.hpp"

namespace geminet {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// X'(b, c, d, p) = sum_a C(a, p) X(a, b, c, d); four applications transform
// every index and restore the original order.
std::vector<double> contract_first_rotate(const std::vector<double>& x, const Eigen::MatrixXd& c, int m) {
    const Eigen::Index rest = static_cast<Eigen::Index>(m) * m * m;
    Eigen::Map<const RowMatrix> in(x.data(), m, rest);
    std::vector<double> out(x.size());
    Eigen::Map<RowMatrix> res(out.data(), rest, m);
    res.noalias() = in.transpose() * c;
    return out;
}

Eigen::MatrixXd density(const Eigen::MatrixXd& c, int n_occ) {
    const auto occ = c.leftCols(n_occ);
    return 2.0 * occ * occ.transpose();
}

// Two-electron part of the closed-shell Fock matrix.
Eigen::MatrixXd fock_g(const IntegralSet& ao, const Eigen::MatrixXd& d) {
    const int m = ao.n_spatial;
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
    for (int p = 0; p < m; ++p) {
        for (int q = 0; q < m; ++q) {
            double acc = 0.0;
            for (int r = 0; r < m; ++r) {
                for (int s = 0; s < m; ++s) {
                    // J: (pq|rs) = <pr|qs>, K: (pr|qs) = <pq|rs>
                    acc += d(r, s) * (ao.eri(p, r, q, s) - 0.5 * ao.eri(p, q, r, s));
                }
            }
            g(p, q) = acc;
        }
    }
    return g;
}

}  // namespace

OrbitalBasis lowdin(const Eigen::MatrixXd& overlap) {
    if (overlap.rows() != overlap.cols() || overlap.rows() == 0) throw InputError("overlap must be square");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(overlap);
    if (es.info() != Eigen::Success) throw SolverError("overlap eigendecomposition failed");
    if (es.eigenvalues().minCoeff() < 1e-8) {
        throw SolverError("overlap nearly singular (smallest eigenvalue " +
                          std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
    OrbitalBasis b;
    b.kind = OrbitalBasis::Kind::lowdin;
    b.coefficients = es.eigenvectors() * es.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                     es.eigenvectors().transpose();
    return b;
}

IntegralSet transform_to_basis(const IntegralSet& ints, const OrbitalBasis& basis) {
    const int m = ints.n_spatial;
    const auto& c = basis.coefficients;
    if (c.rows() != m || c.cols() != m) throw InputError("orbital basis dimension mismatch");
    const Eigen::MatrixXd s = c.transpose() * ints.overlap * c;
    if ((s - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() > 1e-8) {
        throw InputError("orbital basis is not orthonormal for this overlap");
    }
    IntegralSet out;
    out.n_electrons = ints.n_electrons;
    out.n_spatial = m;
    out.overlap = Eigen::MatrixXd::Identity(m, m);
    out.core_h = c.transpose() * ints.core_h * c;
    out.core_h = 0.5 * (out.core_h + out.core_h.transpose()).eval();
    std::vector<double> x(ints.eri.data().begin(), ints.eri.data().end());
    for (int k = 0; k < 4; ++k) x = contract_first_rotate(x, c, m);
    out.eri = Tensor4(m);
    std::copy(x.begin(), x.end(), out.eri.data().begin());
    out.e_nuclear = ints.e_nuclear;
    out.orthonormal = true;
    return out;
}

IntegralSet orthonormalize(const IntegralSet& ao) {
    if (ao.orthonormal) return ao;
    return transform_to_basis(ao, lowdin(ao.overlap));
}

namespace {

ScfResult run_scf(const IntegralSet& ao, const Eigen::MatrixXd& x, Eigen::MatrixXd d, const ScfOptions& opt) {
    const int n_occ = ao.n_electrons / 2;
    const Eigen::MatrixXd& h = ao.core_h;
    const Eigen::MatrixXd& s = ao.overlap;

    auto diagonalize = [&](const Eigen::MatrixXd& f, Eigen::MatrixXd& c, Eigen::VectorXd& eps) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.transpose() * f * x);
        if (es.info() != Eigen::Success) throw SolverError("Fock diagonalization failed");
        c = x * es.eigenvectors();
        eps = es.eigenvalues();
    };

    ScfResult res;
    Eigen::MatrixXd c;
    Eigen::VectorXd eps;
    std::deque<Eigen::MatrixXd> fock_hist, err_hist;
    for (int it = 1; it <= opt.max_iter; ++it) {
        const Eigen::MatrixXd f = h + fock_g(ao, d);
        Eigen::MatrixXd f_use = f;
        if (opt.level_shift > 0.0) f_use += opt.level_shift * (s - 0.5 * s * d * s);
        if (it > opt.damping_iterations && opt.diis_size > 1) {
            fock_hist.push_back(f);
            err_hist.push_back(f * d * s - s * d * f);
            if (static_cast<int>(fock_hist.size()) > opt.diis_size) {
                fock_hist.pop_front();
                err_hist.pop_front();
            }
            const int n = static_cast<int>(fock_hist.size());
            if (n >= 2) {
                Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + 1, n + 1);
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < n; ++j) b(i, j) = err_hist[i].cwiseProduct(err_hist[j]).sum();
                    b(i, n) = b(n, i) = -1.0;
                }
                Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
                rhs(n) = -1.0;
                const Eigen::VectorXd w = b.colPivHouseholderQr().solve(rhs);
                if (w.allFinite()) {
                    f_use.setZero();
                    for (int i = 0; i < n; ++i) f_use += w(i) * fock_hist[i];
                }
            }
        }

        diagonalize(f_use, c, eps);
        const Eigen::MatrixXd d_new = density(c, n_occ);
        const double change = (d_new - d).cwiseAbs().maxCoeff();
        res.iterations = it;
        if (change < opt.conv_threshold) {
            d = d_new;
            res.converged = true;
            break;
        }
        d = it <= opt.damping_iterations ? Eigen::MatrixXd((1.0 - opt.damping) * d_new + opt.damping * d)
                                         : d_new;
    }

    // Energy and canonical orbitals of the final density.
    const Eigen::MatrixXd f = h + fock_g(ao, d);
    res.energy_electronic = 0.5 * (d.cwiseProduct(h + f)).sum();
    diagonalize(f, c, eps);
    res.energy_total = res.energy_electronic + ao.e_nuclear;
    res.orbitals.coefficients = c;
    res.orbitals.kind = OrbitalBasis::Kind::rhf;
    res.orbital_energies = eps;
    return res;
}

}  // namespace

ScfResult rhf(const IntegralSet& ao, const ScfOptions& opt) {
    const int m = ao.n_spatial;
    if (ao.n_electrons % 2 != 0) throw InputError("restricted HF needs an even electron count");
    const int n_occ = ao.n_electrons / 2;
    if (n_occ > m) throw InputError("more electron pairs than orbitals");
    const Eigen::MatrixXd x = lowdin(ao.overlap).coefficients;

    // Stretched clusters have several restricted solutions and the one
    // reached depends on the start, so schedules run in a fixed order and
    // the first converged one is kept: an atomic-superposition start (one
    // electron per hydrogen AO) with DIIS from the first step, then the
    // core-Hamiltonian start with short damping, long heavy damping from
    // either start, and finally a level shift without DIIS. The first two
    // follow common quantum chemistry defaults, so the baseline is the
    // solution a standard SCF finds rather than the lowest one.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.transpose() * ao.core_h * x);
    const Eigen::MatrixXd core = density(x * es.eigenvectors(), n_occ);
    const Eigen::MatrixXd atomic = Eigen::MatrixXd::Identity(m, m) * (static_cast<double>(ao.n_electrons) / m);
    ScfOptions plain = opt, heavy = opt, shifted = opt;
    plain.damping_iterations = 0;
    heavy.damping = 0.7;
    heavy.damping_iterations = 50;
    shifted.level_shift = std::max(opt.level_shift, 0.5);
    shifted.diis_size = 0;
    shifted.max_iter = std::max(opt.max_iter, 2000);
    const std::pair<const Eigen::MatrixXd*, const ScfOptions*> order[] = {
        {&atomic, &plain}, {&core, &opt},        {&atomic, &heavy},
        {&core, &heavy},   {&atomic, &shifted}, {&core, &shifted},
    };
    std::optional<ScfResult> first;
    for (const auto& [d0, o] : order) {
        ScfResult r = run_scf(ao, x, *d0, *o);
        if (r.converged) return r;
        if (!first) first = std::move(r);
    }
    return *first;
}

double mp2_correlation(const IntegralSet& ao, const ScfResult& scf) {
    if (!scf.converged) throw SolverError("MP2 requires a converged SCF");
    const int m = ao.n_spatial;
    const int n_occ = ao.n_electrons / 2;
    if (n_occ >= m) return 0.0;
    const auto& e = scf.orbital_energies;
    if (e(n_occ) - e(n_occ - 1) < 1e-8) throw SolverError("degenerate HOMO-LUMO gap in MP2");
    const IntegralSet mo = transform_to_basis(ao, scf.orbitals);
    double ecorr = 0.0;
    for (int i = 0; i < n_occ; ++i)
        for (int j = 0; j < n_occ; ++j)
            for (int a = n_occ; a < m; ++a)
                for (int b = n_occ; b < m; ++b) {
                    const double iajb = mo.eri(i, j, a, b);  // (ia|jb)
                    const double ibja = mo.eri(i, j, b, a);  // (ib|ja)
                    ecorr += iajb * (2.0 * iajb - ibja) / (e(i) + e(j) - e(a) - e(b));
                }
    return ecorr;
}

double mp2(const IntegralSet& ao, const ScfResult& scf) {
    return scf.energy_total + mp2_correlation(ao, scf);
}

}  // namespace geminet
