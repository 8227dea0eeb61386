#pragma once

#include <Eigen/Core>

#include "geminet/integrals.hpp"

namespace geminet {

struct OrbitalBasis {
    enum class Kind { lowdin, rhf, custom };

    Eigen::MatrixXd coefficients;  // columns are orbitals over AOs
    Kind kind = Kind::custom;
};

struct ScfResult {
    double energy_total = 0.0;
    double energy_electronic = 0.0;
    OrbitalBasis orbitals;
    Eigen::VectorXd orbital_energies;
    bool converged = false;
    int iterations = 0;
};

struct ScfOptions {
    int max_iter = 500;
    double conv_threshold = 1e-8;
    double damping = 0.3;
    int damping_iterations = 10;
    int diis_size = 8;
    /// Raises the virtual block of the Fock matrix by this much (hartree);
    /// 0 disables it.
    double level_shift = 0.0;
};

/// Symmetric orthogonalization C = S^{-1/2}. Throws SolverError when the
/// smallest overlap eigenvalue is below 1e-8.
OrbitalBasis lowdin(const Eigen::MatrixXd& overlap);

/// Rotates integrals into the orbital basis C (four one-index contractions).
/// C must be orthonormal with respect to the set's overlap.
IntegralSet transform_to_basis(const IntegralSet& ints, const OrbitalBasis& basis);

/// Löwdin-orthonormalized copy of AO integrals.
IntegralSet orthonormalize(const IntegralSet& ao);

/// Restricted Hartree-Fock. Tries a fixed sequence of starts and schedules
/// (see mf.cpp) and returns the first converged solution. `opt` is the
/// core-Hamiltonian schedule: damped iterations, then Pulay DIIS. Never
/// throws on non-convergence; check `converged`.
ScfResult rhf(const IntegralSet& ao, const ScfOptions& opt = {});

/// Closed-shell MP2 correlation energy from converged RHF orbitals. Throws
/// SolverError for a HOMO-LUMO gap below 1e-8 hartree.
double mp2_correlation(const IntegralSet& ao, const ScfResult& scf);

/// MP2 total energy: HF total plus the correlation correction.
double mp2(const IntegralSet& ao, const ScfResult& scf);

}  // namespace geminet
