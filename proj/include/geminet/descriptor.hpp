#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "geminet/integrals.hpp"
#include "geminet/parallel.hpp"

namespace geminet {

/// Two-body-only form of the N-electron Hamiltonian over M = 2 m
/// spin-orbitals (spin-blocked): H = sum k_pqrs a+_p a+_q a_s a_r with
///   k_pqrs = (h_pr d_qs + d_pr h_qs) / (2 (N - 1)) + V_pqrs / 2.
struct ReducedTensor {
    Tensor4 k;
    int n_electrons = 0;

    int n_spin_orbitals() const noexcept { return k.dim(); }
};

/// Reduced Hamiltonian projected onto antisymmetric spin-orbital pairs
/// A = (p < q). For N = 2 this is the FCI matrix in the pair basis.
struct GeminalMatrix {
    Eigen::MatrixXd k;
    std::vector<std::pair<int, int>> pairs;

    int n_spin_orbitals() const noexcept;
    /// Row of pair (p, q), p != q, in either order.
    int pair_index(int p, int q) const;
};

/// Sorted geminal eigenvalues: the invariant feature vector.
struct DescriptorVector {
    std::vector<double> eigenvalues;  // ascending, length M (M - 1) / 2
    int n_electrons = 0;
    double e_nuclear = 0.0;
};

/// Pair list (p < q) in row order: (0,1), (0,2), ..., (M-2, M-1).
std::vector<std::pair<int, int>> spin_orbital_pairs(int n_spin_orbitals);

ReducedTensor reduced_tensor(const IntegralSet& ints);

/// K_AB = k_pqrs + k_qpsr - k_qprs - k_pqsr for A = (p, q), B = (r, s).
GeminalMatrix geminal_matrix(const ReducedTensor& t);

/// Same matrix assembled straight from spatial integrals, without the M^4
/// spin-orbital tensor.
GeminalMatrix geminal_matrix_direct(const IntegralSet& ints);

/// Full symmetric eigendecomposition; throws SolverError if a residual
/// |K v - e v| exceeds 1e-9 or the solver fails.
DescriptorVector eigen_descriptor(const GeminalMatrix& g, const IntegralSet& meta);

/// Eigenvalues only (no residual check), for bulk featurization.
DescriptorVector eigen_descriptor_fast(const GeminalMatrix& g, const IntegralSet& meta);

/// Orthonormal integrals to descriptor. Materializes the spin-orbital tensor
/// up to M = 24 and uses the direct route above that, or always when `fast`.
DescriptorVector describe(const IntegralSet& ints, bool fast = false);

/// Featurizes many systems; one task per system.
std::vector<DescriptorVector> describe_all(std::span<const IntegralSet> systems, Exec exec = Exec::parallel);

/// Direct sum of non-interacting fragments: block-diagonal one-electron
/// part, zero two-electron integrals across fragments, summed electron
/// counts and nuclear repulsions.
IntegralSet compose_fragments(std::span<const IntegralSet> parts);

inline int default_occupied_geminals(int n_electrons) { return n_electrons * (n_electrons - 1) / 2; }

/// 0.5 * sum of the n_occ lowest eigenvalues (default N (N - 1) / 2).
double e_infinity(const DescriptorVector& d, std::optional<int> n_occ = std::nullopt);

/// Same estimate from a raw sorted spectrum.
double e_infinity(std::span<const double> sorted_eigenvalues, int n_electrons, std::optional<int> n_occ = std::nullopt);

}  // namespace geminet
