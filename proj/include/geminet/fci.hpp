#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "geminet/integrals.hpp"
#include "geminet/parallel.hpp"

namespace geminet {

/// Occupation bitmasks over spatial orbitals. The state is
/// a+_{alpha...} a+_{beta...}|0>, each string in ascending orbital order;
/// spin-orbital p < m is alpha p, m + p is beta p.
struct Determinant {
    std::uint64_t alpha = 0;
    std::uint64_t beta = 0;

    friend bool operator==(const Determinant&, const Determinant&) = default;
};

/// All C(m, n_alpha) * C(m, n_beta) determinants, alpha-major, each string
/// list in ascending bitmask order.
std::vector<Determinant> enumerate_determinants(int m_spatial, int n_alpha, int n_beta);

/// <bra|H|ket> in the orthonormal basis of `ints`, zero beyond double
/// excitations. Throws InputError for non-orthonormal integrals.
double slater_condon(const Determinant& bra, const Determinant& ket, const IntegralSet& ints);

enum class FciSolver { dense, iterative };

struct FciResult {
    double energy_electronic = 0.0;
    double energy_total = 0.0;
    std::optional<Eigen::VectorXd> ground_vector;
    std::size_t dimension = 0;
    FciSolver solver = FciSolver::dense;
    int iterations = 0;
    double residual = 0.0;
    int n_spatial = 0;
    int n_alpha = 0;
    int n_beta = 0;
};

struct FciOptions {
    /// Dense eigensolve up to this dimension, Davidson above.
    std::size_t dense_max_dim = 5000;
    std::optional<FciSolver> force_solver;
    int max_iter = 500;
    double residual_tol = 1e-8;
    int subspace_max = 30;
    Exec exec = Exec::parallel;
};

/// Sz = 0 determinant space with alpha/beta string tables.
class FciSpace {
public:
    FciSpace(int m_spatial, int n_alpha, int n_beta);

    int n_spatial() const noexcept { return m_; }
    std::size_t dimension() const noexcept { return alpha_.size() * beta_.size(); }
    std::size_t n_alpha_strings() const noexcept { return alpha_.size(); }
    std::size_t n_beta_strings() const noexcept { return beta_.size(); }

    Determinant determinant(std::size_t index) const;
    /// Index of a determinant, or -1 if it is outside the space.
    std::ptrdiff_t index_of(const Determinant& d) const;

    Eigen::VectorXd diagonal(const IntegralSet& ints) const;

    /// s = H c via single-replacement string lists; rows of alpha strings are
    /// distributed over threads when `exec` is parallel.
    Eigen::VectorXd sigma(const IntegralSet& ints, const Eigen::VectorXd& c, Exec exec = Exec::parallel) const;

    /// Full Hamiltonian from Slater-Condon rules, the reference route.
    Eigen::MatrixXd dense_hamiltonian(const IntegralSet& ints, Exec exec = Exec::parallel) const;

private:
    struct Replacement {
        std::int32_t target;  // string index after E_{created, annihilated}
        std::int16_t pq;      // created * m + annihilated
        std::int16_t sign;
    };

    static std::vector<std::uint64_t> make_strings(int m, int n);
    std::vector<std::vector<Replacement>> make_replacements(const std::vector<std::uint64_t>& strings,
                                                            const std::unordered_map<std::uint64_t, int>& lookup) const;

    int m_;
    std::vector<std::uint64_t> alpha_;
    std::vector<std::uint64_t> beta_;
    std::unordered_map<std::uint64_t, int> alpha_index_;
    std::unordered_map<std::uint64_t, int> beta_index_;
    std::vector<std::vector<Replacement>> alpha_repl_;
    std::vector<std::vector<Replacement>> beta_repl_;
};

/// Lowest eigenpair of the electronic Hamiltonian in the Sz = 0 sector.
FciResult ground_state(const IntegralSet& ints, bool want_vector = false, const FciOptions& opt = {});

/// Spin-orbital 2-RDM, Gamma(p, q, r, s) = <a+_p a+_q a_s a_r>, over
/// M = 2 * n_spatial spin-orbitals. Needs the ground vector.
Tensor4 rdm2(const FciResult& result, const IntegralSet& ints);

}  // namespace geminet
