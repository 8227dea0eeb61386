#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "geminet/geometry.hpp"
#include "geminet/parallel.hpp"

namespace geminet {

/// Dense n^4 tensor, row-major in (p, q, r, s).
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n * n, 0.0) {}

    int dim() const noexcept { return n_; }

    double& operator()(int p, int q, int r, int s) noexcept { return data_[index(p, q, r, s)]; }
    double operator()(int p, int q, int r, int s) const noexcept { return data_[index(p, q, r, s)]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    std::size_t index(int p, int q, int r, int s) const noexcept {
        const std::size_t n = n_;
        return ((static_cast<std::size_t>(p) * n + q) * n + r) * n + s;
    }

private:
    int n_ = 0;
    std::vector<double> data_;
};

struct Primitive {
    double exponent;     // bohr^-2
    double coefficient;  // multiplies the unnormalized exp(-a r^2)
};

/// Contracted s-type Gaussian. After `normalize`, the coefficients include
/// primitive and contraction normalization so that <phi|phi> = 1.
struct ContractedShell {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();  // bohr
    std::vector<Primitive> primitives;

    /// Takes coefficients relative to normalized primitives and folds in all
    /// normalization factors.
    void normalize();
};

/// STO-6G hydrogen 1s centred at `center` (bohr), normalized.
ContractedShell sto6g_hydrogen(const Eigen::Vector3d& center = Eigen::Vector3d::Zero());

/// F0(t) = int_0^1 exp(-t u^2) du.
double boys_f0(double t);

double overlap_ss(const ContractedShell& a, const ContractedShell& b);
double kinetic_ss(const ContractedShell& a, const ContractedShell& b);
/// Attraction of the a*b density to a point charge: -Z <a| 1/|r - C| |b>.
double nuclear_ss(const ContractedShell& a, const ContractedShell& b, const Eigen::Vector3d& nucleus,
                  double charge);
/// Physicist <ab|cd>: a, c on electron 1; b, d on electron 2.
double eri_ssss(const ContractedShell& a, const ContractedShell& b, const ContractedShell& c,
                const ContractedShell& d);

/// One- and two-electron integrals of one system. `eri(p, q, r, s)` is the
/// physicist <pq|rs>. Spatial orbitals only; spin is lifted downstream.
struct IntegralSet {
    int n_electrons = 0;
    int n_spatial = 0;
    Eigen::MatrixXd overlap;
    Eigen::MatrixXd core_h;
    Tensor4 eri;
    double e_nuclear = 0.0;
    bool orthonormal = false;

    /// Checks dimensions and the symmetry invariants to `tol`.
    void validate(double tol = 1e-10) const;
};

/// Nuclear repulsion in hartree; positions in angstrom.
double nuclear_repulsion(const Geometry& g);

/// AO-basis integrals, one STO-6G shell per hydrogen, neutral cluster.
IntegralSet build_integrals(const Geometry& g, Exec exec = Exec::parallel);

/// Brute-force reference: every <pq|rs> element evaluated independently.
Tensor4 build_eri_reference(std::span<const ContractedShell> shells);
Tensor4 build_eri(std::span<const ContractedShell> shells, Exec exec = Exec::parallel);

// Binary dump, little-endian:
//   "GMNI" | u32 version=1 | i32 n_electrons | i32 n_spatial | u8 orthonormal |
//   f64 e_nuclear | f64 overlap[m*m] | f64 core_h[m*m] | f64 eri[m^4]
// Matrices are row-major.
void write_integrals(std::ostream& out, const IntegralSet& ints);
IntegralSet read_integrals(std::istream& in);

/// Keyed collection of integral sets in one file:
///   "GMNC" | u32 version=1 | u64 count | count x (u32 id_len | id bytes | GMNI record)
using IntegralCache = std::vector<std::pair<std::string, IntegralSet>>;
void write_integral_cache(const std::filesystem::path& path, const IntegralCache& cache);
IntegralCache read_integral_cache(const std::filesystem::path& path);

}  // namespace geminet
