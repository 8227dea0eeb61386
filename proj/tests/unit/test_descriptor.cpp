#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "geminet/descriptor.hpp"
#include "geminet/error.hpp"
#include "geminet/fci.hpp"
#include "geminet/mf.hpp"
#include "support.hpp"

using namespace geminet;
namespace oracle = geminet::testing::oracle;
using doctest::Approx;

namespace {

IntegralSet ortho(const Geometry& g) { return orthonormalize(build_integrals(g)); }

std::vector<double> spectrum(const IntegralSet& ints) { return describe(ints).eigenvalues; }

std::vector<double> spectrum(const ReducedTensor& t) {
    const auto g = geminal_matrix(t);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.k, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

Determinant pair_determinant(int p, int q, int m) {
    Determinant d{0, 0};
    for (int x : {p, q}) (x < m ? d.alpha : d.beta) |= std::uint64_t{1} << (x % m);
    return d;
}

}  // namespace

TEST_CASE("reduced tensor prefactor and linearity") {
    const auto ints = ortho(testing::h2(oracle::h2_eq_r));
    const auto t = reduced_tensor(ints);
    const int m = ints.n_spatial;
    CHECK(t.n_spin_orbitals() == 4);
    // N = 2: the one-electron part enters with weight 1/2 on each slot.
    CHECK(t.k(0, 1, 0, 1) == Approx(0.5 * (ints.core_h(0, 0) + ints.core_h(1, 1)) + 0.5 * ints.eri(0, 1, 0, 1)).epsilon(1e-14));
    CHECK(t.k(0, m, 1, m) == Approx(0.5 * ints.core_h(0, 1) + 0.5 * ints.eri(0, 0, 1, 0)).epsilon(1e-14));

    auto zeroed = ints;
    zeroed.core_h.setZero();
    const auto v = reduced_tensor(zeroed);
    const int n = v.k.dim();
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
            for (int r = 0; r < n; ++r)
                for (int s = 0; s < n; ++s) {
                    const bool spin_ok = (p < m) == (r < m) && (q < m) == (s < m);
                    const double expect = spin_ok ? 0.5 * ints.eri(p % m, q % m, r % m, s % m) : 0.0;
                    CHECK(v.k(p, q, r, s) == expect);
                }

    auto one = ints;
    one.n_electrons = 1;
    CHECK_THROWS_AS(reduced_tensor(one), InputError);
    CHECK_THROWS_AS(reduced_tensor(build_integrals(testing::h2(1.0))), InputError);
}

TEST_CASE("reduced tensor hermiticity") {
    const auto t = reduced_tensor(ortho(testing::sample_geometries().at(5)));
    const int n = t.k.dim();
    double worst = 0.0;
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
            for (int r = 0; r < n; ++r)
                for (int s = 0; s < n; ++s) worst = std::max(worst, std::abs(t.k(p, q, r, s) - t.k(r, s, p, q)));
    CHECK(worst < 1e-12);
}

TEST_CASE("geminal matrix shape and pair indexing") {
    const auto g = geminal_matrix(reduced_tensor(ortho(testing::h2(1.0))));
    CHECK(g.k.rows() == 6);
    CHECK(g.k.cols() == 6);
    CHECK(g.n_spin_orbitals() == 4);
    CHECK((g.k - g.k.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    for (std::size_t a = 0; a < g.pairs.size(); ++a) {
        const auto [p, q] = g.pairs[a];
        CHECK(p < q);
        CHECK(g.pair_index(p, q) == static_cast<int>(a));
        CHECK(g.pair_index(q, p) == static_cast<int>(a));
    }
    CHECK_THROWS_AS(g.pair_index(1, 1), InputError);
    CHECK_THROWS_AS(g.pair_index(0, 4), InputError);
    CHECK(spin_orbital_pairs(20).size() == 190);
}

TEST_CASE("two-electron systems: K is the FCI matrix in the pair basis") {
    for (double r : {0.55, oracle::h2_eq_r, 2.5, 8.0}) {
        const auto ints = ortho(testing::h2(r));
        const auto g = geminal_matrix(reduced_tensor(ints));
        const int m = ints.n_spatial;
        for (std::size_t a = 0; a < g.pairs.size(); ++a)
            for (std::size_t b = 0; b < g.pairs.size(); ++b) {
                const auto da = pair_determinant(g.pairs[a].first, g.pairs[a].second, m);
                const auto db = pair_determinant(g.pairs[b].first, g.pairs[b].second, m);
                const bool same_sector = std::popcount(da.alpha) == std::popcount(db.alpha);
                const double expect = same_sector ? slater_condon(da, db, ints) : 0.0;
                CHECK(std::abs(g.k(a, b) - expect) < 1e-10);
            }
        const auto d = describe(ints);
        const auto fci = ground_state(ints);
        CHECK(std::abs(d.eigenvalues.front() - fci.energy_electronic) < 1e-9);
    }
    const auto d = describe(ortho(testing::h2(oracle::h2_eq_r)));
    CHECK(d.eigenvalues.front() + d.e_nuclear == Approx(oracle::h2_eq_fci).epsilon(1e-6));
}

TEST_CASE("diagonal K gives its sorted diagonal") {
    GeminalMatrix g;
    g.pairs = spin_orbital_pairs(4);
    Eigen::VectorXd diag(6);
    diag << 0.3, -1.0, 2.0, 0.0, -0.5, 1.0;
    g.k = diag.asDiagonal();
    IntegralSet meta;
    meta.n_electrons = 2;
    meta.e_nuclear = 0.7;
    const auto d = eigen_descriptor(g, meta);
    CHECK(d.eigenvalues == std::vector<double>{-1.0, -0.5, 0.0, 0.3, 1.0, 2.0});
    CHECK(d.n_electrons == 2);
    CHECK(d.e_nuclear == 0.7);

    g.k(0, 1) = 1.0;
    CHECK_THROWS_AS(eigen_descriptor(g, meta), InputError);
}

TEST_CASE("direct assembly matches the tensor route") {
    for (int i : {2, 4, 7, 9}) {
        const auto ints = ortho(testing::sample_geometries().at(i));
        const auto a = geminal_matrix(reduced_tensor(ints));
        const auto b = geminal_matrix_direct(ints);
        CHECK((a.k - b.k).cwiseAbs().maxCoeff() < 1e-13);
        CHECK(a.pairs == b.pairs);
        CHECK(testing::max_abs_diff(describe(ints).eigenvalues, describe(ints, true).eigenvalues) < 1e-12);
    }
    const auto h10 = ortho(gen_h10_chain({1.0, 2.0, 2}).front());
    CHECK(describe(h10).eigenvalues.size() == 190);
}

TEST_CASE("rigid-motion invariance") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (const auto& g : testing::sample_geometries()) {
        const auto ref = spectrum(ortho(g));
        for (int t = 0; t < 20; ++t) {
            const auto moved = testing::rigid_motion(g, testing::random_rotation(rng), {u(rng), u(rng), u(rng)});
            CHECK(testing::max_abs_diff(spectrum(ortho(moved)), ref) < 1e-8);
        }
    }
}

TEST_CASE("orbital rotation invariance") {
    std::mt19937_64 rng(22);
    for (int i : {1, 4, 7}) {
        const auto ints = ortho(testing::sample_geometries().at(i));
        const auto t = reduced_tensor(ints);
        const auto ref = spectrum(t);
        for (int k = 0; k < 20; ++k) {
            // Independent alpha and beta rotations on the spin-orbital tensor.
            const auto rotated = testing::rotate(t, testing::spin_preserving_rotation(ints.n_spatial, rng));
            CHECK(testing::max_abs_diff(spectrum(rotated), ref) < 1e-8);
        }
        for (int k = 0; k < 5; ++k) {
            // Spatial rotation applied to the orbitals before the tensor is built.
            OrbitalBasis basis{testing::random_orthogonal(ints.n_spatial, rng), OrbitalBasis::Kind::custom};
            CHECK(testing::max_abs_diff(spectrum(transform_to_basis(ints, basis)), ref) < 1e-8);
        }
    }
}

TEST_CASE("atom permutation invariance") {
    std::mt19937_64 rng(23);
    for (const auto& g : testing::sample_geometries()) {
        const auto ref = spectrum(ortho(g));
        auto shuffled = g.positions;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto perm = make_hydrogen_cluster(shuffled, g.family_tag);
        CHECK(testing::max_abs_diff(spectrum(ortho(perm)), ref) < 1e-10);
    }
}

TEST_CASE("fragment composition") {
    const auto a = ortho(testing::h2(0.8));
    const auto b = ortho(testing::h2(1.3));
    const IntegralSet ab[] = {a, b};
    const IntegralSet ba[] = {b, a};
    const auto c = compose_fragments(ab);
    CHECK(c.n_spatial == 4);
    CHECK(c.n_electrons == 4);
    CHECK(c.orthonormal);
    CHECK(c.e_nuclear == Approx(a.e_nuclear + b.e_nuclear).epsilon(1e-15));
    CHECK((c.overlap - Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);
    CHECK(c.core_h(0, 2) == 0.0);
    for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q)
            for (int r = 0; r < 4; ++r)
                for (int s = 0; s < 4; ++s) {
                    const bool mixed = (p / 2 != r / 2) || (q / 2 != s / 2);
                    if (mixed) CHECK(c.eri(p, q, r, s) == 0.0);
                }
    CHECK(std::abs(ground_state(c).energy_total - ground_state(a).energy_total - ground_state(b).energy_total) < 1e-8);
    CHECK(testing::max_abs_diff(spectrum(c), spectrum(compose_fragments(ba))) < 1e-10);

    const auto h8 = ortho(gen_h8(H8Family::chain, {{1.0, 2.0, 2}, std::nullopt}).front());
    const IntegralSet h8h2[] = {h8, a};
    CHECK(describe(compose_fragments(h8h2), true).eigenvalues.size() == 190);

    const IntegralSet lone[] = {a};
    CHECK_THROWS_AS(compose_fragments(lone), InputError);
    const IntegralSet raw[] = {a, build_integrals(testing::h2(1.0))};
    CHECK_THROWS_AS(compose_fragments(raw), InputError);
}

TEST_CASE("dissociation-limit estimate") {
    const std::vector<double> eps = {-2.0, 0.5, 1.0, 3.0, 4.0, 5.0};
    CHECK(e_infinity(eps, 2) == -1.0);
    CHECK(e_infinity(std::vector<double>(6, 0.0), 2) == 0.0);
    CHECK(e_infinity(eps, 2, 3) == Approx(-0.25));
    CHECK_THROWS_AS(e_infinity(eps, 3), InputError);
    CHECK_THROWS_AS(e_infinity(eps, 2, 7), InputError);

    // Well separated H2 + H2: the estimate is an approximation, so only
    // finiteness and its position relative to the exact sum are pinned.
    const auto a = ortho(testing::h2(oracle::h2_eq_r));
    const IntegralSet parts[] = {a, a};
    const auto d = describe(compose_fragments(parts));
    const double exact = 2.0 * ground_state(a).energy_electronic;
    const double est = e_infinity(d);
    const double pairs = e_infinity(d, 2);
    MESSAGE("H2+H2 E_inf/E_fci (N(N-1)/2) = " << est / exact << ", (N/2) = " << pairs / exact);
    CHECK(std::isfinite(est));
    CHECK(est < 0.0);
    CHECK(est > exact);
}
