#include "geminet/integrals.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "geminet/error.hpp"
#include "geminet/units.hpp"

namespace geminet {

namespace {

constexpr double pi = std::numbers::pi;

struct PrimPair {
    double p;             // combined exponent
    Eigen::Vector3d P;    // product centre
    double k;             // coefficients times Gaussian-product prefactor
};

std::vector<PrimPair> make_pairs(const ContractedShell& a, const ContractedShell& b) {
    const double ab2 = (a.center - b.center).squaredNorm();
    std::vector<PrimPair> out;
    out.reserve(a.primitives.size() * b.primitives.size());
    for (const auto& pa : a.primitives) {
        for (const auto& pb : b.primitives) {
            const double p = pa.exponent + pb.exponent;
            PrimPair pp;
            pp.p = p;
            pp.P = (pa.exponent * a.center + pb.exponent * b.center) / p;
            pp.k = pa.coefficient * pb.coefficient * std::exp(-pa.exponent * pb.exponent / p * ab2);
            out.push_back(pp);
        }
    }
    return out;
}

double eri_pairs(const std::vector<PrimPair>& bra, const std::vector<PrimPair>& ket) {
    static const double pref = 2.0 * std::pow(pi, 2.5);
    double sum = 0.0;
    for (const auto& x : bra) {
        for (const auto& y : ket) {
            const double pq = x.p + y.p;
            const double t = x.p * y.p / pq * (x.P - y.P).squaredNorm();
            sum += x.k * y.k * pref / (x.p * y.p * std::sqrt(pq)) * boys_f0(t);
        }
    }
    return sum;
}

std::vector<ContractedShell> shells_for(const Geometry& g) {
    std::vector<ContractedShell> shells;
    shells.reserve(g.size());
    for (const auto& pos : g.positions) shells.push_back(sto6g_hydrogen(pos * units::bohr_per_angstrom));
    return shells;
}

// Chemist (ij|kl) value scattered to all eight physicist positions.
void scatter_eri(Tensor4& t, int i, int j, int k, int l, double v) {
    t(i, k, j, l) = v;
    t(j, k, i, l) = v;
    t(i, l, j, k) = v;
    t(j, l, i, k) = v;
    t(k, i, l, j) = v;
    t(l, i, k, j) = v;
    t(k, j, l, i) = v;
    t(l, j, k, i) = v;
}

}  // namespace

void ContractedShell::normalize() {
    for (auto& prim : primitives) {
        if (!(prim.exponent > 0.0)) throw InputError("primitive exponent must be positive");
        prim.coefficient *= std::pow(2.0 * prim.exponent / pi, 0.75);
    }
    double self = 0.0;
    for (const auto& x : primitives) {
        for (const auto& y : primitives) {
            self += x.coefficient * y.coefficient * std::pow(pi / (x.exponent + y.exponent), 1.5);
        }
    }
    const double scale = 1.0 / std::sqrt(self);
    for (auto& prim : primitives) prim.coefficient *= scale;
}

ContractedShell sto6g_hydrogen(const Eigen::Vector3d& center) {
    ContractedShell s;
    s.center = center;
    s.primitives = {
        {35.52322122, 0.00916359628}, {6.513143725, 0.04936149294}, {1.822142904, 0.1685383049},
        {0.625955266, 0.3705627997},  {0.243076747, 0.4164915298},  {0.100112428, 0.1303340841},
    };
    s.normalize();
    return s;
}

double boys_f0(double t) {
    if (!(t >= 0.0)) throw InputError("boys_f0 requires t >= 0");
    if (t < 1e-10) {
        // sum_k (-t)^k / (k! (2k + 1)), six terms
        double term = 1.0;
        double sum = 0.0;
        for (int k = 0; k < 6; ++k) {
            sum += term / (2 * k + 1);
            term *= -t / (k + 1);
        }
        return sum;
    }
    const double s = std::sqrt(t);
    return 0.5 * std::sqrt(pi) / s * std::erf(s);
}

double overlap_ss(const ContractedShell& a, const ContractedShell& b) {
    double sum = 0.0;
    for (const auto& pp : make_pairs(a, b)) sum += pp.k * std::pow(pi / pp.p, 1.5);
    return sum;
}

double kinetic_ss(const ContractedShell& a, const ContractedShell& b) {
    const double ab2 = (a.center - b.center).squaredNorm();
    double sum = 0.0;
    for (const auto& pa : a.primitives) {
        for (const auto& pb : b.primitives) {
            const double p = pa.exponent + pb.exponent;
            const double mu = pa.exponent * pb.exponent / p;
            sum += pa.coefficient * pb.coefficient * mu * (3.0 - 2.0 * mu * ab2) * std::pow(pi / p, 1.5) *
                   std::exp(-mu * ab2);
        }
    }
    return sum;
}

double nuclear_ss(const ContractedShell& a, const ContractedShell& b, const Eigen::Vector3d& nucleus,
                  double charge) {
    double sum = 0.0;
    for (const auto& pp : make_pairs(a, b)) {
        sum += pp.k * 2.0 * pi / pp.p * boys_f0(pp.p * (pp.P - nucleus).squaredNorm());
    }
    return -charge * sum;
}

double eri_ssss(const ContractedShell& a, const ContractedShell& b, const ContractedShell& c,
                const ContractedShell& d) {
    return eri_pairs(make_pairs(a, c), make_pairs(b, d));
}

void IntegralSet::validate(double tol) const {
    const int m = n_spatial;
    if (m <= 0 || n_electrons <= 0) throw InputError("integral set has no orbitals or electrons");
    if (overlap.rows() != m || overlap.cols() != m || core_h.rows() != m || core_h.cols() != m ||
        eri.dim() != m) {
        throw InputError("integral set dimension mismatch");
    }
    if ((core_h - core_h.transpose()).cwiseAbs().maxCoeff() > tol) throw InputError("core_h not symmetric");
    if ((overlap - overlap.transpose()).cwiseAbs().maxCoeff() > tol) throw InputError("overlap not symmetric");
    for (int p = 0; p < m; ++p) {
        if (std::abs(overlap(p, p) - 1.0) > tol) throw InputError("overlap diagonal not unity");
        if (eri(p, p, p, p) < -tol) throw InputError("negative self-repulsion");
    }
    for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q)
            for (int r = 0; r < m; ++r)
                for (int s = 0; s < m; ++s) {
                    const double v = eri(p, q, r, s);
                    if (std::abs(v - eri(q, p, s, r)) > tol || std::abs(v - eri(r, q, p, s)) > tol ||
                        std::abs(v - eri(r, s, p, q)) > tol) {
                        throw InputError("eri lacks eight-fold symmetry");
                    }
                }
}

double nuclear_repulsion(const Geometry& g) {
    double e = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = i + 1; j < g.size(); ++j) {
            const double r = (g.positions[i] - g.positions[j]).norm() * units::bohr_per_angstrom;
            if (!(r > 0.0)) throw InputError("coincident nuclei");
            e += g.charges[i] * g.charges[j] / r;
        }
    }
    return e;
}

Tensor4 build_eri_reference(std::span<const ContractedShell> shells) {
    const int m = static_cast<int>(shells.size());
    Tensor4 t(m);
    for (int p = 0; p < m; ++p)
        for (int q = 0; q < m; ++q)
            for (int r = 0; r < m; ++r)
                for (int s = 0; s < m; ++s) t(p, q, r, s) = eri_ssss(shells[p], shells[q], shells[r], shells[s]);
    return t;
}

Tensor4 build_eri(std::span<const ContractedShell> shells, Exec exec) {
    const int m = static_cast<int>(shells.size());
    const int npair = m * (m + 1) / 2;
    std::vector<std::vector<PrimPair>> pairs(npair);
    std::vector<std::pair<int, int>> pair_index(npair);
    for (int i = 0, ij = 0; i < m; ++i) {
        for (int j = 0; j <= i; ++j, ++ij) {
            pairs[ij] = make_pairs(shells[i], shells[j]);
            pair_index[ij] = {i, j};
        }
    }
    Tensor4 t(m);
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
    for (int ij = 0; ij < npair; ++ij) {
        const auto [i, j] = pair_index[ij];
        for (int kl = 0; kl <= ij; ++kl) {
            const auto [k, l] = pair_index[kl];
            scatter_eri(t, i, j, k, l, eri_pairs(pairs[ij], pairs[kl]));
        }
    }
    return t;
}

IntegralSet build_integrals(const Geometry& g, Exec exec) {
    g.validate();
    const auto shells = shells_for(g);
    const int m = static_cast<int>(shells.size());
    std::vector<Eigen::Vector3d> nuclei;
    for (const auto& p : g.positions) nuclei.push_back(p * units::bohr_per_angstrom);

    IntegralSet ints;
    double charge = 0.0;
    for (double z : g.charges) charge += z;
    ints.n_electrons = static_cast<int>(std::lround(charge));
    ints.n_spatial = m;
    ints.overlap.resize(m, m);
    ints.core_h.resize(m, m);
    for (int p = 0; p < m; ++p) {
        for (int q = 0; q <= p; ++q) {
            double h = kinetic_ss(shells[p], shells[q]);
            for (std::size_t n = 0; n < nuclei.size(); ++n) h += nuclear_ss(shells[p], shells[q], nuclei[n], g.charges[n]);
            ints.core_h(p, q) = ints.core_h(q, p) = h;
            ints.overlap(p, q) = ints.overlap(q, p) = (p == q) ? 1.0 : overlap_ss(shells[p], shells[q]);
        }
    }
    ints.eri = build_eri(shells, exec);
    ints.e_nuclear = nuclear_repulsion(g);
    ints.orthonormal = false;
    return ints;
}

// ---------------------------------------------------------------------------
// Binary dump

namespace {

static_assert(std::endian::native == std::endian::little, "dump format assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("truncated integral dump");
    return v;
}

void put_doubles(std::ostream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void get_doubles(std::istream& in, double* p, std::size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw DataError("truncated integral dump");
}

void expect_magic(std::istream& in, const char* magic) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::memcmp(buf, magic, 4) != 0) throw DataError(std::string("bad magic, expected ") + magic);
}

}  // namespace

void write_integrals(std::ostream& out, const IntegralSet& ints) {
    const int m = ints.n_spatial;
    out.write("GMNI", 4);
    put<std::uint32_t>(out, 1);
    put<std::int32_t>(out, ints.n_electrons);
    put<std::int32_t>(out, m);
    put<std::uint8_t>(out, ints.orthonormal ? 1 : 0);
    put<double>(out, ints.e_nuclear);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> s = ints.overlap;
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> h = ints.core_h;
    put_doubles(out, s.data(), static_cast<std::size_t>(m) * m);
    put_doubles(out, h.data(), static_cast<std::size_t>(m) * m);
    put_doubles(out, ints.eri.data().data(), ints.eri.data().size());
}

IntegralSet read_integrals(std::istream& in) {
    expect_magic(in, "GMNI");
    if (get<std::uint32_t>(in) != 1) throw DataError("unsupported integral dump version");
    IntegralSet ints;
    ints.n_electrons = get<std::int32_t>(in);
    const int m = get<std::int32_t>(in);
    if (m <= 0 || m > 64 || ints.n_electrons <= 0) throw DataError("implausible integral dump header");
    ints.n_spatial = m;
    ints.orthonormal = get<std::uint8_t>(in) != 0;
    ints.e_nuclear = get<double>(in);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> s(m, m), h(m, m);
    get_doubles(in, s.data(), static_cast<std::size_t>(m) * m);
    get_doubles(in, h.data(), static_cast<std::size_t>(m) * m);
    ints.overlap = s;
    ints.core_h = h;
    ints.eri = Tensor4(m);
    get_doubles(in, ints.eri.data().data(), ints.eri.data().size());
    return ints;
}

void write_integral_cache(const std::filesystem::path& path, const IntegralCache& cache) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out.write("GMNC", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint64_t>(out, cache.size());
    for (const auto& [id, ints] : cache) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
        out.write(id.data(), static_cast<std::streamsize>(id.size()));
        write_integrals(out, ints);
    }
    if (!out) throw DataError("write failed for " + path.string());
}

IntegralCache read_integral_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    expect_magic(in, "GMNC");
    if (get<std::uint32_t>(in) != 1) throw DataError("unsupported integral cache version");
    const auto count = get<std::uint64_t>(in);
    IntegralCache cache;
    cache.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto len = get<std::uint32_t>(in);
        if (len > 4096) throw DataError("implausible id length in " + path.string());
        std::string id(len, '\0');
        in.read(id.data(), len);
        if (!in) throw DataError("truncated integral cache " + path.string());
        cache.emplace_back(std::move(id), read_integrals(in));
    }
    return cache;
}

}  // namespace geminet
