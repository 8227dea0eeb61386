#include "geminet/geometry.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "geminet/error.hpp"
#include "geminet/units.hpp"

namespace geminet {

namespace {

constexpr double deg = std::numbers::pi / 180.0;

// Intra-pair bond of the P4 model, 2.0 bohr.
constexpr double paldus_bond = 2.0 * units::angstrom_per_bohr;

// Fixed edge of the H8 square-based families.
constexpr double h8_square_side = 2.0;

struct Range {
    double lo;
    double hi;
};

void check_range(const GridSpec& grid, Range r, std::string_view what, const GenOptions& opt) {
    if (!opt.check_range) return;
    constexpr double slack = 1e-12;
    if (grid.start < r.lo - slack || grid.stop > r.hi + slack) {
        std::ostringstream os;
        os << what << " grid [" << grid.start << ", " << grid.stop << "] outside allowed range ["
           << r.lo << ", " << r.hi << "]";
        throw InputError(os.str());
    }
}

const GridSpec& require_secondary(const FamilyGrid& grid, std::string_view family) {
    if (!grid.secondary) {
        throw InputError(std::string(family) + " needs a secondary grid");
    }
    grid.secondary->validate();
    return *grid.secondary;
}

void reject_secondary(const FamilyGrid& grid, std::string_view family) {
    if (grid.secondary) {
        throw InputError(std::string(family) + " takes a single grid");
    }
}

Eigen::Vector3d polar(double radius, double angle, double z = 0.0) {
    return {radius * std::cos(angle), radius * std::sin(angle), z};
}

std::vector<Eigen::Vector3d> chain_positions(int n, double r) {
    std::vector<Eigen::Vector3d> pos;
    pos.reserve(n);
    for (int i = 0; i < n; ++i) pos.emplace_back(0.0, 0.0, i * r);
    return pos;
}

// Parallel H2 units of bond `paldus_bond` stacked along x at spacing `sep`.
std::vector<Eigen::Vector3d> paldus_positions(int n_units, double sep) {
    std::vector<Eigen::Vector3d> pos;
    for (int u = 0; u < n_units; ++u) {
        pos.emplace_back(u * sep, 0.0, 0.0);
        pos.emplace_back(u * sep, 0.0, paldus_bond);
    }
    return pos;
}

std::vector<Eigen::Vector3d> tetrahedral_inversion(double edge, double inversion) {
    const double radius = edge / std::sqrt(3.0);
    const double height = edge * std::sqrt(2.0 / 3.0);
    std::vector<Eigen::Vector3d> pos;
    for (int k = 0; k < 3; ++k) pos.push_back(polar(radius, 90.0 * deg + k * 120.0 * deg));
    pos.emplace_back(0.0, 0.0, inversion * height);
    return pos;
}

// Two coplanar concentric regular n-gons with common side; the second is
// rotated so that `twist == twist_max` yields the regular 2n-gon.
std::vector<Eigen::Vector3d> twisted_polygons(int n, double side, double twist_deg,
                                              double twist_max) {
    const double radius = side / (2.0 * std::sin(std::numbers::pi / n));
    const double regular_offset = 180.0 / n;
    const double offset = 0.5 * regular_offset + 0.5 * regular_offset * twist_deg / twist_max;
    std::vector<Eigen::Vector3d> pos;
    for (int k = 0; k < n; ++k) pos.push_back(polar(radius, 90.0 * deg + k * 360.0 / n * deg));
    for (int k = 0; k < n; ++k) {
        pos.push_back(polar(radius, (90.0 + offset) * deg + k * 360.0 / n * deg));
    }
    return pos;
}

// Prism (t = 0) to antiprism (t = 1) by cartesian interpolation of the top
// face. The prism height equals the side; the antiprism's nearest
// inter-layer distance equals the side.
std::vector<Eigen::Vector3d> prism_to_antiprism(int n, double side, double t) {
    const double radius = side / (2.0 * std::sin(std::numbers::pi / n));
    const double half_turn = std::numbers::pi / n;
    const double chord = 2.0 * radius * std::sin(half_turn / 2.0);
    const double anti_height = std::sqrt(side * side - chord * chord);
    std::vector<Eigen::Vector3d> pos;
    for (int k = 0; k < n; ++k) pos.push_back(polar(radius, 90.0 * deg + k * 2.0 * half_turn));
    for (int k = 0; k < n; ++k) {
        const Eigen::Vector3d prism = polar(radius, 90.0 * deg + k * 2.0 * half_turn, side);
        const Eigen::Vector3d anti =
            polar(radius, 90.0 * deg + k * 2.0 * half_turn + half_turn, anti_height);
        pos.push_back((1.0 - t) * prism + t * anti);
    }
    return pos;
}

std::vector<Eigen::Vector3d> compressed_octahedron(double side, double compression) {
    const double a = side / std::sqrt(2.0);
    const double z = (1.0 - compression) * a;
    return {{a, 0, 0}, {0, a, 0}, {-a, 0, 0}, {0, -a, 0}, {0, 0, z}, {0, 0, -z}};
}

std::vector<Eigen::Vector3d> mobius_kantor(double cap_distance) {
    const double half = h8_square_side / 2.0;
    if (cap_distance < half) {
        throw InputError("mobius_kantor cap distance below half the square side");
    }
    const double offset = std::sqrt(cap_distance * cap_distance - half * half);
    std::vector<Eigen::Vector3d> pos{{half, half, 0}, {-half, half, 0}, {-half, -half, 0}, {half, -half, 0}};
    pos.emplace_back(half + offset, 0, 0);
    pos.emplace_back(0, half + offset, 0);
    pos.emplace_back(-half - offset, 0, 0);
    pos.emplace_back(0, -half - offset, 0);
    return pos;
}

template <class F>
std::vector<Geometry> sweep1(const GridSpec& grid, const std::string& tag, const std::string& key, F&& build) {
    grid.validate();
    std::vector<Geometry> out;
    for (double x : grid.values()) {
        out.push_back(make_hydrogen_cluster(build(x), tag, {{key, x}}));
        out.back().validate(true);
    }
    return out;
}

template <class F>
std::vector<Geometry> sweep2(const GridSpec& g1, const GridSpec& g2, const std::string& tag,
                             const std::string& k1, const std::string& k2, F&& build) {
    g1.validate();
    g2.validate();
    std::vector<Geometry> out;
    for (double x : g1.values()) {
        for (double y : g2.values()) {
            out.push_back(make_hydrogen_cluster(build(x, y), tag, {{k1, x}, {k2, y}}));
            out.back().validate(true);
        }
    }
    return out;
}

}  // namespace

void Geometry::validate(bool require_even) const {
    if (positions.empty()) throw InputError("geometry has no atoms");
    if (charges.size() != positions.size()) throw InputError("charge/position count mismatch");
    for (const auto& p : positions) {
        if (!p.allFinite()) throw InputError("non-finite coordinate");
    }
    for (double z : charges) {
        if (!(z > 0.0) || !std::isfinite(z)) throw InputError("nuclear charge must be positive");
    }
    if (positions.size() > 1 && min_distance() <= 0.05) {
        throw InputError("atoms closer than 0.05 angstrom in " + family_tag);
    }
    if (require_even && positions.size() % 2 != 0) {
        throw InputError("odd atom count in " + family_tag);
    }
}

double Geometry::min_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < positions.size(); ++i) {
        for (std::size_t j = i + 1; j < positions.size(); ++j) {
            best = std::min(best, (positions[i] - positions[j]).norm());
        }
    }
    return best;
}

Geometry make_hydrogen_cluster(std::vector<Eigen::Vector3d> positions, std::string family_tag,
                               std::map<std::string, double> params) {
    Geometry g;
    g.charges.assign(positions.size(), 1.0);
    g.positions = std::move(positions);
    g.family_tag = std::move(family_tag);
    g.params = std::move(params);
    g.validate();
    return g;
}

void GridSpec::validate() const {
    if (!std::isfinite(start) || !std::isfinite(stop)) throw InputError("grid bounds must be finite");
    if (!(start < stop)) throw InputError("grid start must be below stop");
    if (count < 2) throw InputError("grid count must be at least 2");
}

std::vector<double> GridSpec::values() const {
    validate();
    std::vector<double> v(count);
    const double step = (stop - start) / (count - 1);
    for (int i = 0; i < count; ++i) v[i] = start + i * step;
    v.back() = stop;
    return v;
}

std::size_t FamilyGrid::size() const {
    return static_cast<std::size_t>(primary.count) * (secondary ? secondary->count : 1);
}

std::vector<Geometry> gen_h2(const GridSpec& grid, GenOptions opt) {
    check_range(grid, {0.2, 8.0}, "h2 bond length", opt);
    return sweep1(grid, "h2", "r", [](double r) { return chain_positions(2, r); });
}

std::vector<Geometry> gen_h4(H4Family family, const FamilyGrid& grid, GenOptions opt) {
    switch (family) {
    case H4Family::linear:
        reject_secondary(grid, "h4 linear");
        check_range(grid.primary, {0.2, 8.0}, "h4 linear spacing", opt);
        return sweep1(grid.primary, "h4_linear", "r", [](double r) { return chain_positions(4, r); });
    case H4Family::tetrahedral: {
        const auto& inv = require_secondary(grid, "h4 tetrahedral");
        check_range(grid.primary, {1.0, 5.0}, "h4 tetrahedral edge", opt);
        check_range(inv, {-1.0, 1.0}, "h4 inversion coordinate", opt);
        return sweep2(grid.primary, inv, "h4_tetrahedral", "edge", "inversion", tetrahedral_inversion);
    }
    case H4Family::paldus:
        reject_secondary(grid, "h4 paldus");
        check_range(grid.primary, {0.5, 5.0}, "h4 paldus separation", opt);
        return sweep1(grid.primary, "h4_paldus", "separation",
                      [](double a) { return paldus_positions(2, a); });
    }
    throw InputError("unknown h4 family");
}

std::vector<Geometry> gen_h6(H6Family family, const FamilyGrid& grid, GenOptions opt) {
    const auto& second = require_secondary(grid, "h6 family");
    switch (family) {
    case H6Family::hexagon_twist:
        check_range(grid.primary, {2.0, 6.0}, "h6 triangle side", opt);
        check_range(second, {0.0, 30.0}, "h6 twist angle", opt);
        return sweep2(grid.primary, second, "h6_hexagon_twist", "side", "twist_deg",
                      [](double a, double t) { return twisted_polygons(3, a, t, 30.0); });
    case H6Family::triangular_antiprism:
        check_range(grid.primary, {1.0, 4.0}, "h6 antiprism side", opt);
        check_range(second, {0.0, 1.0}, "h6 antiprism interpolation", opt);
        return sweep2(grid.primary, second, "h6_triangular_antiprism", "side", "interp",
                      [](double a, double t) { return prism_to_antiprism(3, a, t); });
    case H6Family::octahedral:
        check_range(grid.primary, {2.0, 8.0}, "h6 octahedron side", opt);
        check_range(second, {0.0, 0.9}, "h6 axial compression", opt);
        return sweep2(grid.primary, second, "h6_octahedral", "side", "compression",
                      compressed_octahedron);
    }
    throw InputError("unknown h6 family");
}

std::vector<Geometry> gen_h8(H8Family family, const FamilyGrid& grid, GenOptions opt) {
    const auto& g = grid.primary;
    switch (family) {
    case H8Family::paldus8:
        reject_secondary(grid, "h8 paldus8");
        check_range(g, {0.5, 5.0}, "h8 paldus separation", opt);
        return sweep1(g, "h8_paldus8", "separation", [](double a) { return paldus_positions(4, a); });
    case H8Family::chain:
        reject_secondary(grid, "h8 chain");
        check_range(g, {0.2, 6.0}, "h8 chain spacing", opt);
        return sweep1(g, "h8_chain", "r", [](double r) { return chain_positions(8, r); });
    case H8Family::mobius_kantor:
        reject_secondary(grid, "h8 mobius_kantor");
        check_range(g, {1.0, 4.0}, "h8 cap distance", opt);
        return sweep1(g, "h8_mobius_kantor", "cap_distance", mobius_kantor);
    case H8Family::square_antiprism:
        reject_secondary(grid, "h8 square_antiprism");
        check_range(g, {0.0, 1.0}, "h8 antiprism interpolation", opt);
        return sweep1(g, "h8_square_antiprism", "interp",
                      [](double t) { return prism_to_antiprism(4, h8_square_side, t); });
    case H8Family::octagon_twist:
        reject_secondary(grid, "h8 octagon_twist");
        check_range(g, {0.0, 45.0}, "h8 twist angle", opt);
        return sweep1(g, "h8_octagon_twist", "twist_deg",
                      [](double t) { return twisted_polygons(4, h8_square_side, t, 45.0); });
    }
    throw InputError("unknown h8 family");
}

std::vector<Geometry> gen_h10_chain(const GridSpec& grid, GenOptions opt) {
    check_range(grid, {0.5, 8.0}, "h10 chain spacing", opt);
    return sweep1(grid, "h10_chain", "r", [](double r) { return chain_positions(10, r); });
}

std::vector<Geometry> gen_chain(int n_atoms, const GridSpec& grid) {
    if (n_atoms < 2) throw InputError("chain needs at least two atoms");
    return sweep1(grid, "h" + std::to_string(n_atoms) + "_chain", "r",
                  [n_atoms](double r) { return chain_positions(n_atoms, r); });
}

std::vector<std::string> families_for(int n_atoms) {
    switch (n_atoms) {
    case 2: return {"bond"};
    case 4: return {"linear", "tetrahedral", "paldus"};
    case 6: return {"hexagon_twist", "triangular_antiprism", "octahedral"};
    case 8: return {"paldus8", "chain", "mobius_kantor", "square_antiprism", "octagon_twist"};
    case 10: return {"chain"};
    default: throw InputError("no geometry families for h" + std::to_string(n_atoms));
    }
}

FamilyGrid default_grid(int n_atoms, std::string_view family, GridScale scale) {
    const bool fine = scale == GridScale::fine;
    if (fine && n_atoms != 6) throw InputError("fine grids exist only for h6");
    auto unknown = [&] {
        return InputError("unknown family '" + std::string(family) + "' for h" + std::to_string(n_atoms));
    };
    switch (n_atoms) {
    case 2:
        if (family == "bond") return {{0.2, 8.0, 156}, {}};
        throw unknown();
    case 4:
        if (family == "linear") return {{0.2, 8.0, 156}, {}};
        if (family == "tetrahedral") return {{1.0, 5.0, 21}, GridSpec{-1.0, 1.0, 29}};
        if (family == "paldus") return {{0.5, 5.0, 100}, {}};
        throw unknown();
    case 6:
        // coarse: 3 x 462 = 1386; fine: 20200 + 20200 + 21008 = 61408
        if (family == "hexagon_twist") {
            return fine ? FamilyGrid{{2.0, 6.0, 101}, GridSpec{0.0, 30.0, 200}}
                        : FamilyGrid{{2.0, 6.0, 21}, GridSpec{0.0, 30.0, 22}};
        }
        if (family == "triangular_antiprism") {
            return fine ? FamilyGrid{{1.0, 4.0, 101}, GridSpec{0.0, 1.0, 200}}
                        : FamilyGrid{{1.0, 4.0, 21}, GridSpec{0.0, 1.0, 22}};
        }
        if (family == "octahedral") {
            return fine ? FamilyGrid{{2.0, 8.0, 101}, GridSpec{0.0, 0.9, 208}}
                        : FamilyGrid{{2.0, 8.0, 21}, GridSpec{0.0, 0.9, 22}};
        }
        throw unknown();
    case 8:
        if (family == "paldus8") return {{0.5, 5.0, 92}, {}};
        if (family == "chain") return {{0.2, 6.0, 117}, {}};
        if (family == "mobius_kantor") return {{1.0, 4.0, 61}, {}};
        if (family == "square_antiprism") return {{0.0, 1.0, 46}, {}};
        if (family == "octagon_twist") return {{0.0, 45.0, 46}, {}};
        throw unknown();
    case 10:
        if (family == "chain") return {{0.5, 8.0, 150}, {}};
        throw unknown();
    default:
        throw unknown();
    }
}

std::vector<Geometry> generate(int n_atoms, std::string_view family, const FamilyGrid& grid,
                               GenOptions opt) {
    auto unknown = [&] {
        return InputError("unknown family '" + std::string(family) + "' for h" + std::to_string(n_atoms));
    };
    switch (n_atoms) {
    case 2:
        if (family != "bond") throw unknown();
        reject_secondary(grid, "h2");
        return gen_h2(grid.primary, opt);
    case 4:
        if (family == "linear") return gen_h4(H4Family::linear, grid, opt);
        if (family == "tetrahedral") return gen_h4(H4Family::tetrahedral, grid, opt);
        if (family == "paldus") return gen_h4(H4Family::paldus, grid, opt);
        throw unknown();
    case 6:
        if (family == "hexagon_twist") return gen_h6(H6Family::hexagon_twist, grid, opt);
        if (family == "triangular_antiprism") return gen_h6(H6Family::triangular_antiprism, grid, opt);
        if (family == "octahedral") return gen_h6(H6Family::octahedral, grid, opt);
        throw unknown();
    case 8:
        if (family == "paldus8") return gen_h8(H8Family::paldus8, grid, opt);
        if (family == "chain") return gen_h8(H8Family::chain, grid, opt);
        if (family == "mobius_kantor") return gen_h8(H8Family::mobius_kantor, grid, opt);
        if (family == "square_antiprism") return gen_h8(H8Family::square_antiprism, grid, opt);
        if (family == "octagon_twist") return gen_h8(H8Family::octagon_twist, grid, opt);
        throw unknown();
    case 10:
        if (family != "chain") throw unknown();
        reject_secondary(grid, "h10 chain");
        return gen_h10_chain(grid.primary, opt);
    default:
        throw unknown();
    }
}

std::vector<Geometry> generate_default(int n_atoms, GridScale scale) {
    std::vector<Geometry> all;
    for (const auto& family : families_for(n_atoms)) {
        auto part = generate(n_atoms, family, default_grid(n_atoms, family, scale));
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return all;
}

int parse_system(std::string_view name) {
    if (name.size() >= 2 && (name[0] == 'h' || name[0] == 'H')) {
        int n = 0;
        auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), n);
        if (ec == std::errc() && ptr == name.data() + name.size() && n > 0) return n;
    }
    throw InputError("unknown system '" + std::string(name) + "' (expected h2, h4, ...)");
}

// ---------------------------------------------------------------------------
// XYZ files

std::string format_xyz(const Geometry& g) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << g.size() << '\n';
    os << "family=" << (g.family_tag.empty() ? "unknown" : g.family_tag);
    for (const auto& [k, v] : g.params) os << ' ' << k << '=' << v;
    os << '\n';
    for (const auto& p : g.positions) os << "H " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    return os.str();
}

void write_xyz(const Geometry& g, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << format_xyz(g);
    if (!out) throw DataError("write failed for " + path.string());
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

bool parse_double(std::string_view s, double& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

Geometry parse_xyz(std::string_view text, const std::string& source) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }
    while (!lines.empty() && split_ws(lines.back()).empty()) lines.pop_back();

    if (lines.empty()) throw ParseError(source, 1, "empty file");
    auto count_tok = split_ws(lines[0]);
    long count = 0;
    if (count_tok.size() != 1) throw ParseError(source, 1, "expected atom count");
    {
        auto [ptr, ec] = std::from_chars(count_tok[0].data(), count_tok[0].data() + count_tok[0].size(), count);
        if (ec != std::errc() || ptr != count_tok[0].data() + count_tok[0].size() || count <= 0) {
            throw ParseError(source, 1, "invalid atom count");
        }
    }
    if (lines.size() < 2) throw ParseError(source, 2, "missing comment line");

    Geometry g;
    for (auto tok : split_ws(lines[1])) {
        auto eq = tok.find('=');
        if (eq == std::string_view::npos) continue;
        auto key = tok.substr(0, eq);
        auto val = tok.substr(eq + 1);
        if (key == "family") {
            g.family_tag = std::string(val);
        } else {
            double v = 0;
            if (!parse_double(val, v)) throw ParseError(source, 2, "non-numeric parameter " + std::string(key));
            g.params[std::string(key)] = v;
        }
    }

    const std::size_t have = lines.size() - 2;
    if (have != static_cast<std::size_t>(count)) {
        throw ParseError(source, have < static_cast<std::size_t>(count) ? lines.size() + 1 : count + 3,
                         "atom count line says " + std::to_string(count) + " but found " +
                             std::to_string(have) + " coordinate lines");
    }
    for (std::size_t i = 2; i < lines.size(); ++i) {
        auto tok = split_ws(lines[i]);
        if (tok.size() != 4) throw ParseError(source, i + 1, "expected 'H x y z'");
        if (tok[0] != "H" && tok[0] != "h" && tok[0] != "1") {
            throw ParseError(source, i + 1, "only hydrogen is supported, got " + std::string(tok[0]));
        }
        Eigen::Vector3d p;
        for (int k = 0; k < 3; ++k) {
            if (!parse_double(tok[k + 1], p[k])) throw ParseError(source, i + 1, "non-numeric coordinate");
        }
        g.positions.push_back(p);
        g.charges.push_back(1.0);
    }
    try {
        g.validate();
    } catch (const InputError& e) {
        throw ParseError(source, 1, e.what());
    }
    return g;
}

Geometry read_xyz(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_xyz(buf.str(), path.string());
}

}  // namespace geminet
