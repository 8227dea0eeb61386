#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace geminet {

/// A hydrogen cluster: atom positions in angstrom plus the family metadata
/// that produced it.
struct Geometry {
    std::vector<Eigen::Vector3d> positions;  // angstrom
    std::vector<double> charges;
    std::string family_tag;
    std::map<std::string, double> params;

    std::size_t size() const noexcept { return positions.size(); }

    /// Throws InputError unless coordinates are finite, the list is
    /// non-empty and no two atoms are closer than 0.05 angstrom.
    void validate(bool require_even = false) const;

    double min_distance() const;
};

/// Builds an all-hydrogen geometry and validates it.
Geometry make_hydrogen_cluster(std::vector<Eigen::Vector3d> positions, std::string family_tag,
                               std::map<std::string, double> params = {});

/// Uniform samples between start and stop, both endpoints included.
struct GridSpec {
    double start = 0.0;
    double stop = 1.0;
    int count = 2;

    void validate() const;
    std::vector<double> values() const;
};

struct FamilyGrid {
    GridSpec primary;
    std::optional<GridSpec> secondary;

    std::size_t size() const;
};

struct GenOptions {
    bool check_range = true;
};

enum class H4Family { linear, tetrahedral, paldus };
enum class H6Family { hexagon_twist, triangular_antiprism, octahedral };
enum class H8Family { paldus8, chain, mobius_kantor, square_antiprism, octagon_twist };

/// Sampling density of the default grids: `coarse` reproduces the reference
/// dataset sizes, `fine` the dense H6 learning-curve grid.
enum class GridScale { coarse, fine };

std::vector<Geometry> gen_h2(const GridSpec& grid, GenOptions opt = {});
std::vector<Geometry> gen_h4(H4Family family, const FamilyGrid& grid, GenOptions opt = {});
std::vector<Geometry> gen_h6(H6Family family, const FamilyGrid& grid, GenOptions opt = {});
std::vector<Geometry> gen_h8(H8Family family, const FamilyGrid& grid, GenOptions opt = {});
std::vector<Geometry> gen_h10_chain(const GridSpec& grid, GenOptions opt = {});

/// Equally spaced linear chain of `n_atoms` hydrogens, one geometry per
/// spacing. Used for the out-of-family H6/H8 evaluation curves.
std::vector<Geometry> gen_chain(int n_atoms, const GridSpec& grid);

// String-keyed access used by the CLI and the dataset builders. Systems are
// named by atom count ("h2" .. "h10").
std::vector<std::string> families_for(int n_atoms);
FamilyGrid default_grid(int n_atoms, std::string_view family, GridScale scale = GridScale::coarse);
std::vector<Geometry> generate(int n_atoms, std::string_view family, const FamilyGrid& grid,
                               GenOptions opt = {});
/// Every family of a system under its default grids, in families_for order.
std::vector<Geometry> generate_default(int n_atoms, GridScale scale = GridScale::coarse);

/// Parses "h2", "H6", "h10" into an atom count.
int parse_system(std::string_view name);

void write_xyz(const Geometry& g, const std::filesystem::path& path);
std::string format_xyz(const Geometry& g);
Geometry read_xyz(const std::filesystem::path& path);
Geometry parse_xyz(std::string_view text, const std::string& source = "<xyz>");

}  // namespace geminet
