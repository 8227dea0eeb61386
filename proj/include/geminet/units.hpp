#pragma once

namespace geminet::units {

inline constexpr double bohr_per_angstrom = 1.8897259886;
inline constexpr double angstrom_per_bohr = 1.0 / bohr_per_angstrom;

/// Chemical accuracy, 1 kcal/mol in hartree.
inline constexpr double chemical_accuracy = 0.0016;

}  // namespace geminet::units
