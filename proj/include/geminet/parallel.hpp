#pragma once

namespace geminet {

/// Execution policy for kernels that have an OpenMP path. `serial` runs the
/// same arithmetic in the same order on one thread.
enum class Exec { serial, parallel };

int max_threads();
void set_threads(int n);

}  // namespace geminet
