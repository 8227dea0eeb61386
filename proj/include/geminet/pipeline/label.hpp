#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "geminet/fci.hpp"
#include "geminet/geometry.hpp"
#include "geminet/integrals.hpp"
#include "geminet/pipeline/dataset.hpp"

namespace geminet::pipeline {

struct LabelOptions {
    /// Worker threads over geometries; 0 means GEMINET_WORKERS or all cores.
    int workers = 0;
    /// RHF and MP2 baselines on each real geometry.
    bool baselines = true;
    /// Keep the Löwdin-basis integrals of every record (fragment pools).
    bool keep_integrals = false;
    /// FCI settings. The dense crossover is lowered for bulk labeling: at
    /// dimension 4900 Davidson is about 100x faster than the dense solve.
    FciOptions fci = [] {
        FciOptions o;
        o.dense_max_dim = 1000;
        return o;
    }();
};

struct LabeledGeometry {
    std::string id;
    Geometry geometry;
};

struct LabelOutcome {
    std::vector<Record> records;          // sorted by id
    IntegralCache integrals;              // same order, when kept
    std::vector<std::pair<std::string, std::string>> failures;  // (id, message)
    int hf_unconverged = 0;
};

/// Integrals, Löwdin basis, FCI, descriptor and optional baselines for one
/// geometry. `orthonormal_out`, when given, receives the Löwdin integrals.
Record label_geometry(const Geometry& g, const std::string& id, const LabelOptions& opt,
                      IntegralSet* orthonormal_out = nullptr);

/// Labels every input; a failing geometry is logged in `failures` and the
/// run continues. Output is ordered by id regardless of the worker count.
LabelOutcome label_all(const std::vector<LabeledGeometry>& inputs, const LabelOptions& opt);

/// Ids "<family_tag>_<index>" with a zero-padded running index.
std::vector<LabeledGeometry> with_ids(const std::vector<Geometry>& geoms);

/// Reads every *.xyz file in a directory (sorted by name; id = file stem).
std::vector<LabeledGeometry> read_geometry_dir(const std::filesystem::path& dir);

/// Writes one XYZ file per geometry, named <id>.xyz.
void write_geometry_dir(const std::filesystem::path& dir, const std::vector<LabeledGeometry>& geoms);

/// Worker count from the argument, then GEMINET_WORKERS, then all cores.
int resolve_workers(int requested);

}  // namespace geminet::pipeline
