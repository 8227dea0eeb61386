#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "geminet/geometry.hpp"
#include "geminet/pipeline/label.hpp"

namespace geminet::pipeline {

/// Scale knobs for the named recipes. `experiment_preset` gives the desk
/// defaults; every field can be overridden from the CLI.
struct ExperimentSpec {
    std::string name;  // table1, learning_curve, h6_transfer, h10_pipeline, h8_setmodel
    std::uint64_t seed = 1;
    int workers = 0;
    /// Labeled datasets are reused across runs when set.
    std::filesystem::path cache_dir;
    std::filesystem::path out_dir = "report";

    // table1, h6_transfer
    int mlp_epochs = 2000;

    // learning_curve: H6 product grids of side x side per family, a fixed
    // held-out test set and the same number of Adam steps for every size.
    int fine_grid_side = 41;
    std::vector<int> curve_sizes = {200, 500, 1000, 1500, 3000, 4000};
    int curve_test_size = 1000;
    long curve_steps = 60000;

    // h10_pipeline
    std::size_t composite_count = 100000;
    int h10_chain_points = 150;  // 0.5-8 angstrom
    int pretrain_epochs = 30;
    int finetune_epochs = 3000;
    int finetune_points = 25;

    // h8_setmodel
    std::size_t set_composite_count = 2000;
    int set_epochs = 500;

    /// Out-of-family chain used by h6_transfer and h8_setmodel, angstrom.
    GridSpec eval_chain{0.5, 8.0, 76};

    void validate() const;
};

const std::vector<std::string>& experiment_names();

/// `scale` is "desk" (the documented defaults) or "quick" (minutes, for
/// smoke tests; results are not meaningful).
ExperimentSpec experiment_preset(const std::string& name, const std::string& scale = "desk");

/// Overrides one scale knob by field name, e.g. ("set_epochs", "200") or
/// ("eval_chain", "0.5:8:76"). Throws InputError for unknown keys or values.
void set_knob(ExperimentSpec& spec, const std::string& key, const std::string& value);

struct ExperimentReport {
    std::map<std::string, double> metrics;
    std::vector<std::filesystem::path> files;
};

/// Runs one recipe end to end and writes its CSVs into `spec.out_dir`.
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// Labels `geoms` or loads the result of an identical earlier run from
/// `cache_dir` (file name from `key` and the config hash). Integrals are
/// stored next to the records when `opt.keep_integrals` is set.
LabelOutcome label_cached(const std::filesystem::path& cache_dir, const std::string& key,
                          const std::vector<LabeledGeometry>& geoms, const nlohmann::json& config,
                          const LabelOptions& opt);

}  // namespace geminet::pipeline
