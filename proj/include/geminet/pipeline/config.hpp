#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geminet/ml/params.hpp"
#include "geminet/ml/train.hpp"

namespace geminet::pipeline {

/// Settings for the train, finetune and eval commands.
///
/// Text format: one `key = value` per line, `#` starts a comment, lists are
/// comma separated. Relative paths are taken from the config file's
/// directory. Recognized keys:
///
///   model.kind          mlp | set_model
///   model.layers        e.g. 100, 50, 1           (mlp)
///   model.activations   e.g. relu, sigmoid, linear (mlp)
///   model.standardize   true | false
///   model.d_k, model.attention_layers, model.corr_head, model.gate  (set_model)
///   train.learning_rate, train.epochs, train.batch_size, train.split_fraction,
///   train.seed, train.curve_every, train.exec (serial | parallel)
///   data.datasets       dataset files, records concatenated in order
///   io.params_in        starting parameters (finetune, eval)
///   io.params_out, io.metrics, io.curve, io.predictions   outputs
struct RunConfig {
    std::optional<ml::ModelSpec> model;  // mlp input_width 0 = from the data
    ml::TrainConfig train;
    std::vector<std::filesystem::path> datasets;
    std::filesystem::path params_in;
    std::filesystem::path params_out;
    std::filesystem::path metrics;
    std::filesystem::path curve;
    std::filesystem::path predictions;
};

/// Throws InputError naming the source, line and key for every problem.
RunConfig parse_run_config(std::string_view text, const std::string& source = "<config>",
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace geminet::pipeline
