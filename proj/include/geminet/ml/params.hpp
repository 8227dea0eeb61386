#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace geminet::ml {

enum class Activation { relu, sigmoid, linear };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

/// Fully connected regression network. `layer_sizes[i]` is the output width
/// of dense layer i; the last layer must be linear with width 1.
struct MlpSpec {
    int input_width = 0;
    std::vector<int> layer_sizes;
    std::vector<Activation> activations;
    /// Per-feature shift/scale applied before the first layer.
    bool standardize = true;

    void validate() const;
    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Gated set-attention model over width-1 tokens.
struct SetModelSpec {
    int d_k = 25;
    int n_attention_layers = 2;
    std::vector<int> corr_head_widths{10, 10};
    std::vector<int> gate_widths{10, 10, 10};
    /// One scalar shift/scale shared by all tokens.
    bool standardize = true;

    void validate() const;
    friend bool operator==(const SetModelSpec&, const SetModelSpec&) = default;
};

using ModelSpec = std::variant<MlpSpec, SetModelSpec>;

/// One tensor. Dense weights are stored (out x in), attention projections
/// (in x d_k). Tensors of the `input` layer (standardization shift and
/// scale) are constants fitted from data, never trained.
struct NamedTensor {
    std::string name;
    Eigen::MatrixXd value;

    /// Layer a tensor belongs to: the name up to the first '.'.
    std::string layer() const;
};

struct ModelParams {
    ModelSpec spec;
    std::uint64_t seed = 0;
    std::vector<NamedTensor> tensors;

    bool is_mlp() const noexcept { return std::holds_alternative<MlpSpec>(spec); }
    const MlpSpec& mlp() const { return std::get<MlpSpec>(spec); }
    const SetModelSpec& set_model() const { return std::get<SetModelSpec>(spec); }

    const Eigen::MatrixXd& at(const std::string& name) const;
    Eigen::MatrixXd& at(const std::string& name);
    std::size_t index_of(const std::string& name) const;
    std::size_t parameter_count() const;
    /// Trainable layers in forward order (excludes `input`).
    std::vector<std::string> layer_names() const;
};

/// Gradient (or optimizer moment) buffers aligned with ModelParams::tensors.
using ParamBuffers = std::vector<Eigen::MatrixXd>;

ParamBuffers zeros_like(const ModelParams& p);

inline constexpr const char* input_layer = "input";

/// Names and shapes for a spec, in canonical order.
std::vector<NamedTensor> parameter_layout(const ModelSpec& spec);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, fully
/// determined by `seed`; standardization starts as the identity.
ModelParams init_params(const ModelSpec& spec, std::uint64_t seed);

/// Versioned JSON with the spec, seed and shape manifest. Doubles are written
/// in shortest round-trip form so a reload is bit-identical.
std::string params_to_json(const ModelParams& p);
ModelParams params_from_json(const std::string& text);
void save_params(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace geminet::ml
