#include "geminet/ml/params.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "geminet/error.hpp"

namespace geminet::ml {

using nlohmann::json;

namespace {

constexpr int params_format_version = 1;
constexpr double gate_init_scale = 1e-2;

void add_dense(std::vector<NamedTensor>& out, const std::string& name, int in, int width) {
    out.push_back({name + ".weight", Eigen::MatrixXd::Zero(width, in)});
    out.push_back({name + ".bias", Eigen::MatrixXd::Zero(width, 1)});
}

void add_standardization(std::vector<NamedTensor>& out, int width) {
    out.push_back({"input.shift", Eigen::MatrixXd::Zero(width, 1)});
    out.push_back({"input.scale", Eigen::MatrixXd::Ones(width, 1)});
}

json spec_to_json(const ModelSpec& spec) {
    if (const auto* m = std::get_if<MlpSpec>(&spec)) {
        json acts = json::array();
        for (auto a : m->activations) acts.push_back(to_string(a));
        return {{"kind", "mlp"},
                {"input_width", m->input_width},
                {"layer_sizes", m->layer_sizes},
                {"activations", acts},
                {"standardize", m->standardize}};
    }
    const auto& s = std::get<SetModelSpec>(spec);
    return {{"kind", "set_model"},
            {"d_k", s.d_k},
            {"n_attention_layers", s.n_attention_layers},
            {"corr_head_widths", s.corr_head_widths},
            {"gate_widths", s.gate_widths},
            {"standardize", s.standardize}};
}

ModelSpec spec_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mlp") {
        MlpSpec m;
        m.input_width = j.at("input_width").get<int>();
        m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
        for (const auto& a : j.at("activations")) m.activations.push_back(parse_activation(a.get<std::string>()));
        m.standardize = j.at("standardize").get<bool>();
        m.validate();
        return m;
    }
    if (kind == "set_model") {
        SetModelSpec s;
        s.d_k = j.at("d_k").get<int>();
        s.n_attention_layers = j.at("n_attention_layers").get<int>();
        s.corr_head_widths = j.at("corr_head_widths").get<std::vector<int>>();
        s.gate_widths = j.at("gate_widths").get<std::vector<int>>();
        s.standardize = j.at("standardize").get<bool>();
        s.validate();
        return s;
    }
    throw DataError("unknown model kind '" + kind + "'");
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::linear: return "linear";
    }
    return "?";
}

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "linear") return Activation::linear;
    throw InputError("unknown activation '" + s + "'");
}

void MlpSpec::validate() const {
    if (input_width <= 0) throw InputError("mlp input width must be positive");
    if (layer_sizes.empty() || layer_sizes.size() != activations.size()) {
        throw InputError("mlp needs one activation per layer");
    }
    for (int w : layer_sizes)
        if (w <= 0) throw InputError("mlp layer widths must be positive");
    if (layer_sizes.back() != 1 || activations.back() != Activation::linear) {
        throw InputError("mlp output layer must be linear with width 1");
    }
}

void SetModelSpec::validate() const {
    if (d_k <= 0) throw InputError("d_k must be positive");
    if (n_attention_layers <= 0) throw InputError("set model needs at least one attention layer");
    if (corr_head_widths.empty() || gate_widths.empty()) throw InputError("set model heads need at least one layer");
    for (int w : corr_head_widths)
        if (w <= 0) throw InputError("head widths must be positive");
    for (int w : gate_widths)
        if (w <= 0) throw InputError("gate widths must be positive");
}

std::string NamedTensor::layer() const { return name.substr(0, name.find('.')); }

const Eigen::MatrixXd& ModelParams::at(const std::string& name) const { return tensors[index_of(name)].value; }

Eigen::MatrixXd& ModelParams::at(const std::string& name) { return tensors[index_of(name)].value; }

std::size_t ModelParams::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i)
        if (tensors[i].name == name) return i;
    throw InputError("no parameter named '" + name + "'");
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
    return n;
}

std::vector<std::string> ModelParams::layer_names() const {
    std::vector<std::string> out;
    for (const auto& t : tensors) {
        auto l = t.layer();
        if (l == input_layer) continue;
        if (out.empty() || out.back() != l) out.push_back(std::move(l));
    }
    return out;
}

ParamBuffers zeros_like(const ModelParams& p) {
    ParamBuffers out;
    out.reserve(p.tensors.size());
    for (const auto& t : p.tensors) out.push_back(Eigen::MatrixXd::Zero(t.value.rows(), t.value.cols()));
    return out;
}

std::vector<NamedTensor> parameter_layout(const ModelSpec& spec) {
    std::vector<NamedTensor> out;
    if (const auto* m = std::get_if<MlpSpec>(&spec)) {
        m->validate();
        if (m->standardize) add_standardization(out, m->input_width);
        int in = m->input_width;
        for (std::size_t l = 0; l < m->layer_sizes.size(); ++l) {
            add_dense(out, "dense" + std::to_string(l), in, m->layer_sizes[l]);
            in = m->layer_sizes[l];
        }
        return out;
    }
    const auto& s = std::get<SetModelSpec>(spec);
    s.validate();
    if (s.standardize) add_standardization(out, 1);
    int in = 1;
    for (int l = 0; l < s.n_attention_layers; ++l) {
        const std::string n = "attn" + std::to_string(l);
        out.push_back({n + ".wq", Eigen::MatrixXd::Zero(in, s.d_k)});
        out.push_back({n + ".wk", Eigen::MatrixXd::Zero(in, s.d_k)});
        out.push_back({n + ".wv", Eigen::MatrixXd::Zero(in, s.d_k)});
        in = s.d_k;
    }
    in = s.d_k;
    for (std::size_t l = 0; l < s.corr_head_widths.size(); ++l) {
        add_dense(out, "corr" + std::to_string(l), in, s.corr_head_widths[l]);
        in = s.corr_head_widths[l];
    }
    add_dense(out, "corr_out", in, 1);
    in = s.d_k;
    for (std::size_t l = 0; l < s.gate_widths.size(); ++l) {
        add_dense(out, "gate" + std::to_string(l), in, s.gate_widths[l]);
        in = s.gate_widths[l];
    }
    return out;
}

ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
    ModelParams p;
    p.spec = spec;
    p.seed = seed;
    p.tensors = parameter_layout(spec);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        auto& t = p.tensors[i];
        if (t.layer() == input_layer) continue;
        // Dense weight (out x in) and its bias share the weight's fan-in;
        // attention projections (in x d_k) use their row count.
        int fan_in = 1;
        const bool is_bias = t.name.ends_with(".bias");
        if (is_bias) {
            fan_in = static_cast<int>(p.tensors[i - 1].value.cols());
        } else if (t.name.ends_with(".weight")) {
            fan_in = static_cast<int>(t.value.cols());
        } else {
            fan_in = static_cast<int>(t.value.rows());
        }
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index c = 0; c < t.value.cols(); ++c)
            for (Eigen::Index r = 0; r < t.value.rows(); ++r) t.value(r, c) = dist(rng);
    }
    if (const auto* s = std::get_if<SetModelSpec>(&spec)) {
        // The gate sums ReLU outputs over every token and unit, so a default
        // init puts the sigmoid deep in saturation (omega = 1 to machine
        // precision for ~60 tokens) and no gradient reaches either head.
        // Starting the last gate layer near zero keeps omega close to 1/2.
        const std::string last = "gate" + std::to_string(s->gate_widths.size() - 1);
        p.at(last + ".weight") *= gate_init_scale;
        p.at(last + ".bias").setZero();
    }
    return p;
}

std::string params_to_json(const ModelParams& p) {
    json tensors = json::array();
    for (const auto& t : p.tensors) {
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(t.value.size()));
        for (Eigen::Index r = 0; r < t.value.rows(); ++r)
            for (Eigen::Index c = 0; c < t.value.cols(); ++c) data.push_back(t.value(r, c));
        tensors.push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}, {"data", data}});
    }
    json j = {{"format", "geminet-params"},
              {"version", params_format_version},
              {"seed", p.seed},
              {"spec", spec_to_json(p.spec)},
              {"tensors", tensors}};
    return j.dump(1);
}

ModelParams params_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("params: ") + e.what());
    }
    try {
        if (j.at("format") != "geminet-params") throw DataError("params: not a parameter file");
        if (j.at("version").get<int>() != params_format_version) throw DataError("params: unsupported version");
        ModelParams p;
        p.spec = spec_from_json(j.at("spec"));
        p.seed = j.at("seed").get<std::uint64_t>();
        p.tensors = parameter_layout(p.spec);
        const auto& arr = j.at("tensors");
        if (arr.size() != p.tensors.size()) throw DataError("params: tensor count does not match the spec");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            auto& t = p.tensors[i];
            const auto& e = arr[i];
            if (e.at("name").get<std::string>() != t.name) throw DataError("params: unexpected tensor " + e.at("name").dump());
            const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
            if (shape.size() != 2 || shape[0] != t.value.rows() || shape[1] != t.value.cols()) {
                throw DataError("params: shape mismatch for " + t.name);
            }
            const auto data = e.at("data").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(data.size()) != t.value.size()) throw DataError("params: size mismatch for " + t.name);
            std::size_t k = 0;
            for (Eigen::Index r = 0; r < t.value.rows(); ++r)
                for (Eigen::Index c = 0; c < t.value.cols(); ++c) t.value(r, c) = data[k++];
        }
        return p;
    } catch (const json::exception& e) {
        throw DataError(std::string("params: ") + e.what());
    } catch (const InputError& e) {
        throw DataError(std::string("params: ") + e.what());
    }
}

void save_params(const ModelParams& p, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << params_to_json(p) << '\n';
}

ModelParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return params_from_json(ss.str());
}

}  // namespace geminet::ml
