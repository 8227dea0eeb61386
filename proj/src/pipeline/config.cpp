#include "geminet/pipeline/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "geminet/error.hpp"

namespace geminet::pipeline {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

struct Entry {
    std::string value;
    std::size_t line = 0;
};

class Reader {
public:
    Reader(std::string source, fs::path base) : source_(std::move(source)), base_(std::move(base)) {}

    [[noreturn]] void fail(const std::string& key, std::size_t line, const std::string& msg) const {
        throw InputError(source_ + ":" + std::to_string(line) + ": " + key + ": " + msg);
    }

    void add(const std::string& key, Entry e) {
        if (auto it = entries_.find(key); it != entries_.end()) {
            fail(key, e.line, "duplicate key (first set on line " + std::to_string(it->second.line) + ")");
        }
        entries_.emplace(key, std::move(e));
    }

    bool has(const std::string& key) const { return entries_.contains(key); }

    template <class T>
    std::optional<T> get(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        used_.insert(key);
        return convert<T>(key, it->second);
    }

    template <class T>
    std::optional<std::vector<T>> get_list(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        used_.insert(key);
        std::vector<T> out;
        for (const auto& item : split_list(it->second.value)) {
            if (item.empty()) fail(key, it->second.line, "empty list element");
            out.push_back(convert<T>(key, {item, it->second.line}));
        }
        return out;
    }

    std::optional<fs::path> get_path(const std::string& key) {
        auto v = get<std::string>(key);
        if (!v) return std::nullopt;
        return resolve(*v);
    }

    fs::path resolve(const std::string& v) const {
        fs::path p(v);
        return p.is_absolute() || base_.empty() ? p : base_ / p;
    }

    std::size_t line_of(const std::string& key) const { return entries_.at(key).line; }

    void reject_unused() const {
        for (const auto& [k, e] : entries_)
            if (!used_.contains(k)) fail(k, e.line, "unknown key");
    }

    // Validation errors are reported against the key that most likely caused them.
    void check(const std::string& key, const std::function<void()>& fn) const {
        try {
            fn();
        } catch (const InputError& e) {
            fail(key, has(key) ? line_of(key) : 0, e.what());
        }
    }

private:
    template <class T>
    T convert(const std::string& key, const Entry& e) const {
        const std::string& v = e.value;
        if constexpr (std::is_same_v<T, std::string>) {
            if (v.empty()) fail(key, e.line, "empty value");
            return v;
        } else if constexpr (std::is_same_v<T, bool>) {
            if (v == "true") return true;
            if (v == "false") return false;
            fail(key, e.line, "expected true or false, got '" + v + "'");
        } else {
            T out{};
            const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc() || ptr != v.data() + v.size()) {
                fail(key, e.line, std::string("expected ") + (std::is_floating_point_v<T> ? "a number" : "an integer") +
                                      ", got '" + v + "'");
            }
            return out;
        }
    }

    std::string source_;
    fs::path base_;
    std::map<std::string, Entry> entries_;
    std::set<std::string> used_;
};

ml::ModelSpec read_model(Reader& r) {
    const auto kind = r.get<std::string>("model.kind").value_or("mlp");
    const bool standardize = r.get<bool>("model.standardize").value_or(true);
    if (kind == "mlp") {
        ml::MlpSpec m;
        m.standardize = standardize;
        m.layer_sizes = r.get_list<int>("model.layers").value_or(std::vector<int>{100, 50, 1});
        if (auto acts = r.get_list<std::string>("model.activations")) {
            for (const auto& a : *acts) r.check("model.activations", [&] { m.activations.push_back(ml::parse_activation(a)); });
        } else {
            m.activations.assign(m.layer_sizes.size(), ml::Activation::relu);
            if (m.layer_sizes.size() >= 2) m.activations[m.layer_sizes.size() - 2] = ml::Activation::sigmoid;
            m.activations.back() = ml::Activation::linear;
        }
        // input_width is filled in from the data; validate the rest now.
        r.check("model.layers", [&] {
            ml::MlpSpec probe = m;
            probe.input_width = 1;
            probe.validate();
        });
        return m;
    }
    if (kind == "set_model") {
        ml::SetModelSpec s;
        s.standardize = standardize;
        s.d_k = r.get<int>("model.d_k").value_or(s.d_k);
        s.n_attention_layers = r.get<int>("model.attention_layers").value_or(s.n_attention_layers);
        s.corr_head_widths = r.get_list<int>("model.corr_head").value_or(s.corr_head_widths);
        s.gate_widths = r.get_list<int>("model.gate").value_or(s.gate_widths);
        r.check("model.d_k", [&] { s.validate(); });
        return s;
    }
    r.fail("model.kind", r.line_of("model.kind"), "expected mlp or set_model, got '" + kind + "'");
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::string& source, const fs::path& base_dir) {
    Reader r(source, base_dir);
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw InputError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw InputError(source + ":" + std::to_string(line_no) + ": missing key");
        r.add(key, {trim(std::string_view(t).substr(eq + 1)), line_no});
    }

    RunConfig c;
    if (r.has("model.kind") || r.has("model.layers") || r.has("model.activations") || r.has("model.standardize") ||
        r.has("model.d_k") || r.has("model.attention_layers") || r.has("model.corr_head") || r.has("model.gate")) {
        c.model = read_model(r);
    }
    auto& t = c.train;
    t.learning_rate = r.get<double>("train.learning_rate").value_or(t.learning_rate);
    t.epochs = r.get<int>("train.epochs").value_or(t.epochs);
    t.batch_size = r.get<int>("train.batch_size").value_or(t.batch_size);
    t.split_fraction = r.get<double>("train.split_fraction").value_or(t.split_fraction);
    t.seed = r.get<std::uint64_t>("train.seed").value_or(t.seed);
    t.curve_every = r.get<int>("train.curve_every").value_or(t.curve_every);
    if (auto e = r.get<std::string>("train.exec")) {
        if (*e == "serial") t.exec = Exec::serial;
        else if (*e == "parallel") t.exec = Exec::parallel;
        else r.fail("train.exec", r.line_of("train.exec"), "expected serial or parallel, got '" + *e + "'");
    }
    for (const char* key : {"train.learning_rate", "train.epochs", "train.batch_size", "train.split_fraction",
                            "train.curve_every"}) {
        if (r.has(key)) r.check(key, [&] { t.validate(); });
    }
    t.validate();

    if (auto ds = r.get_list<std::string>("data.datasets"))
        for (const auto& d : *ds) c.datasets.push_back(r.resolve(d));
    c.params_in = r.get_path("io.params_in").value_or(fs::path());
    c.params_out = r.get_path("io.params_out").value_or(fs::path());
    c.metrics = r.get_path("io.metrics").value_or(fs::path());
    c.curve = r.get_path("io.curve").value_or(fs::path());
    c.predictions = r.get_path("io.predictions").value_or(fs::path());
    r.reject_unused();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), path.string(), path.parent_path());
}

}  // namespace geminet::pipeline
