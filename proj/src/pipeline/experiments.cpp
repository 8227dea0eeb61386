#include "geminet/pipeline/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "geminet/error.hpp"
#include "geminet/ml/train.hpp"
#include "geminet/pipeline/compose.hpp"
#include "geminet/pipeline/dataset.hpp"

namespace geminet::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Values cited from the paper's tables; emitted with source=paper.
struct PaperRow {
    const char* method;
    double a;
    double b;
};
constexpr PaperRow table1_paper[] = {
    {"HF", 0.5890, 0.5817}, {"MP2", 0.4128, 0.2793}, {"CCSD", 0.3154, 0.3716},
    {"B3LYP", 0.6278, 0.3983}, {"SchNet", 0.0041, 0.0046}, {"MOLPIPx", 0.0039, 0.0035}, {"NN", 0.0022, 0.0024},
};

std::string num(double v) {
    if (!std::isfinite(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

class Csv {
public:
    Csv(const fs::path& path, const std::string& header, ExperimentReport& report) : path_(path) {
        out_ << header << '\n';
        report.files.push_back(path);
    }
    ~Csv() {
        std::ofstream f(path_, std::ios::binary);
        f << out_.str();
    }
    template <class... T>
    void row(const T&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cells, first = false), ...);
        out_ << '\n';
    }

private:
    fs::path path_;
    std::ostringstream out_;
};

void log(const std::string& msg) { std::fprintf(stderr, "[experiment] %s\n", msg.c_str()); }

std::string geometry_hash(const std::vector<LabeledGeometry>& geoms) {
    std::string text;
    for (const auto& g : geoms) text += g.id + '\n' + format_xyz(g.geometry);
    return fnv1a_hex(text);
}

struct Context {
    const ExperimentSpec& spec;
    ExperimentReport& report;

    LabelOutcome label(const std::string& key, const std::vector<Geometry>& geoms, bool baselines,
                       bool keep_integrals) const {
        LabelOptions opt;
        opt.workers = spec.workers;
        opt.baselines = baselines;
        opt.keep_integrals = keep_integrals;
        log("labeling " + key + " (" + std::to_string(geoms.size()) + " geometries)");
        auto out = label_cached(spec.cache_dir, key, with_ids(geoms), {{"key", key}}, opt);
        if (!out.failures.empty()) log(key + ": " + std::to_string(out.failures.size()) + " geometries failed");
        return out;
    }

    LabelOutcome coarse(int n_atoms) const {
        return label("h" + std::to_string(n_atoms), generate_default(n_atoms), true, true);
    }

    fs::path out(const std::string& file) const { return spec.out_dir / file; }

    void set(const std::string& key, double v) const { report.metrics[key] = v; }
};

ml::MlpSpec mlp_spec(int width, std::vector<int> sizes, std::vector<ml::Activation> acts) {
    ml::MlpSpec s;
    s.input_width = width;
    s.layer_sizes = std::move(sizes);
    s.activations = std::move(acts);
    return s;
}

ml::TrainConfig base_config(const ExperimentSpec& spec, int epochs) {
    ml::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = spec.seed;
    cfg.curve_every = std::max(1, epochs / 20);
    return cfg;
}

void write_training_curve(const Context& ctx, const std::string& file, const std::vector<ml::EpochStats>& curve) {
    Csv csv(ctx.out(file), "epoch,train_mae,test_mae", ctx.report);
    for (const auto& e : curve) csv.row(e.epoch, num(e.train_mae), num(e.test_mae));
}

struct BaselineMae {
    double hf = NAN;
    double mp2 = NAN;
    int n_hf = 0;
    int n_mp2 = 0;
};

// Only converged RHF solutions count; MP2 exists only on top of those.
BaselineMae baseline_mae(const std::vector<Record>& recs, const std::vector<std::size_t>& idx) {
    BaselineMae b;
    double hf = 0.0, mp2 = 0.0;
    for (auto i : idx) {
        const auto& r = recs[i];
        if (r.e_hf && r.hf_converged.value_or(false)) {
            hf += std::abs(*r.e_hf - r.target_total);
            ++b.n_hf;
        }
        if (r.e_mp2) {
            mp2 += std::abs(*r.e_mp2 - r.target_total);
            ++b.n_mp2;
        }
    }
    if (b.n_hf) b.hf = hf / b.n_hf;
    if (b.n_mp2) b.mp2 = mp2 / b.n_mp2;
    return b;
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

double chain_spacing(const Record& r) { return r.params.at("r"); }

// Dissociation-curve CSV shared by the chain recipes.
void write_chain_curve(const Context& ctx, const std::string& file, const std::vector<Record>& recs,
                       const std::vector<double>& pred, const std::vector<std::string>& role = {}) {
    Csv csv(ctx.out(file), role.empty() ? "r,E_FCI,E_model,E_HF,E_MP2" : "r,E_FCI,E_model,E_HF,E_MP2,role",
            ctx.report);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        const double hf = r.hf_converged.value_or(false) && r.e_hf ? *r.e_hf : NAN;
        if (role.empty()) {
            csv.row(num(chain_spacing(r)), num(r.target_total), num(pred[i]), num(hf), num(r.e_mp2));
        } else {
            csv.row(num(chain_spacing(r)), num(r.target_total), num(pred[i]), num(hf), num(r.e_mp2), role[i]);
        }
    }
}

double mae_over(const std::vector<Record>& recs, const std::vector<double>& pred, const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for (auto i : idx) s += std::abs(pred[i] - recs[i].target_total);
    return s / static_cast<double>(idx.size());
}

void run_table1(const Context& ctx) {
    const auto& spec = ctx.spec;
    struct Col {
        double nn, hf, mp2;
    };
    std::vector<Col> cols;
    for (int n : {4, 6}) {
        const auto data = ctx.coarse(n);
        const auto samples = to_samples(data.records);
        const int width = static_cast<int>(samples.front().features.size());
        const auto mspec = mlp_spec(width, {100, 50, 1},
                                    {ml::Activation::relu, ml::Activation::sigmoid, ml::Activation::linear});
        log("table1: training h" + std::to_string(n) + " on " + std::to_string(samples.size()) + " samples");
        const auto res = ml::train(mspec, samples, base_config(spec, spec.mlp_epochs));
        const auto test = ml::subset(samples, res.split.test);
        const double nn = ml::evaluate(res.params, test).mae;
        const auto base = baseline_mae(data.records, res.split.test);
        const std::string tag = "h" + std::to_string(n);
        write_training_curve(ctx, "table1_" + tag + "_curve.csv", res.curve);
        ml::save_params(res.params, ctx.out("table1_" + tag + ".params.json"));
        ctx.set("table1." + tag + ".nn_mae", nn);
        ctx.set("table1." + tag + ".hf_mae", base.hf);
        ctx.set("table1." + tag + ".mp2_mae", base.mp2);
        ctx.set("table1." + tag + ".n_samples", static_cast<double>(samples.size()));
        ctx.set("table1." + tag + ".n_test", static_cast<double>(test.size()));
        ctx.set("table1." + tag + ".n_test_hf", base.n_hf);
        cols.push_back({nn, base.hf, base.mp2});
    }
    Csv csv(ctx.out("table1.csv"), "method,H4,H6,source", ctx.report);
    csv.row("HF", num(cols[0].hf), num(cols[1].hf), "computed");
    csv.row("MP2", num(cols[0].mp2), num(cols[1].mp2), "computed");
    csv.row("NN", num(cols[0].nn), num(cols[1].nn), "computed");
    for (const auto& p : table1_paper) csv.row(p.method, num(p.a), num(p.b), "paper");
}

std::vector<Geometry> fine_h6(int side) {
    std::vector<Geometry> out;
    for (const auto& fam : families_for(6)) {
        FamilyGrid g = default_grid(6, fam, GridScale::fine);
        g.primary.count = side;
        if (g.secondary) g.secondary->count = side;
        auto part = generate(6, fam, g);
        out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return out;
}

void run_learning_curve(const Context& ctx) {
    const auto& spec = ctx.spec;
    const auto data = ctx.label("h6_fine" + std::to_string(spec.fine_grid_side), fine_h6(spec.fine_grid_side), false,
                                false);
    const auto samples = to_samples(data.records);
    const std::size_t n_test = static_cast<std::size_t>(spec.curve_test_size);
    if (samples.size() <= n_test) throw InputError("learning_curve: test set leaves no training data");

    std::vector<std::size_t> order = all_indices(samples.size());
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    const auto test = ml::subset(samples, test_idx);
    const std::size_t available = samples.size() - n_test;

    const auto mspec = mlp_spec(static_cast<int>(samples.front().features.size()), {200, 50, 50, 50, 1},
                                {ml::Activation::relu, ml::Activation::sigmoid, ml::Activation::sigmoid,
                                 ml::Activation::sigmoid, ml::Activation::linear});
    ctx.set("learning_curve.n_structures", static_cast<double>(samples.size()));
    Csv csv(ctx.out("learning_curve.csv"), "n_train,epochs,train_mae,test_mae", ctx.report);
    for (int size : spec.curve_sizes) {
        if (static_cast<std::size_t>(size) > available) {
            log("learning_curve: skipping n_train=" + std::to_string(size) + ", only " + std::to_string(available) +
                " structures available");
            continue;
        }
        const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(n_test),
                                           order.begin() + static_cast<std::ptrdiff_t>(n_test + size));
        const auto train = ml::subset(samples, idx);
        ml::TrainConfig cfg = base_config(spec, 1);
        const long batches = (size + cfg.batch_size - 1) / cfg.batch_size;
        cfg.epochs = static_cast<int>(std::max(1L, (spec.curve_steps + batches - 1) / batches));
        cfg.curve_every = cfg.epochs;
        log("learning_curve: n_train=" + std::to_string(size) + ", " + std::to_string(cfg.epochs) + " epochs");
        ml::ModelParams init = ml::init_params(mspec, spec.seed);
        ml::fit_input_standardization(init, train);
        const auto res = ml::fit(std::move(init), train, test, cfg);
        csv.row(size, cfg.epochs, num(res.curve.back().train_mae), num(res.curve.back().test_mae));
        ctx.set("learning_curve.mae_" + std::to_string(size), res.curve.back().test_mae);
    }
}

void run_h6_transfer(const Context& ctx) {
    const auto& spec = ctx.spec;
    const auto data = ctx.coarse(6);
    const auto samples = to_samples(data.records);
    const auto mspec = mlp_spec(static_cast<int>(samples.front().features.size()), {100, 50, 1},
                                {ml::Activation::relu, ml::Activation::sigmoid, ml::Activation::linear});
    log("h6_transfer: training on " + std::to_string(samples.size()) + " samples");
    const auto res = ml::train(mspec, samples, base_config(spec, spec.mlp_epochs));
    write_training_curve(ctx, "h6_transfer_training.csv", res.curve);

    const auto chain = ctx.label("h6_chain", gen_chain(6, spec.eval_chain), true, false);
    const auto pred = ml::predict_all(res.params, to_samples(chain.records));
    write_chain_curve(ctx, "h6_transfer_curve.csv", chain.records, pred);

    const auto idx = all_indices(chain.records.size());
    const double nn = mae_over(chain.records, pred, idx);
    double stretched = 0.0;
    for (auto i : idx)
        if (chain_spacing(chain.records[i]) >= 5.0 - 1e-9)
            stretched = std::max(stretched, std::abs(pred[i] - chain.records[i].target_total));
    const auto base = baseline_mae(chain.records, idx);
    ctx.set("h6_transfer.test_mae", res.curve.back().test_mae);
    ctx.set("h6_transfer.nn_mae", nn);
    ctx.set("h6_transfer.max_err_r_ge_5", stretched);
    ctx.set("h6_transfer.hf_mae", base.hf);
    ctx.set("h6_transfer.mp2_mae", base.mp2);

    Csv csv(ctx.out("h6_transfer.csv"), "method,mae,source", ctx.report);
    csv.row("NN", num(nn), "computed");
    csv.row("HF", num(base.hf), "computed");
    csv.row("MP2", num(base.mp2), "computed");
    csv.row("SchNet", num(0.1819058393808002), "paper");
    csv.row("MOLPIPx", num(0.13938764554909475), "paper");
    csv.row("NN", num(0.05299465629663746), "paper");
}

FragmentPool pool_for(const Context& ctx, std::initializer_list<int> sizes) {
    FragmentPool pool;
    for (int n : sizes) {
        const auto d = ctx.coarse(n);
        auto part = make_pool(d.records, d.integrals);
        for (auto& [k, v] : part) pool[k] = std::move(v);
    }
    return pool;
}

// Composite records are deterministic in (pool, options) and cached like labels.
std::vector<Record> composed(const Context& ctx, const std::string& key, const FragmentPool& pool,
                             const ComposeOptions& opt) {
    json parts = json::array();
    for (const auto& p : opt.partitions) parts.push_back(format_partition(p));
    std::string pool_ids;
    for (const auto& [n, frags] : pool)
        for (const auto& f : frags) pool_ids += f.id + '\n';
    Manifest m{"compose", opt.seed,
               {{"key", key}, {"partitions", parts}, {"count", opt.count}, {"pool", fnv1a_hex(pool_ids)}}};
    const auto& dir = ctx.spec.cache_dir;
    const fs::path file = dir.empty() ? fs::path() : dir / (key + "-" + m.config_hash() + ".jsonl");
    if (!file.empty() && fs::exists(file)) {
        log("compose " + key + ": cached");
        return read_dataset(file).records;
    }
    log("compose " + key + ": " + std::to_string(opt.count) + " composites");
    auto recs = compose(pool, opt);
    if (!file.empty()) {
        fs::create_directories(dir);
        write_dataset(file, {m, recs});
    }
    return recs;
}

void run_h10_pipeline(const Context& ctx) {
    const auto& spec = ctx.spec;
    const FragmentPool pool = pool_for(ctx, {2, 4, 6, 8});
    ComposeOptions copt;
    copt.partitions = parse_partitions("8+2,6+4,6+2+2");
    copt.count = spec.composite_count;
    copt.seed = spec.seed;
    copt.workers = spec.workers;
    const auto comps = composed(ctx, "h10_composites", pool, copt);
    const auto comp_samples = to_samples(comps);

    const auto chain = ctx.label("h10_chain", gen_h10_chain({0.5, 8.0, spec.h10_chain_points}), true, false);
    const auto chain_samples = to_samples(chain.records);

    // Fine-tune on every k-th chain point, evaluate on the rest.
    const std::size_t n_chain = chain.records.size();
    const std::size_t n_ft = static_cast<std::size_t>(spec.finetune_points);
    if (n_ft < 2 || n_ft >= n_chain) throw InputError("h10_pipeline: finetune_points must lie in [2, chain size)");
    const std::size_t stride = (n_chain - 1) / (n_ft - 1);
    std::vector<std::size_t> ft_idx, eval_idx;
    std::vector<std::string> role(n_chain, "eval");
    for (std::size_t i = 0; i < n_chain; ++i) {
        if (i % stride == 0 && ft_idx.size() < n_ft) {
            ft_idx.push_back(i);
            role[i] = "finetune";
        } else {
            eval_idx.push_back(i);
        }
    }

    const auto mspec = mlp_spec(static_cast<int>(comp_samples.front().features.size()), {500, 200, 200, 100, 1},
                                {ml::Activation::relu, ml::Activation::relu, ml::Activation::relu,
                                 ml::Activation::relu, ml::Activation::linear});
    ml::TrainConfig pcfg = base_config(spec, spec.pretrain_epochs);
    pcfg.curve_every = 1;
    log("h10_pipeline: pretraining on " + std::to_string(comp_samples.size()) + " composites");
    const auto pre = ml::train(mspec, comp_samples, pcfg);
    write_training_curve(ctx, "h10_pretrain_curve.csv", pre.curve);

    ml::TrainConfig fcfg = base_config(spec, spec.finetune_epochs);
    fcfg.batch_size = static_cast<int>(n_ft);
    log("h10_pipeline: fine-tuning dense0 on " + std::to_string(n_ft) + " chain points");
    const auto ft = ml::finetune_first_layer(pre.params, ml::subset(chain_samples, ft_idx), fcfg);
    write_training_curve(ctx, "h10_finetune_curve.csv", ft.curve);
    ml::save_params(ft.params, ctx.out("h10_finetuned.params.json"));

    const auto pred = ml::predict_all(ft.params, chain_samples);
    const auto pred_pre = ml::predict_all(pre.params, chain_samples);
    write_chain_curve(ctx, "h10_pipeline_curve.csv", chain.records, pred, role);
    const double nn = mae_over(chain.records, pred, eval_idx);
    const double nn_pre = mae_over(chain.records, pred_pre, eval_idx);
    const auto base = baseline_mae(chain.records, eval_idx);
    ctx.set("h10_pipeline.composites", static_cast<double>(comp_samples.size()));
    ctx.set("h10_pipeline.composite_test_mae", pre.curve.back().test_mae);
    ctx.set("h10_pipeline.n_finetune", static_cast<double>(ft_idx.size()));
    ctx.set("h10_pipeline.n_eval", static_cast<double>(eval_idx.size()));
    ctx.set("h10_pipeline.nn_mae", nn);
    ctx.set("h10_pipeline.pretrained_only_mae", nn_pre);
    ctx.set("h10_pipeline.hf_mae", base.hf);
    ctx.set("h10_pipeline.mp2_mae", base.mp2);

    Csv csv(ctx.out("h10_pipeline.csv"), "method,mae,source", ctx.report);
    csv.row("NN", num(nn), "computed");
    csv.row("NN (pretrained only)", num(nn_pre), "computed");
    csv.row("HF", num(base.hf), "computed");
    csv.row("MP2", num(base.mp2), "computed");
    csv.row("HF", num(1.6267), "paper");
    csv.row("CCSD(T)", num(0.1791), "paper");
    csv.row("MP2", num(0.3615), "paper");
    csv.row("B3LYP", num(2.4493), "paper");
    csv.row("NN", num(0.0102), "paper");
}

void run_h8_setmodel(const Context& ctx) {
    const auto& spec = ctx.spec;
    const auto h4 = ctx.coarse(4);
    const auto h6 = ctx.coarse(6);
    const FragmentPool pool = pool_for(ctx, {2, 4, 6});
    ComposeOptions copt;
    copt.partitions = parse_partitions("4+4,6+2,2+2+2+2");
    copt.count = spec.set_composite_count;
    copt.seed = spec.seed;
    copt.workers = spec.workers;
    const auto comps = composed(ctx, "h8_composites", pool, copt);

    std::vector<ml::Sample> samples = to_samples(h4.records);
    for (auto* part : {&h6.records, &comps}) {
        auto s = to_samples(*part);
        samples.insert(samples.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }
    ml::TrainConfig cfg = base_config(spec, spec.set_epochs);
    log("h8_setmodel: training on " + std::to_string(samples.size()) + " samples");
    const auto res = ml::train(ml::SetModelSpec{}, samples, cfg);
    write_training_curve(ctx, "h8_setmodel_training.csv", res.curve);
    ml::save_params(res.params, ctx.out("h8_setmodel.params.json"));

    const auto chain = ctx.label("h8_chain", gen_chain(8, spec.eval_chain), true, false);
    const auto chain_samples = to_samples(chain.records);
    const auto pred = ml::predict_all(res.params, chain_samples);
    write_chain_curve(ctx, "h8_setmodel_curve.csv", chain.records, pred);

    const auto idx = all_indices(chain.records.size());
    const double nn = mae_over(chain.records, pred, idx);
    double plateau = 0.0;
    for (auto i : idx)
        if (chain_spacing(chain.records[i]) >= 6.0 - 1e-9)
            plateau = std::max(plateau, std::abs(pred[i] - chain.records[i].target_total));
    const auto base = baseline_mae(chain.records, idx);
    ctx.set("h8_setmodel.test_mae", res.curve.back().test_mae);
    ctx.set("h8_setmodel.nn_mae", nn);
    ctx.set("h8_setmodel.max_err_r_ge_6", plateau);
    ctx.set("h8_setmodel.hf_mae", base.hf);
    ctx.set("h8_setmodel.mp2_mae", base.mp2);

    Csv csv(ctx.out("h8_setmodel.csv"), "method,mae,source", ctx.report);
    csv.row("NN", num(nn), "computed");
    csv.row("HF", num(base.hf), "computed");
    csv.row("MP2", num(base.mp2), "computed");
    csv.row("SchNet", num(0.26004577), "paper");
    csv.row("Skala", num(0.7126474623351507), "paper");
    csv.row("NN", num(0.09728324545437732), "paper");
}

}  // namespace

void ExperimentSpec::validate() const {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw InputError("unknown experiment '" + name + "'");
    }
    if (mlp_epochs <= 0 || pretrain_epochs <= 0 || finetune_epochs <= 0 || set_epochs <= 0) {
        throw InputError("epoch counts must be positive");
    }
    if (fine_grid_side < 2) throw InputError("fine_grid_side must be at least 2");
    if (curve_sizes.empty()) throw InputError("curve_sizes must not be empty");
    for (int s : curve_sizes)
        if (s <= 0) throw InputError("curve_sizes must be positive");
    if (curve_test_size <= 0 || curve_steps <= 0) throw InputError("curve_test_size and curve_steps must be positive");
    if (composite_count == 0 || set_composite_count == 0) throw InputError("composite counts must be positive");
    if (finetune_points < 2 || finetune_points >= h10_chain_points) {
        throw InputError("finetune_points must lie in [2, h10_chain_points)");
    }
    eval_chain.validate();
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"table1", "learning_curve", "h6_transfer", "h10_pipeline",
                                                   "h8_setmodel"};
    return names;
}

ExperimentSpec experiment_preset(const std::string& name, const std::string& scale) {
    ExperimentSpec s;
    s.name = name;
    if (scale == "desk") {
        s.validate();
        return s;
    }
    if (scale != "quick") throw InputError("unknown scale '" + scale + "' (desk or quick)");
    s.mlp_epochs = 20;
    s.fine_grid_side = 8;
    s.curve_sizes = {40, 80};
    s.curve_test_size = 40;
    s.curve_steps = 50;
    s.composite_count = 300;
    s.pretrain_epochs = 2;
    s.finetune_epochs = 20;
    s.h10_chain_points = 10;
    s.finetune_points = 4;
    s.set_composite_count = 60;
    s.set_epochs = 2;
    s.eval_chain = {0.5, 8.0, 16};
    s.validate();
    return s;
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
        throw InputError("experiment knob " + key + ": cannot parse '" + v + "'");
    }
    return out;
}

std::vector<std::string> split(const std::string& v, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(item);
    return out;
}

}  // namespace

void set_knob(ExperimentSpec& s, const std::string& key, const std::string& value) {
    auto as_int = [&] { return parse_number<int>(key, value); };
    auto as_size = [&] { return parse_number<std::size_t>(key, value); };
    if (key == "seed") s.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "mlp_epochs") s.mlp_epochs = as_int();
    else if (key == "fine_grid_side") s.fine_grid_side = as_int();
    else if (key == "curve_test_size") s.curve_test_size = as_int();
    else if (key == "curve_steps") s.curve_steps = parse_number<long>(key, value);
    else if (key == "composite_count") s.composite_count = as_size();
    else if (key == "h10_chain_points") s.h10_chain_points = as_int();
    else if (key == "pretrain_epochs") s.pretrain_epochs = as_int();
    else if (key == "finetune_epochs") s.finetune_epochs = as_int();
    else if (key == "finetune_points") s.finetune_points = as_int();
    else if (key == "set_composite_count") s.set_composite_count = as_size();
    else if (key == "set_epochs") s.set_epochs = as_int();
    else if (key == "curve_sizes") {
        s.curve_sizes.clear();
        for (const auto& v : split(value, ',')) s.curve_sizes.push_back(parse_number<int>(key, v));
    } else if (key == "eval_chain") {
        const auto parts = split(value, ':');
        if (parts.size() != 3) throw InputError("experiment knob eval_chain: expected start:stop:count");
        s.eval_chain = {parse_number<double>(key, parts[0]), parse_number<double>(key, parts[1]),
                        parse_number<int>(key, parts[2])};
    } else {
        throw InputError("unknown experiment knob '" + key + "'");
    }
}

LabelOutcome label_cached(const fs::path& cache_dir, const std::string& key, const std::vector<LabeledGeometry>& geoms,
                          const json& config, const LabelOptions& opt) {
    json cfg = config;
    cfg["geometries"] = geometry_hash(geoms);
    cfg["baselines"] = opt.baselines;
    cfg["fci_residual_tol"] = opt.fci.residual_tol;
    Manifest m{"label", 0, cfg};
    const std::string stem = key + "-" + m.config_hash();
    const fs::path data = cache_dir.empty() ? fs::path() : cache_dir / (stem + ".jsonl");
    const fs::path ints = cache_dir.empty() ? fs::path() : cache_dir / (stem + ".ints");

    if (!data.empty() && fs::exists(data) && (!opt.keep_integrals || fs::exists(ints))) {
        LabelOutcome out;
        out.records = read_dataset(data).records;
        if (opt.keep_integrals) out.integrals = read_integral_cache(ints);
        for (const auto& r : out.records)
            if (r.hf_converged && !*r.hf_converged) ++out.hf_unconverged;
        return out;
    }
    LabelOutcome out = label_all(geoms, opt);
    for (const auto& [id, msg] : out.failures) log(key + ": " + id + " failed: " + msg);
    if (!data.empty()) {
        fs::create_directories(cache_dir);
        // Integrals first: the dataset file is what marks the entry complete.
        if (opt.keep_integrals) write_integral_cache(ints, out.integrals);
        write_dataset(data, {m, out.records});
    }
    return out;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    fs::create_directories(spec.out_dir);
    ExperimentReport report;
    const Context ctx{spec, report};
    try {
        if (spec.name == "table1") run_table1(ctx);
        else if (spec.name == "learning_curve") run_learning_curve(ctx);
        else if (spec.name == "h6_transfer") run_h6_transfer(ctx);
        else if (spec.name == "h10_pipeline") run_h10_pipeline(ctx);
        else run_h8_setmodel(ctx);
    } catch (const InputError& e) {
        throw InputError(spec.name + ": " + e.what());
    } catch (const SolverError& e) {
        throw SolverError(spec.name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(spec.name + ": " + e.what());
    }

    Csv csv(spec.out_dir / (spec.name + "_metrics.csv"), "metric,value", report);
    for (const auto& [k, v] : report.metrics) csv.row(k, num(v));
    return report;
}

}  // namespace geminet::pipeline
