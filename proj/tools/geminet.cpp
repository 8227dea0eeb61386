// Command-line front end: dataset building, composition, training and the
// named experiment recipes.

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geminet/error.hpp"
#include "geminet/geometry.hpp"
#include "geminet/ml/train.hpp"
#include "geminet/pipeline/compose.hpp"
#include "geminet/pipeline/config.hpp"
#include "geminet/pipeline/dataset.hpp"
#include "geminet/pipeline/experiments.hpp"
#include "geminet/pipeline/label.hpp"
#include "geminet/pipeline/plot.hpp"

namespace fs = std::filesystem;
using namespace geminet;
using namespace geminet::pipeline;

namespace {

GridSpec parse_grid(const std::string& text, const char* flag) {
    GridSpec g;
    double* slots[] = {&g.start, &g.stop};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        const auto colon = text.find(':', pos);
        if ((i < 2) == (colon == std::string::npos)) throw InputError(std::string(flag) + ": expected start:stop:count");
        const std::string part = text.substr(pos, i < 2 ? colon - pos : std::string::npos);
        const char* b = part.data();
        const char* e = b + part.size();
        const auto res = i < 2 ? std::from_chars(b, e, *slots[i]) : std::from_chars(b, e, g.count);
        if (part.empty() || res.ec != std::errc() || res.ptr != e) {
            throw InputError(std::string(flag) + ": cannot parse '" + part + "'");
        }
        pos = colon + 1;
    }
    g.validate();
    return g;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10f", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
    std::string system;
    std::string family;
    std::string scale = "coarse";
    std::string primary;
    std::string secondary;
    std::string out;
};

int run_gen(const GenArgs& a) {
    const int n = parse_system(a.system);
    const GridScale scale = a.scale == "fine" ? GridScale::fine : GridScale::coarse;
    if (a.scale != "fine" && a.scale != "coarse") throw InputError("--scale must be coarse or fine");
    std::vector<Geometry> geoms;
    if (a.family.empty()) {
        if (!a.primary.empty() || !a.secondary.empty()) throw InputError("grid flags need --family");
        geoms = generate_default(n, scale);
    } else {
        FamilyGrid grid = default_grid(n, a.family, scale);
        if (!a.primary.empty()) grid.primary = parse_grid(a.primary, "--primary");
        if (!a.secondary.empty()) {
            if (!grid.secondary) throw InputError("family '" + a.family + "' has a single parameter");
            grid.secondary = parse_grid(a.secondary, "--secondary");
        }
        geoms = generate(n, a.family, grid);
    }
    write_geometry_dir(a.out, with_ids(geoms));
    std::printf("wrote %zu geometries to %s\n", geoms.size(), a.out.c_str());
    return 0;
}

// ---- label -----------------------------------------------------------------

struct LabelArgs {
    std::string in;
    std::string out;
    std::string integrals;
    int workers = 0;
    bool no_baselines = false;
    std::uint64_t seed = 0;
};

int run_label(const LabelArgs& a) {
    const auto geoms = read_geometry_dir(a.in);
    if (geoms.empty()) throw DataError("no .xyz files in " + a.in);
    LabelOptions opt;
    opt.workers = a.workers;
    opt.baselines = !a.no_baselines;
    opt.keep_integrals = !a.integrals.empty();
    const LabelOutcome res = label_all(geoms, opt);
    for (const auto& [id, msg] : res.failures) std::fprintf(stderr, "label: %s failed: %s\n", id.c_str(), msg.c_str());
    if (res.records.empty()) throw SolverError("every geometry failed");

    std::string text;
    for (const auto& g : geoms) text += g.id + '\n' + format_xyz(g.geometry);
    Manifest m{"label", a.seed,
               {{"geometries", fnv1a_hex(text)},
                {"count", geoms.size()},
                {"baselines", opt.baselines},
                {"fci_residual_tol", opt.fci.residual_tol}}};
    if (opt.keep_integrals) write_integral_cache(a.integrals, res.integrals);
    write_dataset(a.out, {m, res.records});
    std::printf("labeled %zu of %zu geometries (%zu failed, %d RHF unconverged) -> %s\n", res.records.size(), geoms.size(),
                res.failures.size(), res.hf_unconverged, a.out.c_str());
    return 0;
}

// ---- compose ---------------------------------------------------------------

struct ComposeArgs {
    std::vector<std::string> fragments;
    std::vector<std::string> integrals;
    std::string partitions = "8+2,6+4,6+2+2";
    std::size_t count = 100000;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string out;
};

int run_compose(const ComposeArgs& a) {
    if (a.fragments.size() != a.integrals.size()) {
        throw InputError("give one --integrals file per --fragments dataset");
    }
    FragmentPool pool;
    nlohmann::json sources = nlohmann::json::array();
    for (std::size_t i = 0; i < a.fragments.size(); ++i) {
        const auto d = read_dataset(a.fragments[i]);
        const auto part = make_pool(d.records, read_integral_cache(a.integrals[i]));
        for (const auto& [n, frags] : part) {
            auto& dst = pool[n];
            dst.insert(dst.end(), frags.begin(), frags.end());
        }
        sources.push_back(d.manifest.config_hash());
    }
    ComposeOptions opt;
    opt.partitions = parse_partitions(a.partitions);
    opt.count = a.count;
    opt.seed = a.seed;
    opt.workers = a.workers;
    const auto recs = compose(pool, opt);
    Manifest m{"compose", a.seed, {{"partitions", a.partitions}, {"count", a.count}, {"fragment_sets", sources}}};
    write_dataset(a.out, {m, recs});
    std::printf("wrote %zu composites -> %s\n", recs.size(), a.out.c_str());
    return 0;
}

// ---- train / finetune / eval ---------------------------------------------

struct RunArgs {
    std::string config;
    int epochs = -1;
    long long seed = -1;
};

std::pair<std::vector<ml::Sample>, std::vector<Record>> load_data(const RunConfig& c) {
    if (c.datasets.empty()) throw InputError("config: data.datasets is required");
    std::vector<Record> recs;
    for (const auto& p : c.datasets) {
        auto d = read_dataset(p);
        recs.insert(recs.end(), std::make_move_iterator(d.records.begin()), std::make_move_iterator(d.records.end()));
    }
    if (recs.empty()) throw DataError("datasets contain no records");
    return {to_samples(recs), std::move(recs)};
}

void check_widths(const ml::ModelParams& p, const std::vector<ml::Sample>& samples) {
    if (!p.is_mlp()) return;
    const auto w = static_cast<std::size_t>(p.mlp().input_width);
    for (const auto& s : samples) {
        if (s.features.size() != w) {
            throw InputError("feature length " + std::to_string(s.features.size()) + " does not match model input width " +
                             std::to_string(w));
        }
    }
}

void write_outputs(const RunConfig& c, const ml::ModelParams& p, const std::vector<ml::Sample>& samples,
                   const std::vector<Record>& recs, const std::vector<ml::EpochStats>& curve,
                   const std::vector<std::string>& split) {
    if (!c.params_out.empty()) {
        if (c.params_out.has_parent_path()) fs::create_directories(c.params_out.parent_path());
        ml::save_params(p, c.params_out);
    }
    const auto pred = ml::predict_all(p, samples, c.train.exec);
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        groups["all"].push_back(i);
        if (!split.empty()) groups[split[i]].push_back(i);
    }
    std::string metrics = "split,n,mae,rmse\n";
    for (const auto& [name, idx] : groups) {
        const auto m = ml::evaluate(p, ml::subset(samples, idx), c.train.exec);
        metrics += name + "," + std::to_string(idx.size()) + "," + fmt(m.mae) + "," + fmt(m.rmse) + "\n";
        std::printf("%-6s n=%-6zu mae=%.6f rmse=%.6f\n", name.c_str(), idx.size(), m.mae, m.rmse);
    }
    if (!c.metrics.empty()) write_text(c.metrics, metrics);
    if (!c.curve.empty() && !curve.empty()) {
        std::string text = "epoch,train_mae,test_mae\n";
        for (const auto& e : curve)
            text += std::to_string(e.epoch) + "," + fmt(e.train_mae) + "," + (std::isnan(e.test_mae) ? "" : fmt(e.test_mae)) + "\n";
        write_text(c.curve, text);
    }
    if (!c.predictions.empty()) {
        std::string text = split.empty() ? "id,target,prediction\n" : "id,target,prediction,split\n";
        for (std::size_t i = 0; i < samples.size(); ++i) {
            text += recs[i].id + "," + fmt(samples[i].target) + "," + fmt(pred[i]);
            text += split.empty() ? "\n" : "," + split[i] + "\n";
        }
        write_text(c.predictions, text);
    }
}

RunConfig load_with_overrides(const RunArgs& a) {
    RunConfig c = load_run_config(a.config);
    if (a.epochs >= 0) c.train.epochs = a.epochs;
    if (a.seed >= 0) c.train.seed = static_cast<std::uint64_t>(a.seed);
    return c;
}

int run_train(const RunArgs& a) {
    const RunConfig c = load_with_overrides(a);
    if (!c.model) throw InputError("config: train needs a model.* section");
    const auto [samples, recs] = load_data(c);
    ml::ModelSpec spec = *c.model;
    if (auto* m = std::get_if<ml::MlpSpec>(&spec); m && m->input_width == 0) {
        m->input_width = static_cast<int>(samples.front().features.size());
    }
    ml::ModelParams probe = ml::init_params(spec, c.train.seed);
    check_widths(probe, samples);
    const auto res = ml::train(spec, samples, c.train);
    std::vector<std::string> split(samples.size(), "train");
    for (auto i : res.split.test) split[i] = "test";
    write_outputs(c, res.params, samples, recs, res.curve, split);
    return 0;
}

int run_finetune(const RunArgs& a) {
    const RunConfig c = load_with_overrides(a);
    if (c.params_in.empty()) throw InputError("config: finetune needs io.params_in");
    const auto pre = ml::load_params(c.params_in);
    const auto [samples, recs] = load_data(c);
    check_widths(pre, samples);
    const auto res = ml::finetune_first_layer(pre, samples, c.train);
    write_outputs(c, res.params, samples, recs, res.curve, {});
    return 0;
}

int run_eval(const RunArgs& a) {
    const RunConfig c = load_with_overrides(a);
    if (c.params_in.empty()) throw InputError("config: eval needs io.params_in");
    const auto p = ml::load_params(c.params_in);
    const auto [samples, recs] = load_data(c);
    check_widths(p, samples);
    write_outputs(c, p, samples, recs, {}, {});
    return 0;
}

// ---- experiment ------------------------------------------------------------

struct ExperimentArgs {
    std::string name;
    std::string scale = "desk";
    std::string out = "report";
    std::string cache;
    int workers = 0;
    long long seed = -1;
    std::vector<std::string> knobs;
};

int run_experiment_cmd(const ExperimentArgs& a) {
    ExperimentSpec spec = experiment_preset(a.name, a.scale);
    spec.out_dir = a.out;
    spec.workers = a.workers;
    if (!a.cache.empty()) spec.cache_dir = a.cache;
    else if (const char* env = std::getenv("GEMINET_CACHE_DIR")) spec.cache_dir = env;
    if (a.seed >= 0) spec.seed = static_cast<std::uint64_t>(a.seed);
    for (const auto& kv : a.knobs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
        set_knob(spec, kv.substr(0, eq), kv.substr(eq + 1));
    }
    spec.validate();
    const auto report = run_experiment(spec);
    for (const auto& [k, v] : report.metrics) std::printf("%-40s %.6f\n", k.c_str(), v);
    for (const auto& f : report.files) std::printf("wrote %s\n", f.string().c_str());
    return 0;
}

// ---- plot ------------------------------------------------------------------

struct PlotArgs {
    std::string in;
    std::string out;
    PlotOptions opt;
};

int run_plot(const PlotArgs& a) {
    const auto table = read_csv(a.in);
    write_text(a.out, render_svg(table, a.opt));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geminal-eigenvalue descriptors, FCI labels and energy models for hydrogen clusters"};
    app.require_subcommand(1);
    app.set_version_flag("--version", code_version);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Write XYZ files for a system's geometry families");
    g->add_option("--system", gen.system, "h2, h4, h6, h8 or h10")->required();
    g->add_option("--family", gen.family, "family name; every family of the system when omitted");
    g->add_option("--scale", gen.scale, "default grid density: coarse or fine (h6 only)")->capture_default_str();
    g->add_option("--primary", gen.primary, "primary grid start:stop:count (angstrom or family units)");
    g->add_option("--secondary", gen.secondary, "secondary grid start:stop:count");
    g->add_option("--out", gen.out, "output directory")->required();

    LabelArgs lab;
    auto* l = app.add_subcommand("label", "FCI labels, descriptors and HF/MP2 baselines for a geometry directory");
    l->add_option("--in", lab.in, "directory of .xyz files")->required()->check(CLI::ExistingDirectory);
    l->add_option("--out", lab.out, "output dataset (.jsonl)")->required();
    l->add_option("--integrals", lab.integrals, "also write the orthonormal integrals (needed by compose)");
    l->add_option("--workers", lab.workers, "worker threads; default GEMINET_WORKERS or all cores");
    l->add_flag("--no-baselines", lab.no_baselines, "skip RHF and MP2");
    l->add_option("--seed", lab.seed, "seed recorded in the manifest")->capture_default_str();

    ComposeArgs comp;
    auto* c = app.add_subcommand("compose", "Size-consistent composites from labeled fragments");
    c->add_option("--fragments", comp.fragments, "fragment dataset(s)")->required();
    c->add_option("--integrals", comp.integrals, "integral cache for each fragment dataset, same order")->required();
    c->add_option("--partitions", comp.partitions, "comma-separated partitions")->capture_default_str();
    c->add_option("--count", comp.count, "number of composites")->capture_default_str();
    c->add_option("--seed", comp.seed, "sampling seed")->capture_default_str();
    c->add_option("--workers", comp.workers, "worker threads");
    c->add_option("--out", comp.out, "output dataset (.jsonl)")->required();

    RunArgs tr, ft, ev;
    auto add_run = [&](const char* name, const char* desc, RunArgs& r) {
        auto* s = app.add_subcommand(name, desc);
        s->add_option("--config", r.config, "key = value config file")->required()->check(CLI::ExistingFile);
        s->add_option("--epochs", r.epochs, "override train.epochs");
        s->add_option("--seed", r.seed, "override train.seed");
        return s;
    };
    auto* t = add_run("train", "Train a model from a config file", tr);
    auto* f = add_run("finetune", "Retrain only the first layer of a pretrained MLP", ft);
    auto* e = add_run("eval", "Evaluate saved parameters on datasets", ev);

    ExperimentArgs ex;
    auto* x = app.add_subcommand("experiment", "Run a named recipe and write its report");
    x->add_option("name", ex.name, "table1, learning_curve, h6_transfer, h10_pipeline or h8_setmodel")
        ->required()
        ->check(CLI::IsMember(experiment_names()));
    x->add_option("--scale", ex.scale, "desk or quick")->capture_default_str();
    x->add_option("--out", ex.out, "report directory")->capture_default_str();
    x->add_option("--cache", ex.cache, "label cache directory (default GEMINET_CACHE_DIR)");
    x->add_option("--workers", ex.workers, "worker threads; default GEMINET_WORKERS or all cores");
    x->add_option("--seed", ex.seed, "override the recipe seed");
    x->add_option("--set", ex.knobs, "override a scale knob, key=value (repeatable)");

    PlotArgs pl;
    auto* p = app.add_subcommand("plot", "Render a CSV as an SVG line plot");
    p->add_option("--in", pl.in, "CSV file")->required();
    p->add_option("--out", pl.out, "SVG file")->required();
    p->add_option("--x", pl.opt.x, "x column (default: first)");
    p->add_option("--y", pl.opt.y, "y columns (default: every numeric column)");
    p->add_option("--title", pl.opt.title);
    p->add_option("--x-label", pl.opt.x_label);
    p->add_option("--y-label", pl.opt.y_label);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (g->parsed()) return run_gen(gen);
        if (l->parsed()) return run_label(lab);
        if (c->parsed()) return run_compose(comp);
        if (t->parsed()) return run_train(tr);
        if (f->parsed()) return run_finetune(ft);
        if (e->parsed()) return run_eval(ev);
        if (x->parsed()) return run_experiment_cmd(ex);
        if (p->parsed()) return run_plot(pl);
    } catch (const InputError& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 2;
    } catch (const DataError& err) {
        std::fprintf(stderr, "data error: %s\n", err.what());
        return 3;
    } catch (const SolverError& err) {
        std::fprintf(stderr, "solver failure: %s\n", err.what());
        return 4;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 3;
    }
    return 2;
}
