#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "geminet/error.hpp"
#include "geminet/fci.hpp"
#include "geminet/pipeline/compose.hpp"
#include "geminet/pipeline/config.hpp"
#include "geminet/pipeline/dataset.hpp"
#include "geminet/pipeline/experiments.hpp"
#include "geminet/pipeline/label.hpp"
#include "geminet/pipeline/plot.hpp"
#include "support.hpp"

using namespace geminet;
using namespace geminet::pipeline;
namespace fs = std::filesystem;
using doctest::Approx;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small labeled pools shared by the composition tests.
const LabelOutcome& small_pool(int n) {
    static std::map<int, LabelOutcome> cache;
    if (!cache.count(n)) {
        auto geoms = n == 2 ? gen_h2({0.6, 3.0, 6}) : gen_h4(H4Family::linear, {{0.8, 2.4, 4}, std::nullopt});
        LabelOptions opt;
        opt.keep_integrals = true;
        opt.baselines = false;
        opt.workers = 1;
        cache[n] = label_all(with_ids(geoms), opt);
    }
    return cache[n];
}

FragmentPool pool_2_4() {
    std::vector<Record> records;
    IntegralCache ints;
    for (int n : {2, 4}) {
        const auto& o = small_pool(n);
        records.insert(records.end(), o.records.begin(), o.records.end());
        ints.insert(ints.end(), o.integrals.begin(), o.integrals.end());
    }
    return make_pool(records, ints);
}

}  // namespace

TEST_CASE("labeling produces consistent records") {
    const auto& o = small_pool(2);
    REQUIRE(o.records.size() == 6);
    CHECK(o.failures.empty());
    for (const auto& r : o.records) {
        CHECK(r.n_electrons == 2);
        CHECK(r.features.size() == 6);
        CHECK(std::is_sorted(r.features.begin(), r.features.end()));
        CHECK(std::abs(r.target_total - (r.target_electronic + r.e_nuclear)) < 1e-10);
        CHECK(r.e_infinity == Approx(e_infinity(r.features, 2)).epsilon(1e-14));
        CHECK(r.provenance == "fci_label");
    }
    LabelOptions opt;
    opt.workers = 1;
    const auto geom = testing::h2(testing::oracle::h2_eq_r);
    const auto rec = label_geometry(geom, "h2_eq", opt);
    CHECK(std::abs(rec.target_total - testing::oracle::h2_eq_fci) < 1e-6);
    REQUIRE(rec.e_hf);
    CHECK(std::abs(*rec.e_hf - testing::oracle::h2_eq_rhf) < 1e-6);
    CHECK(std::abs(*rec.e_mp2 - testing::oracle::h2_eq_mp2) < 1e-6);

    // Worker count does not change the output.
    auto geoms = with_ids(gen_h2({0.6, 3.0, 6}));
    LabelOptions par = opt;
    par.workers = 3;
    par.baselines = false;
    const auto a = label_all(geoms, par);
    for (std::size_t i = 0; i < a.records.size(); ++i) CHECK(a.records[i].features == o.records[i].features);
}

TEST_CASE("dataset round trip, hashes and parse errors") {
    TempDir dir("geminet_unit_dataset");
    DatasetFile d;
    d.manifest.kind = "label";
    d.manifest.seed = 4;
    d.manifest.config = {{"system", "h2"}, {"n", 6}};
    d.records = small_pool(2).records;
    const auto path = dir.path / "h2.jsonl";
    write_dataset(path, d);
    const auto back = read_dataset(path);
    CHECK(back.manifest.config_hash() == d.manifest.config_hash());
    REQUIRE(back.records.size() == d.records.size());
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        CHECK(back.records[i].id == d.records[i].id);
        CHECK(back.records[i].features == d.records[i].features);
        CHECK(back.records[i].target_total == d.records[i].target_total);
    }
    // Writing the same data twice gives the same bytes.
    const auto again = dir.path / "again.jsonl";
    write_dataset(again, d);
    CHECK(slurp(path) == slurp(again));

    const auto samples = to_samples(back.records);
    CHECK(samples[0].target == back.records[0].target_total);
    CHECK(samples[0].e_infinity == Approx(back.records[0].e_infinity + back.records[0].e_nuclear).epsilon(1e-15));

    // A tampered config no longer matches its hash.
    auto text = slurp(path);
    const auto pos = text.find("\"h2\"");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 4, "\"h4\"");
    std::ofstream(dir.path / "bad_hash.jsonl") << text;
    CHECK_THROWS_AS(read_dataset(dir.path / "bad_hash.jsonl"), DataError);

    // Malformed record line reports its line number.
    auto lines = slurp(path);
    lines += "{not json\n";
    std::ofstream(dir.path / "bad_line.jsonl") << lines;
    try {
        read_dataset(dir.path / "bad_line.jsonl");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(":" + std::to_string(d.records.size() + 2)) != std::string::npos);
    }
    CHECK_THROWS_AS(read_dataset(dir.path / "missing.jsonl"), DataError);
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
}

TEST_CASE("partitions") {
    const auto p = parse_partitions("8+2, 6+4,6+2+2");
    REQUIRE(p.size() == 3);
    CHECK(p[0] == Partition{8, 2});
    CHECK(p[2] == Partition{6, 2, 2});
    CHECK(format_partition(p[1]) == "6+4");
    CHECK_THROWS_AS(parse_partitions("8+"), InputError);
    CHECK_THROWS_AS(parse_partitions("3+x"), InputError);
    CHECK_THROWS_AS(parse_partitions(""), InputError);
}

TEST_CASE("composites are additive, worker independent and exact") {
    const auto pool = pool_2_4();
    ComposeOptions opt;
    opt.partitions = parse_partitions("4+2,2+2");
    opt.count = 12;
    opt.seed = 9;
    opt.workers = 1;
    const auto a = compose(pool, opt);
    opt.workers = 4;
    const auto b = compose(pool, opt);
    REQUIRE(a.size() == 12);
    std::map<std::string, const Fragment*> by_id;
    for (const auto& [n, frags] : pool)
        for (const auto& f : frags) by_id[f.id] = &f;
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].features == b[k].features);
        CHECK(a[k].target_total == b[k].target_total);
        CHECK(a[k].provenance == "composite");
        CHECK(a[k].n_electrons == (k % 2 == 0 ? 6 : 4));
        double sum = 0.0;
        for (const auto& id : a[k].sources) sum += by_id.at(id)->target_total;
        CHECK(a[k].target_total == Approx(sum).epsilon(1e-14));
        CHECK(std::abs(a[k].target_total - (a[k].target_electronic + a[k].e_nuclear)) < 1e-10);
    }
    // Spot-check labels against FCI on the composite itself.
    for (std::size_t k : {0, 1, 5}) {
        const auto ints = composite_integrals(pool, a[k]);
        CHECK(std::abs(ground_state(ints).energy_total - a[k].target_total) < 1e-8);
        CHECK(testing::max_abs_diff(describe(ints).eigenvalues, a[k].features) < 1e-10);
    }
    ComposeOptions missing = opt;
    missing.partitions = parse_partitions("6+2");
    CHECK_THROWS_AS(compose(pool, missing), DataError);
}

TEST_CASE("label cache reuses an identical run") {
    TempDir dir("geminet_unit_label_cache");
    auto geoms = with_ids(gen_h2({0.7, 1.5, 3}));
    LabelOptions opt;
    opt.workers = 1;
    opt.keep_integrals = true;
    const nlohmann::json cfg = {{"system", "h2"}};
    const auto first = label_cached(dir.path, "h2", geoms, cfg, opt);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir.path)) files += e.is_regular_file();
    CHECK(files == 2);
    const auto second = label_cached(dir.path, "h2", geoms, cfg, opt);
    REQUIRE(second.records.size() == first.records.size());
    for (std::size_t i = 0; i < first.records.size(); ++i) CHECK(second.records[i].features == first.records[i].features);
    CHECK(second.integrals.size() == 3);
    // A different geometry set gets its own entry.
    label_cached(dir.path, "h2", with_ids(gen_h2({0.7, 1.5, 4})), cfg, opt);
    files = 0;
    for (const auto& e : fs::directory_iterator(dir.path)) files += e.is_regular_file();
    CHECK(files == 4);
}

TEST_CASE("run configuration parser") {
    const auto cfg = parse_run_config(R"(# comment
model.kind = mlp
model.layers = 100, 50, 1
model.activations = relu, sigmoid, linear
train.epochs = 12
train.learning_rate = 0.002
train.exec = serial
data.datasets = a.jsonl, b.jsonl
io.params_out = out/params.json
)",
                                      "run.cfg", "/base");
    REQUIRE(cfg.model);
    const auto& m = std::get<ml::MlpSpec>(*cfg.model);
    CHECK(m.layer_sizes == std::vector<int>{100, 50, 1});
    CHECK(m.input_width == 0);
    CHECK(cfg.train.epochs == 12);
    CHECK(cfg.train.learning_rate == 0.002);
    CHECK(cfg.train.exec == Exec::serial);
    CHECK(cfg.datasets == std::vector<fs::path>{"/base/a.jsonl", "/base/b.jsonl"});
    CHECK(cfg.params_out == fs::path("/base/out/params.json"));

    const auto set = parse_run_config("model.kind = set_model\nmodel.d_k = 8\n");
    CHECK(std::get<ml::SetModelSpec>(*set.model).d_k == 8);

    auto message = [](const std::string& text) {
        try {
            parse_run_config(text, "bad.cfg");
        } catch (const std::exception& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("train.epochs = many\n").find("bad.cfg:1: train.epochs") != std::string::npos);
    CHECK(message("\nbogus.key = 1\n").find("bad.cfg:2") != std::string::npos);
    CHECK(message("train.seed = 1\ntrain.seed = 2\n").find("bad.cfg:2") != std::string::npos);
    CHECK(message("no equals sign\n").find("bad.cfg:1") != std::string::npos);
    CHECK_THROWS(parse_run_config("model.kind = tree\n"));
    CHECK_THROWS_AS(load_run_config("/nonexistent/run.cfg"), InputError);
}

TEST_CASE("CSV plotting") {
    const auto table = parse_csv("r,E_FCI,E_model\n0.5,-1.0,-1.1\n1.0,-1.2,-1.15\n2.0,-1.05,-1.0\n");
    CHECK(table.header.size() == 3);
    CHECK(table.rows.size() == 3);
    CHECK(table.column("E_model") == 2);
    CHECK_THROWS_AS(table.column("nope"), InputError);

    PlotOptions opt;
    opt.title = "chain";
    const auto svg = render_svg(table, opt);
    CHECK(svg.starts_with("<svg"));
    std::size_t lines = 0;
    for (auto pos = svg.find("<polyline"); pos != std::string::npos; pos = svg.find("<polyline", pos + 1)) ++lines;
    CHECK(lines == 2);
    CHECK(svg.find("E_FCI") != std::string::npos);
    CHECK(svg == render_svg(table, opt));

    opt.y = {"E_model"};
    lines = 0;
    const auto one = render_svg(table, opt);
    for (auto pos = one.find("<polyline"); pos != std::string::npos; pos = one.find("<polyline", pos + 1)) ++lines;
    CHECK(lines == 1);

    CHECK_THROWS_AS(parse_csv("a,b\n"), DataError);
    CHECK_THROWS_AS(parse_csv("a,b\n1,2\n3\n"), ParseError);
}

TEST_CASE("experiment presets and knobs") {
    CHECK(experiment_names().size() == 5);
    for (const auto& name : experiment_names()) {
        CHECK_NOTHROW(experiment_preset(name, "desk").validate());
        CHECK_NOTHROW(experiment_preset(name, "quick").validate());
    }
    CHECK_THROWS_AS(experiment_preset("table9"), InputError);
    CHECK_THROWS_AS(experiment_preset("table1", "huge"), InputError);

    auto s = experiment_preset("learning_curve", "quick");
    set_knob(s, "curve_sizes", "10,20,30");
    CHECK(s.curve_sizes == std::vector<int>{10, 20, 30});
    set_knob(s, "eval_chain", "0.5:4:8");
    CHECK(s.eval_chain.count == 8);
    set_knob(s, "seed", "42");
    CHECK(s.seed == 42);
    CHECK_THROWS_AS(set_knob(s, "unknown", "1"), InputError);
    CHECK_THROWS_AS(set_knob(s, "mlp_epochs", "ten"), InputError);
}
