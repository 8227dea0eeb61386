// Acceptance harness: one PASS/FAIL line per criterion.
//
//   geminet_acceptance [--criterion N] [--scale desk|quick] [--cache DIR] [--out DIR]
//
// Criteria 5-9 and 11 run full experiments and share the label cache, so a
// later criterion reuses the FCI labels of an earlier one.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "geminet/descriptor.hpp"
#include "geminet/error.hpp"
#include "geminet/fci.hpp"
#include "geminet/mf.hpp"
#include "geminet/ml/model.hpp"
#include "geminet/ml/params.hpp"
#include "geminet/pipeline/experiments.hpp"
#include "support.hpp"

using namespace geminet;
namespace fs = std::filesystem;
namespace oracle = geminet::testing::oracle;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Settings {
    std::string scale = "desk";
    fs::path cache;
    fs::path out;
    int workers = 0;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

IntegralSet ortho(const Geometry& g) { return orthonormalize(build_integrals(g)); }

std::vector<double> spectrum(const ReducedTensor& t) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(geminal_matrix(t).k, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

pipeline::ExperimentReport run(const Settings& s, const std::string& name, const fs::path& out,
                               const fs::path& cache) {
    auto spec = pipeline::experiment_preset(name, s.scale);
    spec.cache_dir = cache;
    spec.out_dir = out;
    spec.workers = s.workers;
    return pipeline::run_experiment(spec);
}

pipeline::ExperimentReport run(const Settings& s, const std::string& name) {
    return run(s, name, s.out / name, s.cache);
}

// 1. Rigid-motion and orbital-rotation invariance of the sorted spectrum.
Outcome invariance(const Settings&) {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    double worst_motion = 0.0, worst_rotation = 0.0;
    int motions = 0, rotations = 0;
    const auto geoms = testing::sample_geometries();
    for (const auto& g : geoms) {
        const auto ints = ortho(g);
        const auto t = reduced_tensor(ints);
        const auto ref = describe(ints).eigenvalues;
        for (int k = 0; k < 20; ++k, ++motions) {
            const auto moved = testing::rigid_motion(g, testing::random_rotation(rng), {u(rng), u(rng), u(rng)});
            worst_motion = std::max(worst_motion, testing::max_abs_diff(describe(ortho(moved)).eigenvalues, ref));
        }
        for (int k = 0; k < 20; ++k, ++rotations) {
            const auto rotated = testing::rotate(t, testing::spin_preserving_rotation(ints.n_spatial, rng));
            worst_rotation = std::max(worst_rotation, testing::max_abs_diff(spectrum(rotated), ref));
        }
    }
    return {worst_motion < 1e-8 && worst_rotation < 1e-8,
            fmt("%zu geometries, %d rigid motions max dev %.2e, %d spin-preserving rotations max dev %.2e (tol 1e-8)",
                geoms.size(), motions, worst_motion, rotations, worst_rotation)};
}

// 2. Reduced-tensor contraction with the FCI 2-RDM and the N = 2 calibration.
Outcome embedding(const Settings&) {
    double worst_energy = 0.0, worst_matrix = 0.0, worst_lowest = 0.0;
    int n_h2 = 0, n_h4 = 0;
    auto contraction_error = [](const IntegralSet& ints) {
        const auto res = ground_state(ints, true);
        const auto gamma = rdm2(res, ints);
        const auto k = reduced_tensor(ints);
        double e = 0.0;
        for (std::size_t x = 0; x < k.k.data().size(); ++x) e += k.k.data()[x] * gamma.data()[x];
        return std::abs(e - res.energy_electronic);
    };
    for (const auto& g : generate_default(2)) {
        const auto ints = ortho(g);
        worst_energy = std::max(worst_energy, contraction_error(ints));
        // K against the two-electron FCI matrix, element by element.
        const auto gm = geminal_matrix(reduced_tensor(ints));
        const int m = ints.n_spatial;
        auto det = [m](std::pair<int, int> pq) {
            Determinant d;
            for (int x : {pq.first, pq.second}) (x < m ? d.alpha : d.beta) |= std::uint64_t{1} << (x % m);
            return d;
        };
        for (std::size_t a = 0; a < gm.pairs.size(); ++a)
            for (std::size_t b = 0; b < gm.pairs.size(); ++b) {
                const auto da = det(gm.pairs[a]), db = det(gm.pairs[b]);
                const double h = std::popcount(da.alpha) == std::popcount(db.alpha) ? slater_condon(da, db, ints) : 0.0;
                worst_matrix = std::max(worst_matrix, std::abs(gm.k(a, b) - h));
            }
        const auto d = describe(ints);
        worst_lowest = std::max(worst_lowest, std::abs(d.eigenvalues.front() - ground_state(ints).energy_electronic));
        ++n_h2;
    }
    std::mt19937_64 rng(202);
    std::vector<Geometry> h4;
    for (const auto& fam : families_for(4))
        for (const auto& g : generate(4, fam, default_grid(4, fam))) h4.push_back(g);
    std::shuffle(h4.begin(), h4.end(), rng);
    for (int i = 0; i < 24; ++i, ++n_h4) worst_energy = std::max(worst_energy, contraction_error(ortho(h4[i])));
    return {worst_energy < 1e-8 && worst_matrix < 1e-10 && worst_lowest < 1e-9,
            fmt("sum k*Gamma vs E_el on %d H2 + %d H4: %.2e (tol 1e-8); K vs FCI matrix: %.2e (tol 1e-10); "
                "lowest eigenvalue vs E_el: %.2e (tol 1e-9)",
                n_h2, n_h4, worst_energy, worst_matrix, worst_lowest)};
}

// 3. Size consistency of FCI over direct sums, and the H2 atom limit.
Outcome size_consistency(const Settings&) {
    std::mt19937_64 rng(303);
    std::vector<IntegralSet> h2, h4;
    for (const auto& g : generate_default(2)) h2.push_back(ortho(g));
    std::vector<Geometry> h4g;
    for (const auto& fam : families_for(4))
        for (const auto& g : generate(4, fam, default_grid(4, fam))) h4g.push_back(g);
    std::shuffle(h4g.begin(), h4g.end(), rng);
    for (int i = 0; i < 20; ++i) h4.push_back(ortho(h4g[i]));

    double worst = 0.0;
    int instances = 0;
    auto pick = [&](const std::vector<IntegralSet>& v) -> const IntegralSet& {
        return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
    };
    auto check = [&](const IntegralSet& a, const IntegralSet& b) {
        const IntegralSet parts[] = {a, b};
        const double sum = ground_state(a).energy_total + ground_state(b).energy_total;
        worst = std::max(worst, std::abs(ground_state(compose_fragments(parts)).energy_total - sum));
        ++instances;
    };
    for (int i = 0; i < 10; ++i) check(pick(h2), pick(h2));
    for (int i = 0; i < 10; ++i) check(pick(h4), pick(h2));
    for (int i = 0; i < 10; ++i) check(pick(h4), pick(h4));
    const double atoms = std::abs(ground_state(ortho(testing::h2(8.0))).energy_total - 2.0 * oracle::h_atom);
    return {worst < 1e-8 && atoms < 1e-6,
            fmt("%d composites (H2+H2, H4+H2, H4+H4) max |E - sum| %.2e (tol 1e-8); H2 at 8 A vs 2 E(H): %.2e (tol 1e-6)",
                instances, worst, atoms)};
}

// 4. Dense vs iterative FCI, and the H2 oracle.
Outcome solvers(const Settings&) {
    FciOptions dense, iter;
    dense.force_solver = FciSolver::dense;
    iter.force_solver = FciSolver::iterative;
    std::string detail;
    bool pass = true;
    const Geometry h6 = testing::sample_geometries().at(7);
    const Geometry h8 = generate(8, "octagon_twist", default_grid(8, "octagon_twist")).at(23);
    for (const auto& g : {h6, h8}) {
        const auto ints = ortho(g);
        const auto a = ground_state(ints, false, dense);
        const auto b = ground_state(ints, false, iter);
        const double d = std::abs(a.energy_total - b.energy_total);
        pass = pass && d < 1e-9;
        detail += fmt("H%d dim %zu |dense - iterative| %.2e; ", static_cast<int>(g.size()), a.dimension, d);
    }
    const auto ao = build_integrals(testing::h2(oracle::h2_eq_r));
    const auto scf = rhf(ao);
    const double d_rhf = std::abs(scf.energy_total - oracle::h2_eq_rhf);
    const double d_mp2 = std::abs(mp2(ao, scf) - oracle::h2_eq_mp2);
    const double d_fci = std::abs(ground_state(orthonormalize(ao)).energy_total - oracle::h2_eq_fci);
    pass = pass && d_rhf < 1e-6 && d_mp2 < 1e-6 && d_fci < 1e-6;
    detail += fmt("H2 vs PySCF: RHF %.1e MP2 %.1e FCI %.1e (tol 1e-6)", d_rhf, d_mp2, d_fci);
    return {pass, detail};
}

// 5. Table 1 MLPs on H4 and H6 with the HF baseline.
Outcome table1(const Settings& s) {
    const auto m = run(s, "table1").metrics;
    const double h4 = m.at("table1.h4.nn_mae"), h6 = m.at("table1.h6.nn_mae");
    const double hf4 = m.at("table1.h4.hf_mae"), hf6 = m.at("table1.h6.hf_mae");
    const bool pass = h4 < 0.01 && h6 < 0.01 && std::abs(hf4 - 0.589) <= 0.15 && std::abs(hf6 - 0.582) <= 0.15;
    return {pass, fmt("NN test MAE H4 %.4f H6 %.4f (< 0.01; paper 0.0022/0.0024); HF MAE H4 %.3f H6 %.3f "
                      "(0.589/0.582 +- 0.15)",
                      h4, h6, hf4, hf6)};
}

// 6. Learning curve on the fine H6 grid.
Outcome learning_curve(const Settings& s) {
    const auto m = run(s, "learning_curve").metrics;
    const auto spec = pipeline::experiment_preset("learning_curve", s.scale);
    std::string curve;
    double last = NAN;
    for (int size : spec.curve_sizes) {
        const auto it = m.find("learning_curve.mae_" + std::to_string(size));
        if (it == m.end()) continue;
        curve += fmt("%d:%.4f ", size, it->second);
        last = it->second;
    }
    const double n = m.at("learning_curve.n_structures");
    const auto at = [&](int size) {
        const auto it = m.find("learning_curve.mae_" + std::to_string(size));
        return it == m.end() ? NAN : it->second;
    };
    const double small = at(200), mid = at(1500);
    const bool trend = small > mid;
    const bool accurate = last < 0.0016;
    const bool desk = n >= 5000;
    const std::string verdict = accurate ? "chemical accuracy reached" : "scale-limited, measured curve reported";
    return {trend && desk, fmt("%.0f structures; MAE(200) %.4f > MAE(1500) %.4f: %s; largest size %.4f vs 0.0016: %s; "
                               "curve %s",
                               n, small, mid, trend ? "yes" : "no", last, verdict.c_str(), curve.c_str())};
}

// 7. H6 transfer to the linear chain.
Outcome h6_transfer(const Settings& s) {
    const auto m = run(s, "h6_transfer").metrics;
    const double mae = m.at("h6_transfer.nn_mae"), stretched = m.at("h6_transfer.max_err_r_ge_5");
    return {mae <= 0.10 && stretched < 0.02,
            fmt("chain MAE %.4f (<= 0.10; paper 0.053); max error at r >= 5 A %.4f (< 0.02); HF %.3f MP2 %.3f", mae,
                stretched, m.at("h6_transfer.hf_mae"), m.at("h6_transfer.mp2_mae"))};
}

// 8. H10 pretraining on composites, first-layer fine-tuning on the chain.
Outcome h10_pipeline(const Settings& s) {
    const auto m = run(s, "h10_pipeline").metrics;
    const double nn = m.at("h10_pipeline.nn_mae"), pre = m.at("h10_pipeline.pretrained_only_mae");
    const double hf = m.at("h10_pipeline.hf_mae"), mp2 = m.at("h10_pipeline.mp2_mae");
    const double composites = m.at("h10_pipeline.composites");
    const bool pass = nn < 0.05 && nn < hf && nn < mp2 && nn < 1.6267 && nn < 0.3615 && nn < pre &&
                      composites >= 100000 && m.at("h10_pipeline.n_finetune") == 25;
    return {pass, fmt("%.0f composites, %.0f fine-tune / %.0f eval points; NN MAE %.4f (< 0.05; paper 0.0102), "
                      "pretrained only %.4f, HF %.4f, MP2 %.4f (paper HF 1.6267 MP2 0.3615)",
                      composites, m.at("h10_pipeline.n_finetune"), m.at("h10_pipeline.n_eval"), nn, pre, hf, mp2)};
}

// 9. Set-model structural properties and the H8 chain.
Outcome h8_setmodel(const Settings& s) {
    const fs::path out = s.out / "h8_setmodel";
    const auto m = run(s, "h8_setmodel").metrics;
    const auto p = ml::load_params(out / "h8_setmodel.params.json");

    // Inputs: the evaluation chain plus random spectra of the trained sizes.
    std::vector<std::pair<std::vector<double>, double>> inputs;
    for (const auto& g : gen_chain(8, {0.5, 8.0, 76})) {
        const auto d = describe(ortho(g), true);
        inputs.emplace_back(d.eigenvalues, e_infinity(d) + d.e_nuclear);
    }
    std::mt19937_64 rng(909);
    for (int width : {28, 66, 120})
        for (const auto& sample : testing::synthetic_samples(30, width, rng()))
            inputs.emplace_back(sample.features, sample.e_infinity);
    double perm = 0.0, omega_lo = 1.0, omega_hi = 0.0, convex = 0.0;
    for (auto& [tokens, einf] : inputs) {
        const auto ref = ml::set_model_forward(p, tokens, einf);
        omega_lo = std::min(omega_lo, ref.omega);
        omega_hi = std::max(omega_hi, ref.omega);
        const double lo = std::min(ref.e_corr, einf), hi = std::max(ref.e_corr, einf);
        convex = std::max({convex, lo - ref.e_total, ref.e_total - hi});
        for (int k = 0; k < 3; ++k) {
            std::shuffle(tokens.begin(), tokens.end(), rng);
            const auto o = ml::set_model_forward(p, tokens, einf);
            perm = std::max({perm, std::abs(o.e_total - ref.e_total), std::abs(o.omega - ref.omega),
                             std::abs(o.e_corr - ref.e_corr)});
        }
    }
    const double nn = m.at("h8_setmodel.nn_mae"), plateau = m.at("h8_setmodel.max_err_r_ge_6");
    const bool props = perm <= 1e-12 && omega_lo > 0.0 && omega_hi < 1.0 && convex <= 1e-12;
    return {props && nn <= 0.15 && plateau < 0.05,
            fmt("permutation dev %.1e (tol 1e-12); omega in [%.4f, %.4f]; convexity violation %.1e on %zu inputs; "
                "H8 chain MAE %.4f (<= 0.15; paper 0.097); plateau error r >= 6 A %.4f (< 0.05); HF %.3f MP2 %.3f",
                perm, omega_lo, omega_hi, std::max(convex, 0.0), inputs.size(), nn, plateau,
                m.at("h8_setmodel.hf_mae"), m.at("h8_setmodel.mp2_mae"))};
}

// 10. Analytic vs finite-difference gradients for both model classes.
Outcome gradients(const Settings&) {
    auto mlp = ml::init_params(ml::MlpSpec{28, {100, 50, 1}, {ml::Activation::relu, ml::Activation::sigmoid,
                                                              ml::Activation::linear}},
                               5);
    const auto mlp_data = testing::synthetic_samples(16, 28, 1);
    ml::fit_input_standardization(mlp, mlp_data);
    auto set = ml::init_params(ml::SetModelSpec{}, 6);
    const auto set_data = testing::synthetic_samples(6, 28, 2);
    ml::fit_input_standardization(set, set_data);
    const auto a = testing::finite_difference_check(mlp, mlp_data, 150, 11);
    const auto b = testing::finite_difference_check(set, set_data, 150, 12);
    return {a.checked >= 100 && b.checked >= 100 && a.worst_relative < 1e-5 && b.worst_relative < 1e-5,
            fmt("MLP %d parameters max rel err %.2e; set model %d parameters max rel err %.2e (step 1e-5, tol 1e-5)",
                a.checked, a.worst_relative, b.checked, b.worst_relative)};
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.path().extension() != ".csv") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), dir).string()] = ss.str();
    }
    return out;
}

// 11. Every experiment twice from empty caches, CSV reports byte-compared.
Outcome reproducibility(const Settings& s) {
    const fs::path root = s.out / "reproducibility";
    fs::remove_all(root);
    std::size_t files = 0;
    std::string mismatched;
    for (const auto& name : pipeline::experiment_names()) {
        for (const char* run_id : {"a", "b"}) {
            const fs::path dir = root / run_id;
            run(s, name, dir / "report" / name, dir / "cache");
        }
        const auto a = csv_files(root / "a" / "report" / name);
        const auto b = csv_files(root / "b" / "report" / name);
        files += a.size();
        if (a != b) mismatched += name + " ";
        std::printf("  %s: %zu CSV files, %s\n", name.c_str(), a.size(), a == b ? "identical" : "DIFFERENT");
        std::fflush(stdout);
    }
    return {mismatched.empty() && files > 0,
            fmt("%zu CSV files across %zu experiments at '%s' scale, rerun from empty caches with the same seeds: %s",
                files, pipeline::experiment_names().size(), s.scale.c_str(),
                mismatched.empty() ? "all byte-identical" : ("mismatch in " + mismatched).c_str())};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geminet acceptance criteria"};
    int only = 0;
    Settings s;
    std::string reproducibility_scale = "quick";
    s.cache = "acceptance_cache";
    s.out = "acceptance_report";
    app.add_option("--criterion", only, "run one criterion (1-11); all when omitted")->check(CLI::Range(1, 11));
    app.add_option("--scale", s.scale, "experiment preset for criteria 5-9")->check(CLI::IsMember({"desk", "quick"}));
    app.add_option("--repro-scale", reproducibility_scale, "experiment preset for criterion 11")
        ->check(CLI::IsMember({"desk", "quick"}));
    app.add_option("--cache", s.cache, "label cache shared by the experiment criteria");
    app.add_option("--out", s.out, "report directory");
    app.add_option("--workers", s.workers, "worker threads (0 = all cores)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome(const Settings&)>>> criteria = {
        {"invariance of the eigenvalue descriptor", invariance},
        {"reduced Hamiltonian embedding", embedding},
        {"size consistency", size_consistency},
        {"solver cross-validation", solvers},
        {"Table 1 reproduction", table1},
        {"learning curve", learning_curve},
        {"H6 transfer", h6_transfer},
        {"H10 pipeline", h10_pipeline},
        {"set model and H8 chain", h8_setmodel},
        {"gradient correctness", gradients},
        {"reproducibility", reproducibility},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (only != 0 && only != id) continue;
        Settings local = s;
        if (id == 11) local.scale = reproducibility_scale;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second(local);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (id >= 5 && id <= 9) o.detail += "; " + local.scale + " preset";
        std::printf("criterion %d %s: %s: %s [%.0f s]\n", id, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
