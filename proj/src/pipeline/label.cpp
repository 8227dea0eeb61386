#include "geminet/pipeline/label.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "geminet/descriptor.hpp"
#include "geminet/error.hpp"
#include "geminet/mf.hpp"
#include "geminet/parallel.hpp"

namespace geminet::pipeline {

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("GEMINET_WORKERS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return max_threads();
}

Record label_geometry(const Geometry& g, const std::string& id, const LabelOptions& opt,
                      IntegralSet* orthonormal_out) {
    g.validate(true);
    const IntegralSet ao = build_integrals(g, Exec::serial);
    IntegralSet on = orthonormalize(ao);
    FciOptions fopt = opt.fci;
    fopt.exec = Exec::serial;
    const FciResult fci = ground_state(on, false, fopt);
    const DescriptorVector d = describe(on, true);

    Record r;
    r.id = id;
    r.family_tag = g.family_tag;
    r.params = g.params;
    r.n_electrons = on.n_electrons;
    r.features = d.eigenvalues;
    r.e_infinity = e_infinity(d);
    r.e_nuclear = on.e_nuclear;
    r.target_electronic = fci.energy_electronic;
    r.target_total = fci.energy_total;
    r.provenance = "fci_label";

    if (opt.baselines) {
        const ScfResult scf = rhf(ao);
        r.hf_converged = scf.converged;
        r.e_hf = scf.energy_total;
        if (scf.converged) {
            try {
                r.e_mp2 = mp2(ao, scf);
            } catch (const SolverError&) {
                // degenerate gap: MP2 left out of this record
            }
        }
    }
    if (orthonormal_out) *orthonormal_out = std::move(on);
    return r;
}

LabelOutcome label_all(const std::vector<LabeledGeometry>& inputs, const LabelOptions& opt) {
    const long n = static_cast<long>(inputs.size());
    std::vector<std::optional<Record>> recs(inputs.size());
    std::vector<IntegralSet> ints(opt.keep_integrals ? inputs.size() : 0);
    std::vector<std::string> errors(inputs.size());
    const int workers = resolve_workers(opt.workers);

#pragma omp parallel for schedule(dynamic) num_threads(workers)
    for (long i = 0; i < n; ++i) {
        try {
            recs[i] = label_geometry(inputs[i].geometry, inputs[i].id, opt, opt.keep_integrals ? &ints[i] : nullptr);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return inputs[a].id < inputs[b].id; });
    LabelOutcome out;
    for (auto i : order) {
        if (!recs[i]) {
            out.failures.emplace_back(inputs[i].id, errors[i]);
            continue;
        }
        if (recs[i]->hf_converged && !*recs[i]->hf_converged) ++out.hf_unconverged;
        out.records.push_back(std::move(*recs[i]));
        if (opt.keep_integrals) out.integrals.emplace_back(inputs[i].id, std::move(ints[i]));
    }
    return out;
}

std::vector<LabeledGeometry> with_ids(const std::vector<Geometry>& geoms) {
    std::vector<LabeledGeometry> out;
    out.reserve(geoms.size());
    std::map<std::string, int> counters;
    for (const auto& g : geoms) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "_%05d", counters[g.family_tag]++);
        out.push_back({g.family_tag + buf, g});
    }
    return out;
}

std::vector<LabeledGeometry> read_geometry_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".xyz") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<LabeledGeometry> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back({f.stem().string(), read_xyz(f)});
    return out;
}

void write_geometry_dir(const std::filesystem::path& dir, const std::vector<LabeledGeometry>& geoms) {
    std::filesystem::create_directories(dir);
    for (const auto& g : geoms) write_xyz(g.geometry, dir / (g.id + ".xyz"));
}

}  // namespace geminet::pipeline
