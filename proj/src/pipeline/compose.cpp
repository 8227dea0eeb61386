#include "geminet/pipeline/compose.hpp"

#include <cstdio>
#include <random>
#include <sstream>
#include <unordered_map>

#include "geminet/descriptor.hpp"
#include "geminet/error.hpp"
#include "geminet/pipeline/label.hpp"

namespace geminet::pipeline {

FragmentPool make_pool(const std::vector<Record>& records, const IntegralCache& integrals) {
    std::unordered_map<std::string, const IntegralSet*> by_id;
    for (const auto& [id, ints] : integrals) by_id[id] = &ints;
    FragmentPool pool;
    for (const auto& r : records) {
        auto it = by_id.find(r.id);
        if (it == by_id.end()) continue;
        if (!it->second->orthonormal) throw DataError("cached integrals for " + r.id + " are not orthonormal");
        pool[it->second->n_spatial].push_back({r.id, *it->second, r.target_total, r.target_electronic});
    }
    return pool;
}

std::vector<Partition> parse_partitions(const std::string& text) {
    std::vector<Partition> out;
    std::stringstream outer(text);
    std::string item;
    while (std::getline(outer, item, ',')) {
        Partition p;
        std::stringstream inner(item);
        std::string part;
        while (std::getline(inner, part, '+')) {
            try {
                std::size_t used = 0;
                const int n = std::stoi(part, &used);
                if (used != part.size() || n <= 0 || n % 2 != 0) throw InputError("");
                p.push_back(n);
            } catch (const std::exception&) {
                throw InputError("bad partition component '" + part + "' in '" + text + "'");
            }
        }
        if (p.size() < 2) throw InputError("a partition needs at least two fragments: '" + item + "'");
        out.push_back(std::move(p));
    }
    if (out.empty()) throw InputError("no partitions given");
    return out;
}

std::string format_partition(const Partition& p) {
    std::string s;
    for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "+" : "") + std::to_string(p[i]);
    return s;
}

std::vector<Record> compose(const FragmentPool& pool, const ComposeOptions& opt) {
    if (opt.partitions.empty()) throw InputError("no partitions given");
    for (const auto& part : opt.partitions) {
        for (int n : part) {
            auto it = pool.find(n);
            if (it == pool.end() || it->second.empty()) {
                throw DataError("empty fragment pool for h" + std::to_string(n) + " (partition " +
                                format_partition(part) + ")");
            }
        }
    }

    const long count = static_cast<long>(opt.count);
    std::vector<Record> out(opt.count);
    const int workers = resolve_workers(opt.workers);
    std::vector<std::string> errors(opt.count);

#pragma omp parallel for schedule(dynamic, 64) num_threads(workers)
    for (long k = 0; k < count; ++k) {
        try {
            const Partition& part = opt.partitions[static_cast<std::size_t>(k) % opt.partitions.size()];
            std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                              static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(static_cast<std::uint64_t>(k) >> 32)};
            std::mt19937_64 rng(seq);
            std::vector<IntegralSet> parts;
            Record& r = out[k];
            for (int n : part) {
                const auto& frags = pool.at(n);
                std::uniform_int_distribution<std::size_t> pick(0, frags.size() - 1);
                const Fragment& f = frags[pick(rng)];
                parts.push_back(f.integrals);
                r.sources.push_back(f.id);
                r.target_total += f.target_total;
                r.target_electronic += f.target_electronic;
            }
            const IntegralSet comp = compose_fragments(parts);
            const DescriptorVector d = describe(comp, true);
            char buf[24];
            std::snprintf(buf, sizeof buf, "comp_%08ld", k);
            r.id = buf;
            r.family_tag = "composite_" + format_partition(part);
            r.n_electrons = comp.n_electrons;
            r.features = d.eigenvalues;
            r.e_infinity = e_infinity(d);
            r.e_nuclear = comp.e_nuclear;
            r.provenance = "composite";
        } catch (const std::exception& e) {
            errors[k] = e.what();
        }
    }
    for (long k = 0; k < count; ++k)
        if (!errors[k].empty()) throw SolverError("composite " + std::to_string(k) + ": " + errors[k]);
    return out;
}

IntegralSet composite_integrals(const FragmentPool& pool, const Record& composite) {
    std::vector<IntegralSet> parts;
    for (const auto& id : composite.sources) {
        const IntegralSet* found = nullptr;
        for (const auto& [n, frags] : pool) {
            for (const auto& f : frags)
                if (f.id == id) found = &f.integrals;
        }
        if (!found) throw DataError("fragment " + id + " not in pool");
        parts.push_back(*found);
    }
    return compose_fragments(parts);
}

}  // namespace geminet::pipeline
