#include "geminet/pipeline/dataset.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>

#include "geminet/error.hpp"

namespace geminet::pipeline {

using nlohmann::json;

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string Manifest::config_hash() const { return fnv1a_hex(config.dump()); }

json record_to_json(const Record& r) {
    json j = {{"id", r.id},
              {"family_tag", r.family_tag},
              {"params", r.params},
              {"n_electrons", r.n_electrons},
              {"features", r.features},
              {"e_infinity", r.e_infinity},
              {"e_nuclear", r.e_nuclear},
              {"target_total", r.target_total},
              {"target_electronic", r.target_electronic},
              {"provenance", r.provenance}};
    if (!r.sources.empty()) j["sources"] = r.sources;
    if (r.e_hf) j["e_hf"] = *r.e_hf;
    if (r.e_mp2) j["e_mp2"] = *r.e_mp2;
    if (r.hf_converged) j["hf_converged"] = *r.hf_converged;
    return j;
}

Record record_from_json(const json& j) {
    Record r;
    r.id = j.at("id").get<std::string>();
    r.family_tag = j.at("family_tag").get<std::string>();
    r.params = j.at("params").get<std::map<std::string, double>>();
    r.n_electrons = j.at("n_electrons").get<int>();
    r.features = j.at("features").get<std::vector<double>>();
    r.e_infinity = j.at("e_infinity").get<double>();
    r.e_nuclear = j.at("e_nuclear").get<double>();
    r.target_total = j.at("target_total").get<double>();
    r.target_electronic = j.at("target_electronic").get<double>();
    r.provenance = j.at("provenance").get<std::string>();
    if (r.provenance != "fci_label" && r.provenance != "composite") {
        throw DataError("unknown provenance '" + r.provenance + "'");
    }
    if (j.contains("sources")) r.sources = j["sources"].get<std::vector<std::string>>();
    if (j.contains("e_hf")) r.e_hf = j["e_hf"].get<double>();
    if (j.contains("e_mp2")) r.e_mp2 = j["e_mp2"].get<double>();
    if (j.contains("hf_converged")) r.hf_converged = j["hf_converged"].get<bool>();
    return r;
}

void write_dataset(const std::filesystem::path& path, const DatasetFile& d) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::vector<const Record*> sorted;
    sorted.reserve(d.records.size());
    for (const auto& r : d.records) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const Record* a, const Record* b) { return a->id < b->id; });

    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot write " + path.string());
        json head = {{"manifest", true},
                     {"kind", d.manifest.kind},
                     {"seed", d.manifest.seed},
                     {"code_version", d.manifest.code},
                     {"config", d.manifest.config},
                     {"config_hash", d.manifest.config_hash()},
                     {"records", d.records.size()}};
        out << head.dump() << '\n';
        for (const Record* r : sorted) out << record_to_json(*r).dump() << '\n';
        if (!out) throw DataError("write failed for " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

DatasetFile read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    DatasetFile d;
    std::string line;
    std::size_t lineno = 0;
    std::size_t expected = 0;
    bool have_manifest = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path.string(), lineno, std::string("invalid JSON: ") + e.what());
        }
        try {
            if (!have_manifest) {
                if (!j.value("manifest", false)) throw ParseError(path.string(), lineno, "missing manifest header");
                d.manifest.kind = j.at("kind").get<std::string>();
                d.manifest.seed = j.at("seed").get<std::uint64_t>();
                d.manifest.code = j.at("code_version").get<std::string>();
                d.manifest.config = j.at("config");
                expected = j.at("records").get<std::size_t>();
                if (j.at("config_hash").get<std::string>() != d.manifest.config_hash()) {
                    throw DataError(path.string() + ": manifest config hash does not match its config");
                }
                have_manifest = true;
                continue;
            }
            d.records.push_back(record_from_json(j));
        } catch (const json::exception& e) {
            throw ParseError(path.string(), lineno, e.what());
        } catch (const ParseError&) {
            throw;
        } catch (const DataError& e) {
            throw ParseError(path.string(), lineno, e.what());
        }
    }
    if (!have_manifest) throw DataError(path.string() + ": empty dataset file");
    if (d.records.size() != expected) {
        throw DataError(path.string() + ": manifest announces " + std::to_string(expected) + " records, found " +
                        std::to_string(d.records.size()));
    }
    return d;
}

std::vector<ml::Sample> to_samples(const std::vector<Record>& records) {
    std::vector<ml::Sample> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        ml::Sample s;
        s.features = r.features;
        s.n_electrons = r.n_electrons;
        // Targets are total energies, so the gate's anchor carries the same
        // nuclear repulsion; the record keeps the electronic estimate.
        s.e_infinity = r.e_infinity + r.e_nuclear;
        s.target = r.target_total;
        s.provenance = r.provenance == "composite" ? ml::Provenance::composite : ml::Provenance::fci_label;
        s.source_ids = r.sources.empty() ? std::vector<std::string>{r.id} : r.sources;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace geminet::pipeline
