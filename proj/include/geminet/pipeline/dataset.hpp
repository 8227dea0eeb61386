#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geminet/ml/model.hpp"

namespace geminet::pipeline {

inline constexpr const char* code_version = "geminet 1.0.0";

/// One labeled system. Composite records list their fragment ids in
/// `sources`; the baseline fields are filled only for real geometries.
struct Record {
    std::string id;
    std::string family_tag;
    std::map<std::string, double> params;
    int n_electrons = 0;
    std::vector<double> features;
    double e_infinity = 0.0;
    double e_nuclear = 0.0;
    double target_total = 0.0;
    double target_electronic = 0.0;
    std::string provenance = "fci_label";  // or "composite"
    std::vector<std::string> sources;
    std::optional<double> e_hf;
    std::optional<double> e_mp2;
    std::optional<bool> hf_converged;
};

/// First line of every dataset file.
struct Manifest {
    std::string kind;  // "label" or "compose"
    std::uint64_t seed = 0;
    nlohmann::json config;  // everything that determines the records
    std::string code = code_version;

    /// FNV-1a of the canonical (sorted-key) config dump, as 16 hex digits.
    std::string config_hash() const;
};

struct DatasetFile {
    Manifest manifest;
    std::vector<Record> records;
};

nlohmann::json record_to_json(const Record& r);
Record record_from_json(const nlohmann::json& j);

/// JSON lines: manifest header then one record per line, records sorted by id.
void write_dataset(const std::filesystem::path& path, const DatasetFile& d);

/// Throws ParseError with the line number for malformed lines, and
/// DataError when the stored config hash does not match the config.
DatasetFile read_dataset(const std::filesystem::path& path);

/// Records as ML samples: features, N, total-energy target, and
/// E_inf + E_nuc as the gate anchor so both sides of the gate are totals.
std::vector<ml::Sample> to_samples(const std::vector<Record>& records);

std::string fnv1a_hex(const std::string& text);

}  // namespace geminet::pipeline
