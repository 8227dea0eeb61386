#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "geminet/integrals.hpp"
#include "geminet/pipeline/dataset.hpp"

namespace geminet::pipeline {

/// Labeled fragment with its Löwdin-basis integrals.
struct Fragment {
    std::string id;
    IntegralSet integrals;
    double target_total = 0.0;
    double target_electronic = 0.0;
};

/// Fragments keyed by atom count.
using FragmentPool = std::map<int, std::vector<Fragment>>;

/// Joins labeled records with their cached integrals by id. Records with no
/// cached integrals are skipped.
FragmentPool make_pool(const std::vector<Record>& records, const IntegralCache& integrals);

/// Fragment atom counts, e.g. {8, 2} or {6, 2, 2}.
using Partition = std::vector<int>;

/// "8+2,6+4,6+2+2" style lists.
std::vector<Partition> parse_partitions(const std::string& text);
std::string format_partition(const Partition& p);

struct ComposeOptions {
    std::vector<Partition> partitions;
    std::size_t count = 100000;
    std::uint64_t seed = 0;
    int workers = 0;
};

/// Composite records: record k uses partition k mod P (equal weighting) and
/// fragments drawn uniformly from the pool with an RNG seeded by (seed, k),
/// so the output does not depend on the worker count. Targets are sums of
/// fragment targets; features come from the direct-sum descriptor.
std::vector<Record> compose(const FragmentPool& pool, const ComposeOptions& opt);

/// Direct-sum integrals for one composite record (looks fragments up by id).
IntegralSet composite_integrals(const FragmentPool& pool, const Record& composite);

}  // namespace geminet::pipeline
