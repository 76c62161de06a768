#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mega/graph.hpp"

namespace mega {

enum class PartitionMethod { BfsGreedy, Import };

struct PartitionPlan {
    std::vector<int32_t> sub_of;                 // per-node subgraph ID
    int32_t sub_num = 0;
    // Per-subgraph ascending, deduplicated external source node IDs needed
    // via cross-subgraph edges.
    std::vector<std::vector<int32_t>> eid_lists;
};

struct CondenseLayout {
    std::vector<int64_t> region_base;            // per-subgraph byte base
    std::vector<std::vector<int32_t>> order;     // append order per region
    std::vector<int32_t> node_bytes;
};

PartitionPlan partition_graph(const Graph& g, int32_t k, PartitionMethod method,
                              const std::string& import_path = "");

// Recomputes eid_lists for an explicit assignment (import path core).
PartitionPlan plan_from_assignment(const Graph& g, std::vector<int32_t> sub_of);

// Algorithm: walk the ascending production order; whenever a produced node ID
// matches the head of a subgraph's eID FIFO (scanned in ascending subgraph
// order), pop it and append the node to that subgraph's sparse region.
CondenseLayout condense_schedule(const PartitionPlan& plan,
                                 const std::vector<int32_t>& production_order,
                                 const std::vector<int32_t>& node_bytes);

// Distinct DRAM blocks touched per subgraph when reading its sparse-connection
// sources. Without a layout, nodes sit at their ascending-ID addresses; with a
// layout, each condensed region starts at a granularity-aligned address.
std::vector<int64_t> sparse_access_count(const PartitionPlan& plan,
                                         const CondenseLayout* layout,
                                         int64_t dram_granularity,
                                         const std::vector<int32_t>& node_bytes);

void write_partition(const std::string& path, const PartitionPlan& plan);
std::vector<int32_t> read_partition(const std::string& path);

void write_layout_csv(const std::string& path, const CondenseLayout& layout);

} // namespace mega
