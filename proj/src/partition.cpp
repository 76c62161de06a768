#include "mega/partition.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>
#include <tuple>

#include "mega/errors.hpp"

namespace mega {

PartitionPlan plan_from_assignment(const Graph& g, std::vector<int32_t> sub_of) {
    if (static_cast<int32_t>(sub_of.size()) != g.num_nodes) {
        throw ConfigError("partition assignment node count mismatch: " +
                          std::to_string(sub_of.size()) + " vs " +
                          std::to_string(g.num_nodes));
    }
    PartitionPlan plan;
    plan.sub_num = 0;
    for (int32_t s : sub_of) {
        if (s < 0) throw ConfigError("negative subgraph ID in assignment");
        plan.sub_num = std::max(plan.sub_num, s + 1);
    }
    plan.sub_of = std::move(sub_of);
    plan.eid_lists.assign(plan.sub_num, {});
    for (const auto& [src, dst] : g.raw_edges) {
        if (plan.sub_of[src] != plan.sub_of[dst]) {
            plan.eid_lists[plan.sub_of[dst]].push_back(src);
        }
    }
    for (auto& lst : plan.eid_lists) {
        std::sort(lst.begin(), lst.end());
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }
    return plan;
}

namespace {

// Deterministic balanced partitioner: parts grow from degree-sorted seeds,
// each step claiming the unassigned node most connected to the part,
// capped so part sizes differ by at most one.
std::vector<int32_t> bfs_greedy_assign(const Graph& g, int32_t k) {
    const int32_t n = g.num_nodes;
    std::vector<std::vector<int32_t>> und(n);
    for (const auto& [s, d] : g.raw_edges) {
        if (s == d) continue;
        und[s].push_back(d);
        und[d].push_back(s);
    }
    for (auto& lst : und) {
        std::sort(lst.begin(), lst.end());
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }

    std::vector<int32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
        return und[a].size() > und[b].size();
    });

    std::vector<int32_t> cap(k, n / k);
    for (int32_t p = 0; p < n % k; ++p) cap[p]++;

    std::vector<int32_t> assign(n, -1);
    std::vector<int32_t> size(k, 0);
    std::vector<std::vector<int32_t>> gain(k, std::vector<int32_t>(n, 0));
    // Lazy max-heaps of (gain at push, -node) per part.
    std::vector<std::priority_queue<std::pair<int32_t, int32_t>>> heap(k);
    size_t seed_cursor = 0;

    auto claim = [&](int32_t part, int32_t node) {
        assign[node] = part;
        size[part]++;
        for (int32_t nb : und[node]) {
            if (assign[nb] < 0) {
                gain[part][nb]++;
                heap[part].push({gain[part][nb], -nb});
            }
        }
    };

    int32_t assigned = 0;
    while (assigned < n) {
        bool progressed = false;
        for (int32_t p = 0; p < k && assigned < n; ++p) {
            if (size[p] >= cap[p]) continue;
            int32_t pick = -1;
            while (!heap[p].empty()) {
                auto [gv, negid] = heap[p].top();
                int32_t node = -negid;
                heap[p].pop();
                if (assign[node] >= 0 || gv != gain[p][node]) continue;  // stale
                pick = node;
                break;
            }
            if (pick < 0) {
                while (seed_cursor < order.size() && assign[order[seed_cursor]] >= 0) {
                    ++seed_cursor;
                }
                if (seed_cursor < order.size()) pick = order[seed_cursor];
            }
            if (pick >= 0) {
                claim(p, pick);
                ++assigned;
                progressed = true;
            }
        }
        if (!progressed) break;  // all caps filled
    }
    return assign;
}

} // namespace

PartitionPlan partition_graph(const Graph& g, int32_t k, PartitionMethod method,
                              const std::string& import_path) {
    if (k < 1 || k > g.num_nodes) {
        throw ConfigError("subgraph count must be in [1, N]");
    }
    if (method == PartitionMethod::Import) {
        std::vector<int32_t> sub_of = read_partition(import_path);
        return plan_from_assignment(g, std::move(sub_of));
    }
    return plan_from_assignment(g, bfs_greedy_assign(g, k));
}

CondenseLayout condense_schedule(const PartitionPlan& plan,
                                 const std::vector<int32_t>& production_order,
                                 const std::vector<int32_t>& node_bytes) {
    for (const auto& lst : plan.eid_lists) {
        if (!std::is_sorted(lst.begin(), lst.end())) {
            throw ScheduleError("eID lists must be ascending");
        }
    }
    CondenseLayout layout;
    layout.node_bytes = node_bytes;
    layout.order.assign(plan.sub_num, {});
    std::vector<size_t> head(plan.sub_num, 0);
    for (int32_t nid : production_order) {
        for (int32_t sub = 0; sub < plan.sub_num; ++sub) {
            if (head[sub] < plan.eid_lists[sub].size() &&
                plan.eid_lists[sub][head[sub]] == nid) {
                layout.order[sub].push_back(nid);
                head[sub]++;
            }
        }
    }
    for (int32_t sub = 0; sub < plan.sub_num; ++sub) {
        if (head[sub] != plan.eid_lists[sub].size()) {
            throw ScheduleError("eID " + std::to_string(plan.eid_lists[sub][head[sub]]) +
                                " of subgraph " + std::to_string(sub) +
                                " was never produced");
        }
    }
    layout.region_base.assign(plan.sub_num, 0);
    int64_t base = 0;
    for (int32_t sub = 0; sub < plan.sub_num; ++sub) {
        layout.region_base[sub] = base;
        for (int32_t nid : layout.order[sub]) base += node_bytes[nid];
    }
    return layout;
}

std::vector<int64_t> sparse_access_count(const PartitionPlan& plan,
                                         const CondenseLayout* layout,
                                         int64_t dram_granularity,
                                         const std::vector<int32_t>& node_bytes) {
    if (dram_granularity <= 0) throw ConfigError("DRAM granularity must be positive");
    std::vector<int64_t> counts(plan.sub_num, 0);
    if (layout) {
        // Condensed regions are written back as fresh granularity-aligned
        // bursts, so a region of S bytes spans ceil(S / g) blocks.
        for (int32_t sub = 0; sub < plan.sub_num; ++sub) {
            int64_t bytes = 0;
            for (int32_t nid : layout->order[sub]) bytes += layout->node_bytes[nid];
            counts[sub] = (bytes + dram_granularity - 1) / dram_granularity;
        }
        return counts;
    }
    // Original layout: node i lives at the ascending-ID prefix address.
    std::vector<int64_t> offset(node_bytes.size() + 1, 0);
    for (size_t i = 0; i < node_bytes.size(); ++i) offset[i + 1] = offset[i] + node_bytes[i];
    for (int32_t sub = 0; sub < plan.sub_num; ++sub) {
        std::set<int64_t> blocks;
        for (int32_t nid : plan.eid_lists[sub]) {
            if (node_bytes[nid] <= 0) continue;
            int64_t first = offset[nid] / dram_granularity;
            int64_t last = (offset[nid] + node_bytes[nid] - 1) / dram_granularity;
            for (int64_t blk = first; blk <= last; ++blk) blocks.insert(blk);
        }
        counts[sub] = static_cast<int64_t>(blocks.size());
    }
    return counts;
}

void write_partition(const std::string& path, const PartitionPlan& plan) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    for (int32_t s : plan.sub_of) out << s << "\n";
}

std::vector<int32_t> read_partition(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open partition file: " + path);
    std::vector<int32_t> sub_of;
    int64_t v;
    while (in >> v) sub_of.push_back(static_cast<int32_t>(v));
    return sub_of;
}

void write_layout_csv(const std::string& path, const CondenseLayout& layout) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "subgraph,position,node_id,byte_offset\n";
    for (size_t sub = 0; sub < layout.order.size(); ++sub) {
        int64_t off = layout.region_base[sub];
        for (size_t pos = 0; pos < layout.order[sub].size(); ++pos) {
            int32_t nid = layout.order[sub][pos];
            out << sub << "," << pos << "," << nid << "," << off << "\n";
            off += layout.node_bytes[nid];
        }
    }
}

} // namespace mega
