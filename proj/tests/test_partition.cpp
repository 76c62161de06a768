#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "mega/errors.hpp"
#include "mega/graph.hpp"
#include "mega/partition.hpp"

using namespace mega;

namespace {

// Worked two-subgraph fixture: nodes 0,1,5,6 in subgraph 0; nodes 2,3,4 in
// subgraph 1; cross edges 0->2 and 5->3, so subgraph 1 needs external
// sources {0, 5}.
Graph worked_graph() {
    return build_graph(7,
                       {{0, 1}, {0, 2}, {1, 6}, {5, 3}, {5, 6}, {2, 3}, {3, 4}},
                       {}, 0, Normalization::Add);
}

const std::vector<int32_t> worked_assignment = {0, 0, 1, 1, 1, 0, 0};

// Independent block-count oracle: enumerate every byte each external node
// occupies and count distinct granularity-sized blocks.
int64_t oracle_blocks(const std::vector<int32_t>& nodes, const std::vector<int64_t>& base,
                      const std::vector<int32_t>& node_bytes, int64_t g) {
    std::set<int64_t> blocks;
    for (int32_t nid : nodes) {
        for (int32_t b = 0; b < node_bytes[nid]; ++b) blocks.insert((base[nid] + b) / g);
    }
    return static_cast<int64_t>(blocks.size());
}

} // namespace

TEST_CASE("cross-edge external source lists are ascending and deduplicated") {
    Graph g = worked_graph();
    PartitionPlan plan = plan_from_assignment(g, worked_assignment);
    CHECK(plan.sub_num == 2);
    // subgraph 0 pulls node 2's features? no cross edge into 0 except none
    CHECK(plan.eid_lists[0].empty());
    CHECK(plan.eid_lists[1] == std::vector<int32_t>{0, 5});
}

TEST_CASE("condense schedule appends external nodes in production order") {
    Graph g = worked_graph();
    PartitionPlan plan = plan_from_assignment(g, worked_assignment);
    std::vector<int32_t> production = {0, 1, 2, 3, 4, 5, 6};
    std::vector<int32_t> node_bytes(7, 64);
    CondenseLayout layout = condense_schedule(plan, production, node_bytes);
    CHECK(layout.order[0].empty());
    CHECK(layout.order[1] == std::vector<int32_t>{0, 5});
    CHECK(layout.region_base[0] == 0);
    CHECK(layout.region_base[1] == 0);  // region 0 is empty

    // 64-byte nodes, 128-byte blocks: scattered sources 0 and 5 sit in
    // blocks 0 and 2 (2 accesses); condensed back-to-back they share one.
    auto scattered = sparse_access_count(plan, nullptr, 128, node_bytes);
    CHECK(scattered[1] == 2);
    auto condensed = sparse_access_count(plan, &layout, 128, node_bytes);
    CHECK(condensed[1] == 1);
    CHECK(condensed[0] == 0);
}

TEST_CASE("condense schedule validates its inputs") {
    Graph g = worked_graph();
    PartitionPlan plan = plan_from_assignment(g, worked_assignment);
    std::vector<int32_t> node_bytes(7, 64);

    // production order missing node 5
    CHECK_THROWS_AS(condense_schedule(plan, {0, 1, 2, 3, 4, 6}, node_bytes), ScheduleError);

    PartitionPlan bad = plan;
    bad.eid_lists[1] = {5, 0};  // not ascending
    CHECK_THROWS_AS(condense_schedule(bad, {0, 1, 2, 3, 4, 5, 6}, node_bytes), ScheduleError);
}

TEST_CASE("partitioner balances sizes and covers every node") {
    DatasetPreset small{"small", 120, 420, 8, 3.5, 0.3};
    Graph g = synth_graph(small, 77, 0.0);
    for (int32_t k : {2, 3, 4, 7}) {
        PartitionPlan plan = partition_graph(g, k, PartitionMethod::BfsGreedy);
        CHECK(plan.sub_num == k);
        std::vector<int32_t> sizes(k, 0);
        for (int32_t i = 0; i < g.num_nodes; ++i) {
            REQUIRE(plan.sub_of[i] >= 0);
            REQUIRE(plan.sub_of[i] < k);
            sizes[plan.sub_of[i]]++;
        }
        int32_t mn = *std::min_element(sizes.begin(), sizes.end());
        int32_t mx = *std::max_element(sizes.begin(), sizes.end());
        CHECK(mx - mn <= 1);
    }
    CHECK_THROWS_AS(partition_graph(g, 0, PartitionMethod::BfsGreedy), ConfigError);
    CHECK_THROWS_AS(partition_graph(g, 121, PartitionMethod::BfsGreedy), ConfigError);
}

TEST_CASE("partitioner is deterministic and beats round-robin on cross edges") {
    DatasetPreset small{"small", 150, 500, 8, 3.3, 0.3};
    Graph g = synth_graph(small, 5, 0.0);
    PartitionPlan a = partition_graph(g, 4, PartitionMethod::BfsGreedy);
    PartitionPlan b = partition_graph(g, 4, PartitionMethod::BfsGreedy);
    CHECK(a.sub_of == b.sub_of);

    auto cross_edges = [&](const PartitionPlan& p) {
        int64_t c = 0;
        for (const auto& [s, d] : g.raw_edges) c += p.sub_of[s] != p.sub_of[d];
        return c;
    };
    std::vector<int32_t> rr(g.num_nodes);
    for (int32_t i = 0; i < g.num_nodes; ++i) rr[i] = i % 4;
    PartitionPlan naive = plan_from_assignment(g, rr);
    CHECK(cross_edges(a) < cross_edges(naive));
}

TEST_CASE("assignment file round trip and import path") {
    Graph g = worked_graph();
    PartitionPlan plan = plan_from_assignment(g, worked_assignment);
    const std::string path = "/tmp/mega_test_partition.txt";
    write_partition(path, plan);
    PartitionPlan reread = partition_graph(g, 2, PartitionMethod::Import, path);
    CHECK(reread.sub_of == plan.sub_of);
    CHECK(reread.eid_lists == plan.eid_lists);
    std::remove(path.c_str());

    CHECK_THROWS_AS(partition_graph(g, 2, PartitionMethod::Import, "/tmp/mega_nope.txt"),
                    ConfigError);
    CHECK_THROWS_AS(plan_from_assignment(g, {0, 1}), ConfigError);
    CHECK_THROWS_AS(plan_from_assignment(g, {0, 0, 0, 0, 0, 0, -1}), ConfigError);
}

TEST_CASE("condensing never increases per-subgraph block counts") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int32_t> un(4, 64);
    std::uniform_real_distribution<double> ue(1.0, 4.0);
    for (int trial = 0; trial < 200; ++trial) {
        int32_t n = un(rng);
        int64_t e = std::min<int64_t>(static_cast<int64_t>(n * ue(rng)),
                                      static_cast<int64_t>(n) * (n - 1));
        DatasetPreset p{"r", n, e, 4, 2.0, 0.0};
        Graph g = synth_graph(p, 1000 + trial, 0.0);
        int32_t k = std::vector<int32_t>{2, 4, 8}[trial % 3];
        k = std::min(k, n);
        PartitionPlan plan = partition_graph(g, k, PartitionMethod::BfsGreedy);

        std::vector<int32_t> node_bytes(n);
        std::uniform_int_distribution<int32_t> ub(8, 96);
        for (auto& b : node_bytes) b = ub(rng);
        std::vector<int32_t> production(n);
        std::iota(production.begin(), production.end(), 0);
        CondenseLayout layout = condense_schedule(plan, production, node_bytes);

        const int64_t gran = 64;
        auto scattered = sparse_access_count(plan, nullptr, gran, node_bytes);
        auto condensed = sparse_access_count(plan, &layout, gran, node_bytes);

        // oracle for the scattered counts
        std::vector<int64_t> base(n + 1, 0);
        for (int32_t i = 0; i < n; ++i) base[i + 1] = base[i] + node_bytes[i];
        for (int32_t sub = 0; sub < plan.sub_num; ++sub) {
            REQUIRE(scattered[sub] ==
                    oracle_blocks(plan.eid_lists[sub], base, node_bytes, gran));
            REQUIRE(condensed[sub] <= scattered[sub]);
        }
    }
}

TEST_CASE("layout CSV lists every condensed node with its byte offset") {
    Graph g = worked_graph();
    PartitionPlan plan = plan_from_assignment(g, worked_assignment);
    std::vector<int32_t> production = {0, 1, 2, 3, 4, 5, 6};
    std::vector<int32_t> node_bytes(7, 16);
    CondenseLayout layout = condense_schedule(plan, production, node_bytes);
    CHECK(layout.order[1] == std::vector<int32_t>{0, 5});

    const std::string path = "/tmp/mega_test_layout.csv";
    write_layout_csv(path, layout);
    std::ifstream in(path);
    std::string header, l1, l2;
    std::getline(in, header);
    std::getline(in, l1);
    std::getline(in, l2);
    CHECK(header == "subgraph,position,node_id,byte_offset");
    CHECK(l1 == "1,0,0,0");
    CHECK(l2 == "1,1,5,16");
    std::remove(path.c_str());
}
