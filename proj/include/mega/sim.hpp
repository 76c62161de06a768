#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mega/codec.hpp"
#include "mega/graph.hpp"
#include "mega/partition.hpp"
#include "mega/quant.hpp"

namespace mega {

struct DramConfig {
    double bandwidth_gbps = 256.0;  // HBM-class channel
    int64_t granularity_bytes = 128;
    int64_t latency_cycles = 100;
};

// Energy constants are model inputs, not claims; only ratios between this
// tool's own runs are meaningful.
struct EnergyConstants {
    double pj_per_bit_dram = 7.0;
    double pj_per_bit_sram = 0.08;
    double pj_per_bitop = 0.002;
    double leakage_mw = 54.0;
};

struct BufferBytes {
    int64_t aggregation = 128 * 1024;
    int64_t combination = 96 * 1024;
    int64_t input = 64 * 1024;
    int64_t edge = 24 * 1024;
    int64_t sparse = 32 * 1024;
    int64_t weight = 48 * 1024;
};

struct HwConfig {
    int tiles = 4;           // Combination Tiles
    int cpes_per_tile = 8;   // m
    int bses_per_cpe = 32;   // n
    int feature_slice = 32;  // c, input dims per tile
    int agg_units = 256;
    BufferBytes buffers;
    DramConfig dram;
    EnergyConstants energy;
    double clock_ghz = 1.0;

    std::string to_json() const;
    static HwConfig from_json(const std::string& text);
};

enum class Format { Dense32, Bitmap8, Adaptive };
enum class Schedule { Naive, Partitioned, Condense };
enum class AggregationOp { Add, Mean };

struct LayerSpec {
    int32_t in_dim = 0;
    int32_t out_dim = 0;
    AggregationOp agg = AggregationOp::Add;
};

struct RunConfig {
    Format format = Format::Adaptive;
    Schedule schedule = Schedule::Condense;
    bool quantized = true;
    std::vector<LayerSpec> layers;
    PackageLengths lengths;
    uint64_t weight_seed = 1;
};

struct CauseStats {
    uint64_t accesses = 0;
    uint64_t bytes = 0;
};

struct DramBreakdown {
    CauseStats features, weights, edges, sparse_connections, partial_sums;
    uint64_t total_accesses() const;
    uint64_t total_bytes() const;
};

struct EnergyBreakdown {
    double dram_uj = 0.0, sram_uj = 0.0, pu_uj = 0.0, leakage_uj = 0.0;
};

struct SimReport {
    uint64_t cycles_total = 0;
    uint64_t cycles_stall_dram = 0;
    uint64_t cycles_combination = 0;  // compute-only totals, for overlap checks
    uint64_t cycles_aggregation = 0;
    uint64_t cycles_fetch = 0;
    DramBreakdown dram;
    EnergyBreakdown energy;
    double util_combination = 0.0;
    double util_aggregation = 0.0;
    bool partial = false;

    std::string to_json() const;
    std::string csv_header() const;
    std::string csv_row() const;
};

// Bit-serial combination timing for one node pass: groups of n non-zeros
// stream one bit per cycle for b cycles each, with a 1-cycle weight-load skew
// in front and a 1-cycle systolic drain for the second C-PE half.
uint64_t combination_cycles(int64_t node_nnz, int bitwidth, const HwConfig& hw);

// Outer-product aggregation: destinations packed onto the AU array.
uint64_t aggregation_cycles(int64_t out_edges, int32_t f2, const HwConfig& hw);

struct RawCounters {
    uint64_t dram_bits = 0;
    uint64_t sram_bits = 0;
    uint64_t bitops = 0;
    uint64_t cycles = 0;
};

EnergyBreakdown energy_report(const RawCounters& stats, const HwConfig& hw);

SimReport simulate(const Graph& g, const HwConfig& hw, const RunConfig& run,
                   const PartitionPlan* plan = nullptr,
                   const QuantParams* qp = nullptr);

} // namespace mega
