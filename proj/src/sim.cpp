#include "mega/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "mega/errors.hpp"

namespace mega {

using nlohmann::json;

std::string HwConfig::to_json() const {
    json j;
    j["tiles"] = tiles;
    j["cpes_per_tile"] = cpes_per_tile;
    j["bses_per_cpe"] = bses_per_cpe;
    j["feature_slice"] = feature_slice;
    j["agg_units"] = agg_units;
    j["buffers"] = {{"aggregation", buffers.aggregation}, {"combination", buffers.combination},
                    {"input", buffers.input},             {"edge", buffers.edge},
                    {"sparse", buffers.sparse},           {"weight", buffers.weight}};
    j["dram"] = {{"bandwidth_gbps", dram.bandwidth_gbps},
                 {"granularity_bytes", dram.granularity_bytes},
                 {"latency_cycles", dram.latency_cycles}};
    j["energy"] = {{"pj_per_bit_dram", energy.pj_per_bit_dram},
                   {"pj_per_bit_sram", energy.pj_per_bit_sram},
                   {"pj_per_bitop", energy.pj_per_bitop},
                   {"leakage_mw", energy.leakage_mw}};
    j["clock_ghz"] = clock_ghz;
    return j.dump(2);
}

HwConfig HwConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    HwConfig hw;
    hw.tiles = j.value("tiles", hw.tiles);
    hw.cpes_per_tile = j.value("cpes_per_tile", hw.cpes_per_tile);
    hw.bses_per_cpe = j.value("bses_per_cpe", hw.bses_per_cpe);
    hw.feature_slice = j.value("feature_slice", hw.feature_slice);
    hw.agg_units = j.value("agg_units", hw.agg_units);
    if (j.contains("buffers")) {
        const auto& b = j["buffers"];
        hw.buffers.aggregation = b.value("aggregation", hw.buffers.aggregation);
        hw.buffers.combination = b.value("combination", hw.buffers.combination);
        hw.buffers.input = b.value("input", hw.buffers.input);
        hw.buffers.edge = b.value("edge", hw.buffers.edge);
        hw.buffers.sparse = b.value("sparse", hw.buffers.sparse);
        hw.buffers.weight = b.value("weight", hw.buffers.weight);
    }
    if (j.contains("dram")) {
        const auto& d = j["dram"];
        hw.dram.bandwidth_gbps = d.value("bandwidth_gbps", hw.dram.bandwidth_gbps);
        hw.dram.granularity_bytes = d.value("granularity_bytes", hw.dram.granularity_bytes);
        hw.dram.latency_cycles = d.value("latency_cycles", hw.dram.latency_cycles);
    }
    if (j.contains("energy")) {
        const auto& e = j["energy"];
        hw.energy.pj_per_bit_dram = e.value("pj_per_bit_dram", hw.energy.pj_per_bit_dram);
        hw.energy.pj_per_bit_sram = e.value("pj_per_bit_sram", hw.energy.pj_per_bit_sram);
        hw.energy.pj_per_bitop = e.value("pj_per_bitop", hw.energy.pj_per_bitop);
        hw.energy.leakage_mw = e.value("leakage_mw", hw.energy.leakage_mw);
    }
    hw.clock_ghz = j.value("clock_ghz", hw.clock_ghz);
    return hw;
}

uint64_t DramBreakdown::total_accesses() const {
    return features.accesses + weights.accesses + edges.accesses +
           sparse_connections.accesses + partial_sums.accesses;
}

uint64_t DramBreakdown::total_bytes() const {
    return features.bytes + weights.bytes + edges.bytes + sparse_connections.bytes +
           partial_sums.bytes;
}

std::string SimReport::to_json() const {
    json j;
    j["cycles_total"] = cycles_total;
    j["cycles_stall_dram"] = cycles_stall_dram;
    j["cycles_combination"] = cycles_combination;
    j["cycles_aggregation"] = cycles_aggregation;
    j["cycles_fetch"] = cycles_fetch;
    auto cause = [](const CauseStats& c) {
        return json{{"accesses", c.accesses}, {"bytes", c.bytes}};
    };
    j["dram"] = {{"features", cause(dram.features)},
                 {"weights", cause(dram.weights)},
                 {"edges", cause(dram.edges)},
                 {"sparse_connections", cause(dram.sparse_connections)},
                 {"partial_sums", cause(dram.partial_sums)},
                 {"total_accesses", dram.total_accesses()},
                 {"total_bytes", dram.total_bytes()}};
    j["energy_uj"] = {{"dram", energy.dram_uj},
                      {"sram", energy.sram_uj},
                      {"pu", energy.pu_uj},
                      {"leakage", energy.leakage_uj}};
    j["utilization"] = {{"combination", util_combination}, {"aggregation", util_aggregation}};
    j["partial"] = partial;
    return j.dump(2);
}

std::string SimReport::csv_header() const {
    return "cycles_total,cycles_stall_dram,dram_accesses,dram_bytes,bytes_features,"
           "bytes_weights,bytes_edges,bytes_sparse,bytes_psum,energy_dram_uj,"
           "energy_sram_uj,energy_pu_uj,energy_leakage_uj,util_combination,util_aggregation";
}

std::string SimReport::csv_row() const {
    std::string row;
    row += std::to_string(cycles_total) + "," + std::to_string(cycles_stall_dram) + ",";
    row += std::to_string(dram.total_accesses()) + "," + std::to_string(dram.total_bytes()) + ",";
    row += std::to_string(dram.features.bytes) + "," + std::to_string(dram.weights.bytes) + ",";
    row += std::to_string(dram.edges.bytes) + "," + std::to_string(dram.sparse_connections.bytes) +
           "," + std::to_string(dram.partial_sums.bytes) + ",";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", energy.dram_uj,
                  energy.sram_uj, energy.pu_uj, energy.leakage_uj, util_combination,
                  util_aggregation);
    row += buf;
    return row;
}

uint64_t combination_cycles(int64_t node_nnz, int bitwidth, const HwConfig& hw) {
    if (node_nnz <= 0) return 0;
    const int64_t n = std::max(1, hw.bses_per_cpe);
    const int64_t groups = (node_nnz + n - 1) / n;
    // 1-cycle load skew + 1-cycle drain of the forwarded C-PE half.
    return 2 + static_cast<uint64_t>(groups) * bitwidth;
}

uint64_t aggregation_cycles(int64_t out_edges, int32_t f2, const HwConfig& hw) {
    if (out_edges <= 0) return 0;
    const int64_t units = std::max(1, hw.agg_units);
    if (f2 <= units) {
        const int64_t per_cycle = units / f2;  // free units pack extra destinations
        return static_cast<uint64_t>((out_edges + per_cycle - 1) / per_cycle);
    }
    const int64_t slices = (f2 + units - 1) / units;
    return static_cast<uint64_t>(slices * out_edges);
}

EnergyBreakdown energy_report(const RawCounters& stats, const HwConfig& hw) {
    EnergyBreakdown e;
    e.dram_uj = stats.dram_bits * hw.energy.pj_per_bit_dram * 1e-6;
    e.sram_uj = stats.sram_bits * hw.energy.pj_per_bit_sram * 1e-6;
    e.pu_uj = stats.bitops * hw.energy.pj_per_bitop * 1e-6;
    // leakage_mw * seconds -> uJ: mW * (cycles / (GHz * 1e9)) * 1e3
    e.leakage_uj = hw.energy.leakage_mw * (static_cast<double>(stats.cycles) /
                                           (hw.clock_ghz * 1e9)) * 1e3;
    return e;
}

namespace {

struct LayerNodeStats {
    std::vector<int64_t> nnz;  // per node
    std::vector<int> bits;     // per node
    uint64_t feature_bytes = 0;
};

CauseStats charge(uint64_t raw_bytes, int64_t granularity) {
    CauseStats c;
    c.accesses = (raw_bytes + granularity - 1) / granularity;
    c.bytes = c.accesses * granularity;
    return c;
}

// Per-column 4-bit quantization of an activation matrix, the encoder-side
// treatment of combined/aggregated outputs.
QuantizedFeatures quantize_activations_4bit(const std::vector<double>& x, int32_t n, int32_t f) {
    QuantizedFeatures q;
    q.num_nodes = n;
    q.feature_dim = f;
    q.values.resize(static_cast<size_t>(n) * f);
    q.node_scale.assign(n, 1.0);
    q.node_bitwidth.assign(n, 4);
    std::vector<double> beta(f, 1.0);
    for (int32_t j = 0; j < f; ++j) {
        double m = 0.0;
        for (int32_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[static_cast<size_t>(i) * f + j]));
        if (m > 0.0) beta[j] = m / 7.0;
    }
    for (int32_t i = 0; i < n; ++i) {
        for (int32_t j = 0; j < f; ++j) {
            q.values[static_cast<size_t>(i) * f + j] = static_cast<int8_t>(
                quantize_value(x[static_cast<size_t>(i) * f + j], beta[j], 4));
        }
    }
    return q;
}

LayerNodeStats node_stats_for(const QuantizedFeatures& q, Format format,
                              const PackageLengths& lengths) {
    LayerNodeStats st;
    const int32_t n = q.num_nodes, f = q.feature_dim;
    st.nnz.assign(n, 0);
    st.bits.assign(n, 0);
    uint64_t nnz_total = 0;
    for (int32_t i = 0; i < n; ++i) {
        int64_t cnt = 0;
        const size_t row = static_cast<size_t>(i) * f;
        for (int32_t j = 0; j < f; ++j) {
            if (q.values[row + j] != 0) ++cnt;
        }
        st.nnz[i] = cnt;
        nnz_total += cnt;
    }
    switch (format) {
        case Format::Dense32:
            for (int32_t i = 0; i < n; ++i) {
                st.nnz[i] = f;  // no sparsity exploited
                st.bits[i] = 32;
            }
            st.feature_bytes = static_cast<uint64_t>(n) * f * 4;
            break;
        case Format::Bitmap8:
            for (int32_t i = 0; i < n; ++i) st.bits[i] = 8;
            st.feature_bytes = (static_cast<uint64_t>(n) * f + 7) / 8 + nnz_total;
            break;
        case Format::Adaptive: {
            for (int32_t i = 0; i < n; ++i) st.bits[i] = q.node_bitwidth[i];
            PackageStream s = encode(q, lengths);
            st.feature_bytes = s.byte_aligned_bytes();
            break;
        }
    }
    return st;
}

} // namespace

SimReport simulate(const Graph& g, const HwConfig& hw, const RunConfig& run,
                   const PartitionPlan* plan, const QuantParams* qp) {
    if (run.layers.empty()) throw ConfigError("run config needs at least one layer");
    if (run.layers[0].in_dim != g.feature_dim) {
        throw ConfigError("layer 0 in_dim must equal graph feature_dim");
    }
    for (size_t l = 1; l < run.layers.size(); ++l) {
        if (run.layers[l].in_dim != run.layers[l - 1].out_dim) {
            throw ConfigError("layer dimension chain mismatch at layer " + std::to_string(l));
        }
    }
    if (run.format == Format::Adaptive && !run.quantized) {
        throw ConfigError("adaptive format requires quantized features");
    }
    if (run.schedule == Schedule::Condense &&
        (plan == nullptr || plan->sub_num < 1)) {
        throw ConfigError("condense schedule requires a partition plan");
    }
    if (run.quantized && qp == nullptr) {
        throw ConfigError("quantized run requires quantization parameters");
    }
    const PartitionPlan* eff_plan =
        (run.schedule == Schedule::Naive) ? nullptr : plan;
    if (run.schedule != Schedule::Naive && eff_plan == nullptr) {
        throw ConfigError("partitioned schedule requires a partition plan");
    }
    run.lengths.validate();

    // Buffer sanity: each buffer must hold at least one unit record.
    const int64_t pkg_bytes = (5 + run.lengths.long_bits + 7) / 8;
    if (hw.buffers.input < 2 * pkg_bytes) throw ConfigError("input buffer below one package pair");
    for (const auto& layer : run.layers) {
        if (hw.buffers.aggregation < layer.out_dim * 2) {
            throw ConfigError("aggregation buffer below one node of partial sums");
        }
        if (hw.buffers.combination < layer.out_dim) {
            throw ConfigError("combination buffer below one combined node");
        }
        if (hw.buffers.weight < layer.in_dim / 2 + 1) {
            throw ConfigError("weight buffer below one weight column");
        }
    }

    DegreeProfile profile = degree_profile(g);
    const int32_t n = g.num_nodes;
    const Csc& a = g.adjacency;

    int64_t group_size = n;
    if (eff_plan) {
        std::vector<int64_t> sizes(eff_plan->sub_num, 0);
        for (int32_t s : eff_plan->sub_of) sizes[s]++;
        group_size = *std::max_element(sizes.begin(), sizes.end());
    }

    SimReport rep;
    RawCounters counters;
    // Activations carried in double through the layer stack.
    std::vector<double> x(g.features.begin(), g.features.end());

    for (size_t l = 0; l < run.layers.size(); ++l) {
        const LayerSpec& layer = run.layers[l];
        const int32_t f_in = layer.in_dim, f_out = layer.out_dim;

        std::mt19937_64 rng(run.weight_seed + l);
        std::uniform_real_distribution<double> ud(-0.5, 0.5);
        std::vector<double> w(static_cast<size_t>(f_in) * f_out);
        for (auto& v : w) v = ud(rng);
        QuantizedWeights wq = quantize_weights(w, f_in, f_out);
        std::vector<double> w_eff = run.quantized ? dequantize_weights(wq) : w;

        // Quantized view of this layer's input (drives nnz / bitwidth stats).
        QuantizedFeatures xq;
        if (run.quantized) {
            if (l == 0) {
                std::vector<float> xf(x.begin(), x.end());
                xq = quantize_features(xf, n, f_in, profile, *qp);
            } else {
                xq = quantize_activations_4bit(x, n, f_in);
            }
        } else {
            // Unquantized carrier: values only used for nnz counting.
            xq.num_nodes = n;
            xq.feature_dim = f_in;
            xq.values.resize(static_cast<size_t>(n) * f_in);
            xq.node_scale.assign(n, 1.0);
            xq.node_bitwidth.assign(n, 8);
            for (size_t i = 0; i < xq.values.size(); ++i) {
                xq.values[i] = x[i] != 0.0 ? 1 : 0;
            }
        }
        LayerNodeStats st = node_stats_for(xq, run.format, run.lengths);

        // ---- DRAM traffic ----
        const int64_t gran = hw.dram.granularity_bytes;
        uint64_t feature_read = st.feature_bytes;
        // Combined features that overflow the Combination Buffer are re-read
        // during aggregation of the same group.
        const int64_t comb_node_bytes = run.quantized ? (f_out + 1) / 2 : f_out * 4;
        uint64_t comb_footprint = static_cast<uint64_t>(group_size) * comb_node_bytes;
        if (comb_footprint > static_cast<uint64_t>(hw.buffers.combination)) {
            feature_read += comb_footprint - hw.buffers.combination;
        }
        // Output write-back in the same storage format family.
        uint64_t feature_write = static_cast<uint64_t>(n) * comb_node_bytes;
        rep.dram.features.accesses += charge(feature_read + feature_write, gran).accesses;

        uint64_t weight_bytes =
            static_cast<uint64_t>(f_in) * f_out * (run.quantized ? 4 : 32) / 8;
        uint64_t reloads = std::max<uint64_t>(
            1, (weight_bytes + hw.buffers.weight - 1) / hw.buffers.weight);
        rep.dram.weights.accesses += charge(weight_bytes * reloads, gran).accesses;

        uint64_t edge_bytes = static_cast<uint64_t>(a.entry_count()) * 4;
        rep.dram.edges.accesses += charge(edge_bytes, gran).accesses;

        if (eff_plan) {
            std::vector<int32_t> node_bytes(n, static_cast<int32_t>(comb_node_bytes));
            std::vector<int64_t> counts;
            if (run.schedule == Schedule::Condense) {
                std::vector<int32_t> order(n);
                for (int32_t i = 0; i < n; ++i) order[i] = i;
                CondenseLayout layout = condense_schedule(*eff_plan, order, node_bytes);
                counts = sparse_access_count(*eff_plan, &layout, gran, node_bytes);
            } else {
                counts = sparse_access_count(*eff_plan, nullptr, gran, node_bytes);
            }
            for (int64_t c : counts) rep.dram.sparse_connections.accesses += c;
        }

        uint64_t psum_footprint = static_cast<uint64_t>(group_size) * f_out * 2;
        if (psum_footprint > static_cast<uint64_t>(hw.buffers.aggregation)) {
            uint64_t spill = 2 * (psum_footprint - hw.buffers.aggregation);
            rep.dram.partial_sums.accesses += charge(spill, gran).accesses;
        }

        // ---- compute cycles ----
        const int64_t passes = (f_out + hw.cpes_per_tile - 1) / hw.cpes_per_tile;
        uint64_t comb = 0;
        for (int32_t i = 0; i < n; ++i) {
            if (st.nnz[i] <= 0) continue;
            int64_t nnz_tile = (st.nnz[i] + hw.tiles - 1) / hw.tiles;
            uint64_t per_pass = combination_cycles(nnz_tile, st.bits[i], hw);
            // Pipeline fill charged once per node, not per pass.
            comb += passes * (per_pass - 2) + 2;
        }
        uint64_t agg = 0;
        for (int32_t j = 0; j < n; ++j) {
            int64_t out_edges = a.col_offsets[j + 1] - a.col_offsets[j];
            agg += aggregation_cycles(out_edges, f_out, hw);
        }
        rep.cycles_combination += comb;
        rep.cycles_aggregation += agg;

        // ---- compute next-layer activations ----
        std::vector<double> b_mat;
        if (run.quantized) {
            b_mat = integer_matmul(xq, wq);
        } else {
            b_mat.assign(static_cast<size_t>(n) * f_out, 0.0);
            for (int32_t i = 0; i < n; ++i) {
                const double* xrow = &x[static_cast<size_t>(i) * f_in];
                double* orow = &b_mat[static_cast<size_t>(i) * f_out];
                for (int32_t p = 0; p < f_in; ++p) {
                    if (xrow[p] == 0.0) continue;
                    const double* wrow = &w_eff[static_cast<size_t>(p) * f_out];
                    for (int32_t j = 0; j < f_out; ++j) orow[j] += xrow[p] * wrow[j];
                }
            }
        }
        std::vector<double> z(static_cast<size_t>(n) * f_out, 0.0);
        for (int32_t col = 0; col < n; ++col) {
            const double* brow = &b_mat[static_cast<size_t>(col) * f_out];
            for (int64_t e = a.col_offsets[col]; e < a.col_offsets[col + 1]; ++e) {
                double wgt = a.weights[e];
                double* zrow = &z[static_cast<size_t>(a.row_indices[e]) * f_out];
                for (int32_t j = 0; j < f_out; ++j) zrow[j] += wgt * brow[j];
            }
        }
        for (auto& v : z) v = std::max(0.0, v);  // ReLU
        x = std::move(z);

        // ---- energy counters ----
        const int wb = run.quantized ? 4 : 32;
        for (int32_t i = 0; i < n; ++i) {
            counters.bitops += static_cast<uint64_t>(st.nnz[i]) * st.bits[i] * wb * f_out;
        }
        counters.bitops += static_cast<uint64_t>(a.entry_count()) * f_out * (wb * 16 + 16);
        counters.sram_bits += static_cast<uint64_t>(a.entry_count()) * f_out * 16 * 2;
        counters.sram_bits += static_cast<uint64_t>(n) * comb_node_bytes * 8 * 2;
    }

    // Finalize byte totals from access counts (bytes == count * granularity).
    const int64_t gran = hw.dram.granularity_bytes;
    for (CauseStats* c : {&rep.dram.features, &rep.dram.weights, &rep.dram.edges,
                          &rep.dram.sparse_connections, &rep.dram.partial_sums}) {
        c->bytes = c->accesses * gran;
    }

    const double bytes_per_cycle = hw.dram.bandwidth_gbps / hw.clock_ghz;
    rep.cycles_fetch =
        static_cast<uint64_t>(std::ceil(rep.dram.total_bytes() / bytes_per_cycle));
    uint64_t compute = std::max(rep.cycles_combination, rep.cycles_aggregation);
    rep.cycles_total = std::max(compute, rep.cycles_fetch) +
                       static_cast<uint64_t>(hw.dram.latency_cycles) * run.layers.size();
    rep.cycles_stall_dram = rep.cycles_total - compute;

    counters.dram_bits = rep.dram.total_bytes() * 8;
    counters.sram_bits += counters.dram_bits * 2;  // fill + drain through buffers
    counters.cycles = rep.cycles_total;
    rep.energy = energy_report(counters, hw);
    if (rep.cycles_total > 0) {
        rep.util_combination =
            static_cast<double>(rep.cycles_combination) / rep.cycles_total;
        rep.util_aggregation =
            static_cast<double>(rep.cycles_aggregation) / rep.cycles_total;
    }
    return rep;
}

} // namespace mega
