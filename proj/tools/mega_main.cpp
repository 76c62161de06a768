// mega — co-design toolkit CLI: synthetic graph generation, degree-aware
// quantization, adaptive-package encoding, partitioning, simulation, and
// experiment sweeps. Each subcommand is standalone with file handoffs.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mega/codec.hpp"
#include "mega/errors.hpp"
#include "mega/experiment.hpp"
#include "mega/graph.hpp"
#include "mega/partition.hpp"
#include "mega/quant.hpp"
#include "mega/sim.hpp"

namespace fs = std::filesystem;
using namespace mega;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

Graph load_pair(const std::string& edges, const std::string& feats) {
    return load_graph(edges, feats, Normalization::GcnSym);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mega: mixed-precision GNN storage/scheduling co-design toolkit"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic preset-shaped graph");
    std::string s_preset = "cora", s_out = ".";
    uint64_t s_seed = 1;
    double s_gamma = 0.0;
    synth->add_option("--preset", s_preset, "cora|citeseer|pubmed|nell|reddit");
    synth->add_option("--out", s_out, "output directory");
    synth->add_option("--seed", s_seed);
    synth->add_option("--gamma", s_gamma, "degree/feature-magnitude coupling exponent");

    // ---- quantize ----
    auto* quant = app.add_subcommand("quantize", "fit degree-aware quantization parameters");
    std::string q_edges, q_feats, q_out = "params.json";
    double q_m = 64.0, q_lambda = 1.0;
    uint64_t q_seed = 7, q_wseed = 1;
    int32_t q_fout = 16;
    quant->add_option("--edges", q_edges)->required();
    quant->add_option("--features", q_feats)->required();
    quant->add_option("--out", q_out, "parameter JSON path");
    quant->add_option("--m-target-kb", q_m);
    quant->add_option("--lambda", q_lambda);
    quant->add_option("--seed", q_seed);
    quant->add_option("--out-dim", q_fout, "layer output width used by the proxy loss");
    quant->add_option("--weight-seed", q_wseed);

    // ---- encode ----
    auto* enc = app.add_subcommand("encode", "pack quantized features into adaptive packages");
    std::string e_edges, e_feats, e_params, e_out = "features.megp", e_report;
    int e_short = 64, e_medium = 128, e_long = 192;
    enc->add_option("--edges", e_edges)->required();
    enc->add_option("--features", e_feats)->required();
    enc->add_option("--params", e_params, "quantization parameter JSON")->required();
    enc->add_option("--out", e_out, "package stream path");
    enc->add_option("--short-bits", e_short);
    enc->add_option("--medium-bits", e_medium);
    enc->add_option("--long-bits", e_long);
    enc->add_option("--storage-report", e_report, "optional per-format storage CSV path");

    // ---- partition ----
    auto* part = app.add_subcommand("partition", "split the graph and plan condensed regions");
    std::string p_edges, p_feats, p_out = "partition.txt", p_import, p_layout;
    int32_t p_k = 2;
    part->add_option("--edges", p_edges)->required();
    part->add_option("--features", p_feats)->required();
    part->add_option("-k,--parts", p_k);
    part->add_option("--out", p_out, "assignment file (line i = subgraph of node i)");
    part->add_option("--import", p_import, "reuse an existing assignment file");
    part->add_option("--layout-csv", p_layout, "optional condensed-layout CSV path");

    // ---- simulate ----
    auto* sim = app.add_subcommand("simulate", "run the timing/energy/traffic model");
    std::string m_edges, m_feats, m_preset, m_hw, m_run, m_out = "report.json",
                m_partition, m_params;
    uint64_t m_seed = 1;
    double m_gamma = 0.0;
    sim->add_option("--edges", m_edges);
    sim->add_option("--features", m_feats);
    sim->add_option("--preset", m_preset, "synthesize instead of loading files");
    sim->add_option("--seed", m_seed, "synthesis seed");
    sim->add_option("--gamma", m_gamma);
    sim->add_option("--hw", m_hw, "hardware config JSON (default: built-in/MEGA_DEFAULTS)");
    sim->add_option("--run", m_run, "run config JSON")->required();
    sim->add_option("--partition", m_partition, "assignment file for partitioned schedules");
    sim->add_option("--params", m_params, "quantization parameter JSON");
    sim->add_option("--out", m_out, "report JSON path");

    // ---- sweep ----
    auto* sweep = app.add_subcommand("sweep", "run an experiment lattice");
    std::string w_spec, w_out = "out";
    int w_jobs = 1;
    uint64_t w_seed = 0;
    bool w_seed_set = false;
    sweep->add_option("--spec", w_spec, "experiment spec JSON")->required();
    sweep->add_option("--out", w_out, "output directory");
    sweep->add_option("--jobs", w_jobs, "worker threads");
    sweep->add_option("--seed", w_seed, "override every seed in the spec")
        ->each([&](const std::string&) { w_seed_set = true; });

    // ---- report ----
    auto* rep = app.add_subcommand("report", "per-format storage ratios for quantized features");
    std::string r_edges, r_feats, r_params, r_out = "storage.csv";
    int r_short = 64, r_medium = 128, r_long = 192;
    rep->add_option("--edges", r_edges)->required();
    rep->add_option("--features", r_feats)->required();
    rep->add_option("--params", r_params)->required();
    rep->add_option("--out", r_out);
    rep->add_option("--short-bits", r_short);
    rep->add_option("--medium-bits", r_medium);
    rep->add_option("--long-bits", r_long);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            Graph g = synth_graph(preset_by_name(s_preset), s_seed, s_gamma);
            fs::create_directories(s_out);
            write_edge_list((fs::path(s_out) / (s_preset + ".edges")).string(), g);
            write_features((fs::path(s_out) / (s_preset + ".megf")).string(), g.features,
                           g.num_nodes, g.feature_dim);
            std::cout << "wrote " << s_preset << ".edges / .megf  (N=" << g.num_nodes
                      << ", E=" << g.num_edges << ", F=" << g.feature_dim << ")\n";
        } else if (quant->parsed()) {
            Graph g = load_pair(q_edges, q_feats);
            std::mt19937_64 rng(q_wseed);
            std::uniform_real_distribution<double> ud(-0.5, 0.5);
            std::vector<double> w(static_cast<size_t>(g.feature_dim) * q_fout);
            for (auto& v : w) v = ud(rng);
            QuantizedWeights wq = quantize_weights(w, g.feature_dim, q_fout);
            OptimizeResult opt = optimize_params(g, wq, q_m, q_lambda, q_seed);
            spit(q_out, opt.params.to_json());
            std::cout << "params -> " << q_out << "  (feasible=" << opt.feasible
                      << ", proxy_mse=" << opt.proxy_mse
                      << ", feature_kbits=" << opt.total_feature_bits / 1024.0 << ")\n";
        } else if (enc->parsed()) {
            Graph g = load_pair(e_edges, e_feats);
            QuantParams qp = QuantParams::from_json(slurp(e_params));
            QuantizedFeatures qf =
                quantize_features(g.features, g.num_nodes, g.feature_dim, degree_profile(g), qp);
            PackageLengths lens{e_short, e_medium, e_long};
            PackageStream s = encode(qf, lens);
            write_stream(e_out, s);
            std::cout << "stream -> " << e_out << "  (" << s.packages.size() << " packages, "
                      << s.byte_aligned_bytes() << " bytes, padding " << s.padding_bits()
                      << " bits)\n";
            if (!e_report.empty()) spit(e_report, storage_ratio_csv(qf, lens));
        } else if (part->parsed()) {
            Graph g = load_pair(p_edges, p_feats);
            PartitionPlan plan =
                p_import.empty()
                    ? partition_graph(g, p_k, PartitionMethod::BfsGreedy)
                    : partition_graph(g, p_k, PartitionMethod::Import, p_import);
            write_partition(p_out, plan);
            int64_t cross = 0;
            for (const auto& l : plan.eid_lists) cross += static_cast<int64_t>(l.size());
            std::cout << "partition -> " << p_out << "  (k=" << plan.sub_num
                      << ", external sources=" << cross << ")\n";
            if (!p_layout.empty()) {
                std::vector<int32_t> order(g.num_nodes);
                for (int32_t i = 0; i < g.num_nodes; ++i) order[i] = i;
                std::vector<int32_t> node_bytes(g.num_nodes, g.feature_dim * 4);
                write_layout_csv(p_layout, condense_schedule(plan, order, node_bytes));
            }
        } else if (sim->parsed()) {
            Graph g;
            if (!m_preset.empty()) {
                g = synth_graph(preset_by_name(m_preset), m_seed, m_gamma);
            } else if (!m_edges.empty() && !m_feats.empty()) {
                g = load_pair(m_edges, m_feats);
            } else {
                throw ConfigError("simulate needs --preset or --edges/--features");
            }
            HwConfig hw = m_hw.empty() ? default_hw() : HwConfig::from_json(slurp(m_hw));
            nlohmann::json rj = nlohmann::json::parse(slurp(m_run));
            RunConfig run;
            run.format = format_from_name(rj.value("format", "adaptive"));
            run.schedule = schedule_from_name(rj.value("schedule", "condense"));
            run.quantized = rj.value("quantized", true);
            if (rj.contains("lengths")) {
                run.lengths.short_bits = rj["lengths"].at(0).get<int>();
                run.lengths.medium_bits = rj["lengths"].at(1).get<int>();
                run.lengths.long_bits = rj["lengths"].at(2).get<int>();
            }
            run.weight_seed = rj.value("weight_seed", run.weight_seed);
            if (rj.contains("layers")) {
                for (const auto& l : rj["layers"]) {
                    LayerSpec ls;
                    ls.in_dim = l.at("in").get<int32_t>();
                    ls.out_dim = l.at("out").get<int32_t>();
                    ls.agg = l.value("agg", "add") == std::string("mean") ? AggregationOp::Mean
                                                                          : AggregationOp::Add;
                    run.layers.push_back(ls);
                }
            } else {
                run.layers = {{g.feature_dim, 16, AggregationOp::Add},
                              {16, 8, AggregationOp::Add}};
            }
            PartitionPlan plan;
            const PartitionPlan* pp = nullptr;
            if (!m_partition.empty()) {
                plan = plan_from_assignment(g, read_partition(m_partition));
                pp = &plan;
            } else if (run.schedule != Schedule::Naive) {
                plan = partition_graph(g, rj.value("k", 2), PartitionMethod::BfsGreedy);
                pp = &plan;
            }
            QuantParams qp;
            const QuantParams* qpp = nullptr;
            if (run.quantized) {
                if (m_params.empty()) {
                    std::mt19937_64 rng(run.weight_seed);
                    std::uniform_real_distribution<double> ud(-0.5, 0.5);
                    std::vector<double> w(static_cast<size_t>(g.feature_dim) *
                                          run.layers[0].out_dim);
                    for (auto& v : w) v = ud(rng);
                    QuantizedWeights wq =
                        quantize_weights(w, g.feature_dim, run.layers[0].out_dim);
                    qp = optimize_params(g, wq, rj.value("m_target_kb", 64.0),
                                         rj.value("lambda", 1.0), rj.value("quant_seed", 7))
                             .params;
                } else {
                    qp = QuantParams::from_json(slurp(m_params));
                }
                qpp = &qp;
            }
            try {
                SimReport report = simulate(g, hw, run, pp, qpp);
                spit(m_out, report.to_json());
                std::cout << "report -> " << m_out << "  (cycles=" << report.cycles_total
                          << ", dram_bytes=" << report.dram.total_bytes() << ")\n";
            } catch (const std::exception& e) {
                // Emit whatever we have, flagged partial, then fail.
                SimReport report;
                report.partial = true;
                spit(m_out, report.to_json());
                std::cerr << "error: " << e.what() << " (partial report -> " << m_out << ")\n";
                return 1;
            }
        } else if (sweep->parsed()) {
            ExperimentSpec spec = ExperimentSpec::from_json(slurp(w_spec));
            if (w_seed_set) {
                spec.source.seed = w_seed;
                spec.quant.seed = w_seed;
                spec.weight_seed = w_seed;
            }
            ExperimentBundle bundle = run_experiment(spec, w_jobs);
            fs::create_directories(w_out);
            spit((fs::path(w_out) / (bundle.name + ".csv")).string(), bundle.csv());
            spit((fs::path(w_out) / (bundle.name + ".json")).string(), bundle.to_json());
            int failed = 0;
            for (const auto& p : bundle.points) failed += p.error.empty() ? 0 : 1;
            std::cout << bundle.points.size() << " points -> " << w_out << "  (" << failed
                      << " failed)\n";
            if (failed == static_cast<int>(bundle.points.size())) return 1;
        } else if (rep->parsed()) {
            Graph g = load_pair(r_edges, r_feats);
            QuantParams qp = QuantParams::from_json(slurp(r_params));
            QuantizedFeatures qf =
                quantize_features(g.features, g.num_nodes, g.feature_dim, degree_profile(g), qp);
            spit(r_out, storage_ratio_csv(qf, PackageLengths{r_short, r_medium, r_long}));
            std::cout << "storage ratios -> " << r_out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
