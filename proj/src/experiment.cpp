#include "mega/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "mega/errors.hpp"

namespace mega {

using nlohmann::json;

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

const char* format_name(Format f) {
    switch (f) {
        case Format::Dense32: return "dense32";
        case Format::Bitmap8: return "bitmap8";
        case Format::Adaptive: return "adaptive";
    }
    return "?";
}

const char* schedule_name(Schedule s) {
    switch (s) {
        case Schedule::Naive: return "naive";
        case Schedule::Partitioned: return "partitioned";
        case Schedule::Condense: return "condense";
    }
    return "?";
}

Format format_from_name(const std::string& s) {
    if (s == "dense32") return Format::Dense32;
    if (s == "bitmap8") return Format::Bitmap8;
    if (s == "adaptive") return Format::Adaptive;
    throw ConfigError("unknown format: " + s);
}

Schedule schedule_from_name(const std::string& s) {
    if (s == "naive") return Schedule::Naive;
    if (s == "partitioned") return Schedule::Partitioned;
    if (s == "condense") return Schedule::Condense;
    throw ConfigError("unknown schedule: " + s);
}

HwConfig default_hw() {
    const char* path = std::getenv("MEGA_DEFAULTS");
    if (path == nullptr || *path == '\0') return HwConfig{};
    std::ifstream in(path);
    if (!in) throw ConfigError(std::string("MEGA_DEFAULTS file not readable: ") + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return HwConfig::from_json(ss.str());
}

void ExperimentSpec::validate() const {
    if (source.preset.empty() && (source.edges_path.empty() || source.features_path.empty())) {
        throw ConfigError("experiment needs a preset or edge/feature files");
    }
    if (!source.edges_path.empty()) {
        std::ifstream f(source.edges_path);
        if (!f) throw ConfigError("edge file not readable: " + source.edges_path);
    }
    if (!source.features_path.empty()) {
        std::ifstream f(source.features_path);
        if (!f) throw ConfigError("feature file not readable: " + source.features_path);
    }
    if (method == PartitionMethod::Import) {
        std::ifstream f(import_path);
        if (!f) throw ConfigError("partition import file not readable: " + import_path);
    }
    if (sweep.formats.empty() || sweep.schedules.empty()) {
        throw ConfigError("sweep axes must be non-empty");
    }
    if (partition_k < 1) throw ConfigError("partition k must be >= 1");
    lengths.validate();
    for (const auto& len : sweep.lengths) len.validate();
}

namespace {

json lengths_to_json(const PackageLengths& l) {
    return json{l.short_bits, l.medium_bits, l.long_bits};
}

PackageLengths lengths_from_json(const json& j) {
    PackageLengths l;
    l.short_bits = j.at(0).get<int>();
    l.medium_bits = j.at(1).get<int>();
    l.long_bits = j.at(2).get<int>();
    return l;
}

} // namespace

std::string ExperimentSpec::resolved_json() const {
    json j;
    j["name"] = name;
    j["source"] = {{"preset", source.preset},
                   {"edges", source.edges_path},
                   {"features", source.features_path},
                   {"seed", source.seed},
                   {"gamma", source.gamma}};
    j["quant"] = {{"fp32", quant.fp32},
                  {"m_target_kb", quant.m_target_kb},
                  {"lambda", quant.lambda},
                  {"seed", quant.seed}};
    j["lengths"] = lengths_to_json(lengths);
    j["partition"] = {{"k", partition_k},
                      {"method", method == PartitionMethod::Import ? "import" : "bfs_greedy"},
                      {"import_path", import_path}};
    j["hw"] = json::parse(hw.to_json());
    json layers_j = json::array();
    for (const auto& l : layers) {
        layers_j.push_back({{"in", l.in_dim},
                            {"out", l.out_dim},
                            {"agg", l.agg == AggregationOp::Mean ? "mean" : "add"}});
    }
    j["layers"] = layers_j;
    json sf = json::array(), ss = json::array(), sl = json::array();
    for (Format f : sweep.formats) sf.push_back(format_name(f));
    for (Schedule s : sweep.schedules) ss.push_back(schedule_name(s));
    for (const auto& l : sweep.lengths) sl.push_back(lengths_to_json(l));
    j["sweep"] = {{"formats", sf}, {"schedules", ss}, {"lengths", sl}};
    j["weight_seed"] = weight_seed;
    return j.dump(2);
}

ExperimentSpec ExperimentSpec::from_json(const std::string& text) {
    json j = json::parse(text);
    ExperimentSpec spec;
    spec.name = j.value("name", spec.name);
    if (j.contains("source")) {
        const auto& s = j["source"];
        spec.source.preset = s.value("preset", "");
        spec.source.edges_path = s.value("edges", "");
        spec.source.features_path = s.value("features", "");
        spec.source.seed = s.value("seed", spec.source.seed);
        spec.source.gamma = s.value("gamma", spec.source.gamma);
    }
    if (j.contains("quant")) {
        const auto& q = j["quant"];
        if (q.is_string() && q.get<std::string>() == "fp32") {
            spec.quant.fp32 = true;
        } else {
            spec.quant.fp32 = q.value("fp32", false);
            spec.quant.m_target_kb = q.value("m_target_kb", spec.quant.m_target_kb);
            spec.quant.lambda = q.value("lambda", spec.quant.lambda);
            spec.quant.seed = q.value("seed", spec.quant.seed);
        }
    }
    if (j.contains("lengths")) spec.lengths = lengths_from_json(j["lengths"]);
    if (j.contains("partition")) {
        const auto& p = j["partition"];
        spec.partition_k = p.value("k", spec.partition_k);
        std::string m = p.value("method", "bfs_greedy");
        if (m == "import") {
            spec.method = PartitionMethod::Import;
        } else if (m == "bfs_greedy") {
            spec.method = PartitionMethod::BfsGreedy;
        } else {
            throw ConfigError("unknown partition method: " + m);
        }
        spec.import_path = p.value("import_path", "");
    }
    if (j.contains("hw")) spec.hw = HwConfig::from_json(j["hw"].dump());
    else spec.hw = default_hw();
    if (j.contains("layers")) {
        for (const auto& l : j["layers"]) {
            LayerSpec ls;
            ls.in_dim = l.at("in").get<int32_t>();
            ls.out_dim = l.at("out").get<int32_t>();
            std::string agg = l.value("agg", "add");
            ls.agg = agg == "mean" ? AggregationOp::Mean : AggregationOp::Add;
            spec.layers.push_back(ls);
        }
    }
    if (j.contains("sweep")) {
        const auto& s = j["sweep"];
        for (const auto& f : s.value("formats", json::array())) {
            spec.sweep.formats.push_back(format_from_name(f.get<std::string>()));
        }
        for (const auto& sc : s.value("schedules", json::array())) {
            spec.sweep.schedules.push_back(schedule_from_name(sc.get<std::string>()));
        }
        for (const auto& l : s.value("lengths", json::array())) {
            spec.sweep.lengths.push_back(lengths_from_json(l));
        }
    }
    if (spec.sweep.formats.empty()) spec.sweep.formats = {Format::Adaptive};
    if (spec.sweep.schedules.empty()) spec.sweep.schedules = {Schedule::Condense};
    spec.weight_seed = j.value("weight_seed", spec.weight_seed);
    return spec;
}

namespace {

Graph load_source(const GraphSource& src) {
    if (!src.preset.empty()) {
        return synth_graph(preset_by_name(src.preset), src.seed, src.gamma);
    }
    return load_graph(src.edges_path, src.features_path, Normalization::GcnSym);
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace

std::string ExperimentBundle::csv() const {
    std::string out = "name,fingerprint,format,schedule,len_short,len_medium,len_long,error,";
    SimReport blank;
    out += blank.csv_header();
    out += "\n";
    for (const auto& p : points) {
        out += name + "," + p.fingerprint + "," + format_name(p.format) + "," +
               schedule_name(p.schedule) + "," + std::to_string(p.lengths.short_bits) + "," +
               std::to_string(p.lengths.medium_bits) + "," +
               std::to_string(p.lengths.long_bits) + "," + p.error + "," + p.report.csv_row() +
               "\n";
    }
    return out;
}

std::string ExperimentBundle::to_json() const {
    json j;
    j["name"] = name;
    j["resolved_spec"] = json::parse(resolved_spec);
    json pts = json::array();
    for (const auto& p : points) {
        json pj;
        pj["fingerprint"] = p.fingerprint;
        pj["format"] = format_name(p.format);
        pj["schedule"] = schedule_name(p.schedule);
        pj["lengths"] = lengths_to_json(p.lengths);
        pj["error"] = p.error;
        pj["report"] = json::parse(p.report.to_json());
        pts.push_back(pj);
    }
    j["points"] = pts;
    return j.dump(2);
}

ExperimentBundle run_experiment(const ExperimentSpec& spec, int jobs) {
    spec.validate();
    ExperimentBundle bundle;
    bundle.name = spec.name;
    bundle.resolved_spec = spec.resolved_json();

    Graph g = load_source(spec.source);

    std::vector<LayerSpec> layers = spec.layers;
    if (layers.empty()) {
        layers.push_back({g.feature_dim, 16, AggregationOp::Add});
        layers.push_back({16, 8, AggregationOp::Add});
    }

    // Shared stages run once: quantization parameters and the partition plan.
    QuantParams qp;
    bool have_qp = false;
    std::string shared_error;
    try {
        if (!spec.quant.fp32) {
            std::mt19937_64 wrng(spec.weight_seed);
            std::uniform_real_distribution<double> ud(-0.5, 0.5);
            std::vector<double> w(static_cast<size_t>(g.feature_dim) * layers[0].out_dim);
            for (auto& v : w) v = ud(wrng);
            QuantizedWeights wq = quantize_weights(w, g.feature_dim, layers[0].out_dim);
            OptimizeResult opt =
                optimize_params(g, wq, spec.quant.m_target_kb, spec.quant.lambda, spec.quant.seed);
            qp = opt.params;
            have_qp = true;
        }
    } catch (const std::exception& e) {
        shared_error = std::string("quantize: ") + e.what();
    }
    PartitionPlan plan;
    bool have_plan = false;
    if (shared_error.empty()) {
        try {
            plan = partition_graph(g, spec.partition_k, spec.method, spec.import_path);
            have_plan = true;
        } catch (const std::exception& e) {
            shared_error = std::string("partition: ") + e.what();
        }
    }

    std::vector<PackageLengths> len_axis = spec.sweep.lengths;
    if (len_axis.empty()) len_axis.push_back(spec.lengths);

    struct Coord {
        Format f;
        Schedule s;
        PackageLengths l;
    };
    std::vector<Coord> coords;
    for (Format f : spec.sweep.formats) {
        for (Schedule s : spec.sweep.schedules) {
            for (const auto& l : len_axis) coords.push_back({f, s, l});
        }
    }

    std::vector<PointResult> results(coords.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= coords.size()) return;
            const Coord& c = coords[i];
            PointResult& pr = results[i];
            pr.format = c.f;
            pr.schedule = c.s;
            pr.lengths = c.l;
            std::string key = bundle.resolved_spec + "|" + format_name(c.f) + "|" +
                              schedule_name(c.s) + "|" + std::to_string(c.l.short_bits) + "," +
                              std::to_string(c.l.medium_bits) + "," +
                              std::to_string(c.l.long_bits);
            pr.fingerprint = hex64(fnv1a(key));
            if (!shared_error.empty()) {
                pr.error = shared_error;
                pr.report.partial = true;
                continue;
            }
            try {
                RunConfig run;
                run.format = c.f;
                run.schedule = c.s;
                run.quantized = !spec.quant.fp32;
                run.layers = layers;
                run.lengths = c.l;
                run.weight_seed = spec.weight_seed;
                const PartitionPlan* pp = have_plan ? &plan : nullptr;
                const QuantParams* qpp = have_qp ? &qp : nullptr;
                pr.report = simulate(g, spec.hw, run, pp, qpp);
            } catch (const std::exception& e) {
                pr.error = e.what();
                pr.report.partial = true;
            }
        }
    };
    int n_threads = std::max(1, jobs);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::sort(results.begin(), results.end(), [](const PointResult& a, const PointResult& b) {
        return a.fingerprint < b.fingerprint;
    });
    bundle.points = std::move(results);
    return bundle;
}

std::string storage_ratio_csv(const QuantizedFeatures& q, PackageLengths lengths) {
    StorageReport r = storage_report(q, lengths);
    const double dense = static_cast<double>(r.bits_dense);
    std::string out = "representation,bits,ratio_to_dense\n";
    auto row = [&](const char* name, uint64_t bits) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", bits / dense);
        out += std::string(name) + "," + std::to_string(bits) + "," + buf + "\n";
    };
    row("dense", r.bits_dense);
    row("bitmap", r.bits_bitmap);
    row("csr", r.bits_csr);
    row("fixed_package", r.bits_fixed_package);
    row("adaptive_package", r.bits_adaptive);
    row("ideal", r.bits_ideal);
    return out;
}

} // namespace mega
