#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mega/codec.hpp"
#include "mega/graph.hpp"
#include "mega/partition.hpp"
#include "mega/quant.hpp"
#include "mega/sim.hpp"

namespace mega {

struct GraphSource {
    std::string preset;          // one of the dataset presets, or empty
    std::string edges_path;      // used when preset is empty
    std::string features_path;
    uint64_t seed = 1;
    double gamma = 0.0;          // degree/feature-magnitude coupling for synth
};

struct QuantSettings {
    bool fp32 = false;           // skip quantization entirely
    double m_target_kb = 64.0;
    double lambda = 1.0;
    uint64_t seed = 7;
};

struct SweepAxes {
    std::vector<Format> formats;
    std::vector<Schedule> schedules;
    std::vector<PackageLengths> lengths;
};

struct ExperimentSpec {
    std::string name = "experiment";
    GraphSource source;
    QuantSettings quant;
    PackageLengths lengths;      // default when the lengths axis is empty
    int32_t partition_k = 2;
    PartitionMethod method = PartitionMethod::BfsGreedy;
    std::string import_path;
    HwConfig hw;
    std::vector<LayerSpec> layers;
    SweepAxes sweep;
    uint64_t weight_seed = 1;

    void validate() const;
    // Canonical JSON with every default filled in; hashing input for the
    // per-point config fingerprint.
    std::string resolved_json() const;
    static ExperimentSpec from_json(const std::string& text);
};

struct PointResult {
    Format format = Format::Dense32;
    Schedule schedule = Schedule::Naive;
    PackageLengths lengths;
    std::string fingerprint;     // FNV-1a of resolved spec + point coordinates
    std::string error;           // empty on success
    SimReport report;
};

struct ExperimentBundle {
    std::string name;
    std::string resolved_spec;
    std::vector<PointResult> points;  // sorted by fingerprint

    std::string csv() const;
    std::string to_json() const;
};

uint64_t fnv1a(const std::string& s);

// Hardware defaults, optionally overridden by a JSON file named in the
// MEGA_DEFAULTS environment variable.
HwConfig default_hw();

const char* format_name(Format f);
const char* schedule_name(Schedule s);
Format format_from_name(const std::string& s);
Schedule schedule_from_name(const std::string& s);

ExperimentBundle run_experiment(const ExperimentSpec& spec, int jobs = 1);

// Per-format storage sizes normalized to the dense-32 baseline, one CSV
// row per representation.
std::string storage_ratio_csv(const QuantizedFeatures& q, PackageLengths lengths = {});

} // namespace mega
