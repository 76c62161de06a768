#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mega {

enum class Normalization { GcnSym, Add, Mean };

/// Compressed-sparse-column adjacency. Column j holds the out-edges of node
/// j; row_indices are the destination nodes. For GCN normalization each
/// stored weight is 1/sqrt(d_src * d_dst) with self-loop-augmented in-degrees.
struct Csc {
    std::vector<int64_t> col_offsets;  // size num_nodes + 1
    std::vector<int32_t> row_indices;
    std::vector<double> weights;

    int64_t entry_count() const { return static_cast<int64_t>(row_indices.size()); }
};

struct Graph {
    int32_t num_nodes = 0;
    // Deduplicated raw edge count, i.e. the un-normalized adjacency. The CSC
    // may contain num_edges + num_nodes entries when self loops were added.
    int64_t num_edges = 0;
    Csc adjacency;
    std::vector<float> features;  // row-major num_nodes x feature_dim
    int32_t feature_dim = 0;
    std::vector<int32_t> raw_in_degree;  // before self-loop augmentation
    std::vector<std::pair<int32_t, int32_t>> raw_edges;  // deduplicated, sorted

    float feature(int32_t i, int32_t j) const {
        return features[static_cast<size_t>(i) * feature_dim + j];
    }
};

struct DegreeProfile {
    std::vector<int32_t> in_degree;
    int32_t max_degree = 0;
};

struct DatasetPreset {
    std::string name;
    int32_t num_nodes = 0;
    int64_t num_edges = 0;
    int32_t feature_len = 0;
    double avg_degree = 0.0;
    double feature_sparsity = 0.0;  // fraction of zero feature entries
};

// Table-driven presets: cora, citeseer, pubmed, nell, reddit.
DatasetPreset preset_by_name(const std::string& name);
const std::vector<DatasetPreset>& all_presets();

Graph build_graph(int32_t num_nodes,
                  std::vector<std::pair<int32_t, int32_t>> edges,
                  std::vector<float> features,
                  int32_t feature_dim,
                  Normalization norm);

Graph load_graph(const std::string& edge_list_path,
                 const std::string& features_path,
                 Normalization norm);

Graph synth_graph(const DatasetPreset& preset, uint64_t seed, double gamma);

DegreeProfile degree_profile(const Graph& g);

// Caps the in-neighbors used during aggregation at `cap`, selected by seeded
// uniform sampling (GraphSage-style inference sampling).
Graph cap_in_neighbors(const Graph& g, int32_t cap, uint64_t seed, Normalization norm);

// Dense feature matrix file: header {magic "MEGF", u32 N, u32 F}, then
// N*F little-endian IEEE-754 floats, row-major.
void write_features(const std::string& path, const std::vector<float>& data,
                    int32_t num_nodes, int32_t feature_dim);
std::vector<float> read_features(const std::string& path, int32_t* num_nodes,
                                 int32_t* feature_dim);

void write_edge_list(const std::string& path, const Graph& g);

} // namespace mega
