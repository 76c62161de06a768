#include "mega/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "mega/errors.hpp"

namespace mega {

const std::vector<DatasetPreset>& all_presets() {
    // Node/edge/feature/degree columns follow the usual public statistics of
    // these datasets. Feature sparsity is a generator knob, not a claim.
    static const std::vector<DatasetPreset> presets = {
        {"cora", 2708, 10556, 1433, 3.90, 0.30},
        {"citeseer", 3327, 9104, 3703, 2.74, 0.45},
        {"pubmed", 19717, 88648, 500, 4.50, 0.55},
        {"nell", 65755, 251550, 61278, 3.83, 0.70},
        {"reddit", 232965, 114615892, 602, 491.99, 0.48},
    };
    return presets;
}

DatasetPreset preset_by_name(const std::string& name) {
    for (const auto& p : all_presets()) {
        if (p.name == name) return p;
    }
    throw ConfigError("unknown dataset preset: " + name);
}

namespace {

std::vector<int32_t> compute_in_degree(int32_t n,
                                       const std::vector<std::pair<int32_t, int32_t>>& edges) {
    std::vector<int32_t> deg(n, 0);
    for (const auto& [src, dst] : edges) {
        (void)src;
        deg[dst]++;
    }
    return deg;
}

} // namespace

Graph build_graph(int32_t num_nodes, std::vector<std::pair<int32_t, int32_t>> edges,
                  std::vector<float> features, int32_t feature_dim, Normalization norm) {
    if (num_nodes < 0) throw ConfigError("negative node count");
    for (const auto& [src, dst] : edges) {
        if (src < 0 || src >= num_nodes || dst < 0 || dst >= num_nodes) {
            throw RangeError("edge endpoint out of range [0, " + std::to_string(num_nodes) +
                             "): " + std::to_string(src) + " -> " + std::to_string(dst));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    Graph g;
    g.num_nodes = num_nodes;
    g.num_edges = static_cast<int64_t>(edges.size());
    g.feature_dim = feature_dim;
    g.features = std::move(features);
    if (!g.features.empty() &&
        g.features.size() != static_cast<size_t>(num_nodes) * feature_dim) {
        throw ConfigError("feature matrix size does not match num_nodes * feature_dim");
    }
    g.raw_in_degree = compute_in_degree(num_nodes, edges);
    g.raw_edges = edges;

    // Assemble the stored edge set (possibly self-loop-augmented) with weights.
    std::vector<std::pair<int32_t, int32_t>> stored = edges;
    if (norm == Normalization::GcnSym) {
        for (int32_t i = 0; i < num_nodes; ++i) stored.emplace_back(i, i);
        std::sort(stored.begin(), stored.end());
        stored.erase(std::unique(stored.begin(), stored.end()), stored.end());
    }

    auto& csc = g.adjacency;
    csc.col_offsets.assign(static_cast<size_t>(num_nodes) + 1, 0);
    for (const auto& [src, dst] : stored) {
        (void)dst;
        csc.col_offsets[static_cast<size_t>(src) + 1]++;
    }
    for (int32_t j = 0; j < num_nodes; ++j) csc.col_offsets[j + 1] += csc.col_offsets[j];
    csc.row_indices.resize(stored.size());
    csc.weights.resize(stored.size());

    std::vector<int64_t> cursor(csc.col_offsets.begin(), csc.col_offsets.end() - 1);
    for (const auto& [src, dst] : stored) {
        int64_t pos = cursor[src]++;
        csc.row_indices[pos] = dst;
        double w = 1.0;
        switch (norm) {
            case Normalization::GcnSym: {
                // Self-loop-augmented degree d_v = 1 + in_degree(v).
                double ds = 1.0 + g.raw_in_degree[src];
                double dd = 1.0 + g.raw_in_degree[dst];
                w = 1.0 / std::sqrt(ds * dd);
                break;
            }
            case Normalization::Add:
                w = 1.0;
                break;
            case Normalization::Mean:
                w = 1.0 / static_cast<double>(std::max(1, g.raw_in_degree[dst]));
                break;
        }
        csc.weights[pos] = w;
    }
    return g;
}

Graph load_graph(const std::string& edge_list_path, const std::string& features_path,
                 Normalization norm) {
    int32_t n = 0, f = 0;
    std::vector<float> feats = read_features(features_path, &n, &f);

    std::ifstream in(edge_list_path);
    if (!in) throw ParseError("cannot open edge list: " + edge_list_path);
    std::vector<std::pair<int32_t, int32_t>> edges;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        int64_t src, dst;
        if (!(ls >> src >> dst)) {
            throw ParseError(edge_list_path + ":" + std::to_string(line_no) +
                             ": malformed edge line");
        }
        if (src < 0 || src >= n || dst < 0 || dst >= n) {
            throw RangeError(edge_list_path + ":" + std::to_string(line_no) +
                             ": node index out of range for N=" + std::to_string(n));
        }
        edges.emplace_back(static_cast<int32_t>(src), static_cast<int32_t>(dst));
    }
    return build_graph(n, std::move(edges), std::move(feats), f, norm);
}

Graph synth_graph(const DatasetPreset& preset, uint64_t seed, double gamma) {
    if (preset.num_nodes <= 0 || preset.num_edges < 0 || preset.feature_len <= 0) {
        throw ConfigError("preset fields must be positive");
    }
    if (gamma < 0.0) throw ConfigError("degree/feature coupling gamma must be >= 0");
    const int64_t n = preset.num_nodes;
    if (preset.num_edges > n * (n - 1)) {
        throw ConfigError("infeasible edge count: " + std::to_string(preset.num_edges) +
                          " > N*(N-1)");
    }

    std::mt19937_64 rng(seed);
    std::vector<std::pair<int32_t, int32_t>> edges;
    edges.reserve(preset.num_edges);

    // Preferential attachment on in-degree: node i issues q_i edges to earlier
    // nodes, targets sampled from a bag where node t appears 1 + in_degree(t)
    // times. Duplicate targets are rejected.
    std::vector<int32_t> bag;
    bag.reserve(static_cast<size_t>(n) + preset.num_edges);
    bag.push_back(0);
    std::vector<int32_t> indeg(n, 0);
    int64_t remaining = preset.num_edges;
    std::vector<char> used(n, 0);
    for (int32_t i = 1; i < n && remaining > 0; ++i) {
        int64_t nodes_left = n - i;
        int64_t q = std::min<int64_t>(i, (remaining + nodes_left - 1) / nodes_left);
        std::vector<int32_t> picked;
        picked.reserve(q);
        for (int64_t e = 0; e < q; ++e) {
            int32_t t = -1;
            for (int attempt = 0; attempt < 32; ++attempt) {
                int32_t cand = bag[rng() % bag.size()];
                if (!used[cand]) { t = cand; break; }
            }
            if (t < 0) {
                // Bag saturated with duplicates: linear scan for any unused earlier node.
                for (int32_t cand = 0; cand < i; ++cand) {
                    if (!used[cand]) { t = cand; break; }
                }
            }
            if (t < 0) break;  // all earlier nodes already targeted
            used[t] = 1;
            picked.push_back(t);
        }
        for (int32_t t : picked) {
            used[t] = 0;
            edges.emplace_back(i, t);
            indeg[t]++;
            bag.push_back(t);
            --remaining;
        }
        bag.push_back(i);
    }
    // Top-up pass when early caps left edges unplaced: scan deterministic pairs.
    if (remaining > 0) {
        std::vector<std::pair<int32_t, int32_t>> have = edges;
        std::sort(have.begin(), have.end());
        for (int32_t s = 0; s < n && remaining > 0; ++s) {
            for (int32_t d = 0; d < n && remaining > 0; ++d) {
                if (s == d) continue;
                if (!std::binary_search(have.begin(), have.end(), std::make_pair(s, d))) {
                    edges.emplace_back(s, d);
                    indeg[d]++;
                    --remaining;
                }
            }
        }
    }

    // Non-zero magnitudes are bounded away from zero (0.6 + 0.7|N(0,1)|) so
    // the generated sparsity is a property of the data, not of whatever scale
    // a downstream quantizer happens to pick; zeros are sampled i.i.d. at the
    // preset rate.
    const int32_t f = preset.feature_len;
    std::vector<float> feats(static_cast<size_t>(n) * f);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    std::uniform_real_distribution<float> uf(0.0f, 1.0f);
    for (auto& v : feats) {
        float u = nd(rng);
        float keep = uf(rng);
        if (keep < preset.feature_sparsity) {
            v = 0.0f;
        } else {
            float mag = 0.6f + 0.7f * std::fabs(u);
            v = u < 0.0f ? -mag : mag;
        }
    }
    // Degree/feature coupling: higher in-degree nodes carry larger magnitudes.
    if (gamma > 0.0) {
        for (int64_t i = 0; i < n; ++i) {
            float scale = static_cast<float>(std::pow(1.0 + indeg[i], gamma));
            for (int32_t j = 0; j < f; ++j) feats[i * f + j] *= scale;
        }
    }

    return build_graph(static_cast<int32_t>(n), std::move(edges), std::move(feats), f,
                       Normalization::Add);
}

DegreeProfile degree_profile(const Graph& g) {
    DegreeProfile p;
    p.in_degree = g.raw_in_degree;
    p.max_degree = 0;
    for (int32_t d : p.in_degree) p.max_degree = std::max(p.max_degree, d);
    return p;
}

Graph cap_in_neighbors(const Graph& g, int32_t cap, uint64_t seed, Normalization norm) {
    if (cap <= 0) throw ConfigError("sample cap must be positive");
    // Group raw edges by destination, keep at most `cap` per node.
    std::vector<std::vector<int32_t>> in_lists(g.num_nodes);
    for (const auto& [src, dst] : g.raw_edges) in_lists[dst].push_back(src);
    std::mt19937_64 rng(seed);
    std::vector<std::pair<int32_t, int32_t>> kept;
    for (int32_t v = 0; v < g.num_nodes; ++v) {
        auto& lst = in_lists[v];
        if (static_cast<int32_t>(lst.size()) > cap) {
            std::shuffle(lst.begin(), lst.end(), rng);
            lst.resize(cap);
        }
        for (int32_t s : lst) kept.emplace_back(s, v);
    }
    return build_graph(g.num_nodes, std::move(kept), g.features, g.feature_dim, norm);
}

void write_features(const std::string& path, const std::vector<float>& data,
                    int32_t num_nodes, int32_t feature_dim) {
    if (data.size() != static_cast<size_t>(num_nodes) * feature_dim) {
        throw ConfigError("feature data size mismatch");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out.write("MEGF", 4);
    uint32_t n = static_cast<uint32_t>(num_nodes), f = static_cast<uint32_t>(feature_dim);
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&f), 4);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
}

std::vector<float> read_features(const std::string& path, int32_t* num_nodes,
                                 int32_t* feature_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open features file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MEGF", 4) != 0) {
        throw ParseError("bad features magic in " + path);
    }
    uint32_t n = 0, f = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&f), 4);
    if (!in) throw ParseError("truncated features header in " + path);
    std::vector<float> data(static_cast<size_t>(n) * f);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!in) throw ParseError("truncated features payload in " + path);
    *num_nodes = static_cast<int32_t>(n);
    *feature_dim = static_cast<int32_t>(f);
    return data;
}

void write_edge_list(const std::string& path, const Graph& g) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out << "# " << g.num_nodes << " nodes, " << g.num_edges << " edges\n";
    for (const auto& [s, d] : g.raw_edges) out << s << " " << d << "\n";
}

} // namespace mega
