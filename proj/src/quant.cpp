#include "mega/quant.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include <nlohmann/json.hpp>

#include "mega/errors.hpp"

namespace mega {

void QuantParams::validate() const {
    if (degree_index_cap <= 0) throw ParamError("degree_index_cap must be positive");
    if (scales.size() != static_cast<size_t>(degree_index_cap) ||
        bitwidths.size() != static_cast<size_t>(degree_index_cap)) {
        throw ParamError("quant param arrays must have length degree_index_cap");
    }
    for (double s : scales) {
        if (!(s > 0.0)) throw ParamError("all scales must be > 0");
    }
    for (int b : bitwidths) {
        if (b < 1 || b > 8) throw ParamError("bitwidths must be in [1, 8]");
    }
}

std::string QuantParams::to_json() const {
    nlohmann::json j;
    j["scales"] = scales;
    j["bitwidths"] = bitwidths;
    return j.dump(2);
}

QuantParams QuantParams::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    QuantParams p;
    p.scales = j.at("scales").get<std::vector<double>>();
    p.bitwidths = j.at("bitwidths").get<std::vector<int>>();
    p.degree_index_cap = static_cast<int>(p.scales.size());
    p.validate();
    return p;
}

int32_t quantize_value(double x, double alpha, int bitwidth) {
    if (!(alpha > 0.0)) throw ParamError("quantization scale must be > 0");
    if (bitwidth < 1 || bitwidth > 8) throw ParamError("bitwidth must be in [1, 8]");
    const double limit = static_cast<double>((1 << (bitwidth - 1)) - 1);
    const double ax = std::fabs(x);
    double mag;
    if (ax < alpha * limit) {
        mag = std::floor(ax / alpha + 0.5);
    } else {
        mag = limit;
    }
    if (x > 0.0) return static_cast<int32_t>(mag);
    if (x < 0.0) return -static_cast<int32_t>(mag);
    return 0;
}

namespace {

inline int degree_index(int32_t deg, int cap) {
    return std::min(std::max(deg, 1), cap) - 1;
}

} // namespace

QuantizedFeatures quantize_features(const std::vector<float>& x, int32_t num_nodes,
                                    int32_t feature_dim, const DegreeProfile& profile,
                                    const QuantParams& params) {
    params.validate();
    if (static_cast<int32_t>(profile.in_degree.size()) != num_nodes) {
        throw ParamError("degree profile does not cover all nodes");
    }
    QuantizedFeatures q;
    q.num_nodes = num_nodes;
    q.feature_dim = feature_dim;
    q.values.resize(static_cast<size_t>(num_nodes) * feature_dim);
    q.node_scale.resize(num_nodes);
    q.node_bitwidth.resize(num_nodes);
    for (int32_t i = 0; i < num_nodes; ++i) {
        int idx = degree_index(profile.in_degree[i], params.degree_index_cap);
        double alpha = params.scales[idx];
        int b = params.bitwidths[idx];
        q.node_scale[i] = alpha;
        q.node_bitwidth[i] = static_cast<uint8_t>(b);
        const size_t row = static_cast<size_t>(i) * feature_dim;
        for (int32_t j = 0; j < feature_dim; ++j) {
            q.values[row + j] = static_cast<int8_t>(quantize_value(x[row + j], alpha, b));
        }
    }
    return q;
}

std::vector<double> dequantize(const QuantizedFeatures& q) {
    std::vector<double> out(q.values.size());
    for (int32_t i = 0; i < q.num_nodes; ++i) {
        const size_t row = static_cast<size_t>(i) * q.feature_dim;
        for (int32_t j = 0; j < q.feature_dim; ++j) {
            out[row + j] = q.node_scale[i] * q.values[row + j];
        }
    }
    return out;
}

QuantizedWeights quantize_weights(const std::vector<double>& w, int32_t rows, int32_t cols) {
    if (rows <= 0 || cols <= 0) throw ParamError("weight matrix must be non-empty");
    QuantizedWeights out;
    out.rows = rows;
    out.cols = cols;
    out.values.resize(static_cast<size_t>(rows) * cols);
    out.col_scale.resize(cols);
    for (int32_t j = 0; j < cols; ++j) {
        double m = 0.0;
        for (int32_t i = 0; i < rows; ++i) {
            m = std::max(m, std::fabs(w[static_cast<size_t>(i) * cols + j]));
        }
        double beta = (m > 0.0) ? m / 7.0 : 1.0;
        out.col_scale[j] = beta;
        for (int32_t i = 0; i < rows; ++i) {
            out.values[static_cast<size_t>(i) * cols + j] =
                static_cast<int8_t>(quantize_value(w[static_cast<size_t>(i) * cols + j], beta, 4));
        }
    }
    return out;
}

std::vector<double> dequantize_weights(const QuantizedWeights& w) {
    std::vector<double> out(w.values.size());
    for (int32_t i = 0; i < w.rows; ++i) {
        for (int32_t j = 0; j < w.cols; ++j) {
            out[static_cast<size_t>(i) * w.cols + j] =
                w.col_scale[j] * w.values[static_cast<size_t>(i) * w.cols + j];
        }
    }
    return out;
}

std::vector<double> integer_matmul(const QuantizedFeatures& xq, const QuantizedWeights& wq) {
    if (xq.feature_dim != wq.rows) {
        throw ParamError("integer_matmul dimension mismatch: " + std::to_string(xq.feature_dim) +
                         " vs " + std::to_string(wq.rows));
    }
    const int32_t n = xq.num_nodes, k = xq.feature_dim, m = wq.cols;
    std::vector<double> out(static_cast<size_t>(n) * m, 0.0);
    for (int32_t i = 0; i < n; ++i) {
        const int8_t* xrow = &xq.values[static_cast<size_t>(i) * k];
        double* orow = &out[static_cast<size_t>(i) * m];
        std::vector<int64_t> acc(m, 0);
        for (int32_t p = 0; p < k; ++p) {
            int64_t xv = xrow[p];
            if (xv == 0) continue;
            const int8_t* wrow = &wq.values[static_cast<size_t>(p) * m];
            for (int32_t j = 0; j < m; ++j) acc[j] += xv * wrow[j];
        }
        for (int32_t j = 0; j < m; ++j) {
            orow[j] = static_cast<double>(acc[j]) * xq.node_scale[i] * wq.col_scale[j];
        }
    }
    return out;
}

double memory_penalty(const std::vector<std::vector<uint8_t>>& node_bitwidths,
                      const std::vector<int>& dims, double m_target_kb) {
    if (node_bitwidths.size() != dims.size()) {
        throw ParamError("memory_penalty: layer counts do not match");
    }
    double bits = 0.0;
    for (size_t l = 0; l < dims.size(); ++l) {
        double layer_bits = 0.0;
        for (uint8_t b : node_bitwidths[l]) layer_bits += b;
        bits += layer_bits * dims[l];
    }
    const double eta = 8.0 * 1024.0;
    double d = bits / eta - m_target_kb;
    return d * d;
}

double compression_ratio(const QuantizedFeatures& q) {
    if (q.num_nodes <= 0) throw ParamError("compression_ratio requires N > 0");
    double sum = 0.0;
    for (uint8_t b : q.node_bitwidth) sum += b;
    return 32.0 / (sum / q.num_nodes);
}

double compression_ratio(const std::vector<std::vector<uint8_t>>& node_bitwidths,
                         const std::vector<int>& dims) {
    if (node_bitwidths.size() != dims.size() || node_bitwidths.empty()) {
        throw ParamError("compression_ratio: layer counts do not match");
    }
    double bits = 0.0, weight = 0.0;
    for (size_t l = 0; l < dims.size(); ++l) {
        for (uint8_t b : node_bitwidths[l]) {
            bits += static_cast<double>(b) * dims[l];
            weight += dims[l];
        }
    }
    if (weight <= 0.0) throw ParamError("compression_ratio: empty layers");
    return 32.0 / (bits / weight);
}

// ---------------------------------------------------------------------------
// Desk-scale optimizer: coordinate descent over degree buckets. Scales are
// fitted by golden-section search on per-bucket reconstruction error;
// bitwidths move greedily under the aggregated-output proxy loss
// MSE(A*(Xq*Wq), A*(X*W)) + lambda * memory_penalty. Uniform-bitwidth
// configurations are evaluated as restart candidates so the result is never
// worse than the best uniform allocation.
// ---------------------------------------------------------------------------

namespace {

struct OptimizerState {
    const Graph* g = nullptr;
    const QuantizedWeights* wq = nullptr;
    std::vector<double> w_deq;      // F x F2
    std::vector<double> r_ref;      // N x F2, A * (X * W)
    std::vector<double> bq;         // N x F2, A-side operand from quantized X
    int32_t n = 0, f = 0, f2 = 0;
    int cap = 0;
    std::vector<int> bucket_of_degree;       // size cap
    std::vector<std::vector<int32_t>> bucket_nodes;
    std::vector<double> alpha;               // per bucket
    std::vector<int> bits;                   // per bucket
    double m_target = 0.0;
    double lambda = 0.0;
};

void matmul_rows(const OptimizerState& s, const std::vector<int32_t>& rows, double alpha,
                 int bits, std::vector<double>& dst) {
    // dst rows = alpha * quantize(x_row) * W
    for (int32_t i : rows) {
        const float* xrow = &s.g->features[static_cast<size_t>(i) * s.f];
        double* orow = &dst[static_cast<size_t>(i) * s.f2];
        std::fill(orow, orow + s.f2, 0.0);
        for (int32_t p = 0; p < s.f; ++p) {
            int32_t xv = quantize_value(xrow[p], alpha, bits);
            if (xv == 0) continue;
            const double scaled = alpha * xv;
            const double* wrow = &s.w_deq[static_cast<size_t>(p) * s.f2];
            for (int32_t j = 0; j < s.f2; ++j) orow[j] += scaled * wrow[j];
        }
    }
}

double aggregated_mse(const OptimizerState& s) {
    std::vector<double> r(static_cast<size_t>(s.n) * s.f2, 0.0);
    const Csc& a = s.g->adjacency;
    for (int32_t col = 0; col < s.n; ++col) {
        const double* brow = &s.bq[static_cast<size_t>(col) * s.f2];
        for (int64_t e = a.col_offsets[col]; e < a.col_offsets[col + 1]; ++e) {
            double w = a.weights[e];
            double* rrow = &r[static_cast<size_t>(a.row_indices[e]) * s.f2];
            for (int32_t j = 0; j < s.f2; ++j) rrow[j] += w * brow[j];
        }
    }
    double acc = 0.0;
    for (size_t i = 0; i < r.size(); ++i) {
        double d = r[i] - s.r_ref[i];
        acc += d * d;
    }
    return acc / static_cast<double>(r.size());
}

double total_bits(const OptimizerState& s) {
    double bits = 0.0;
    for (size_t k = 0; k < s.bucket_nodes.size(); ++k) {
        bits += static_cast<double>(s.bucket_nodes[k].size()) * s.f * s.bits[k];
    }
    return bits;
}

double loss(const OptimizerState& s) {
    double pen_d = total_bits(s) / (8.0 * 1024.0) - s.m_target;
    return aggregated_mse(s) + s.lambda * pen_d * pen_d;
}

// Feature-space reconstruction error of a node set at (alpha, bits);
// used by the scale fit, independent of the aggregation path.
double feature_err(const OptimizerState& s, const std::vector<int32_t>& nodes, double alpha,
                   int bits) {
    double acc = 0.0;
    for (int32_t i : nodes) {
        const float* xrow = &s.g->features[static_cast<size_t>(i) * s.f];
        for (int32_t j = 0; j < s.f; ++j) {
            double d = alpha * quantize_value(xrow[j], alpha, bits) - xrow[j];
            acc += d * d;
        }
    }
    return acc;
}

double fit_alpha_nodes(const OptimizerState& s, const std::vector<int32_t>& nodes, int bits) {
    double amax = 0.0;
    for (int32_t i : nodes) {
        const float* xrow = &s.g->features[static_cast<size_t>(i) * s.f];
        for (int32_t j = 0; j < s.f; ++j) amax = std::max(amax, std::fabs(double(xrow[j])));
    }
    if (amax <= 0.0) return 1.0;
    double levels = static_cast<double>((1 << (bits - 1)) - 1);
    if (levels < 1.0) levels = 1.0;
    // Golden-section on log(alpha) between a heavily-clamping and a
    // heavily-rounding extreme.
    double lo = std::log(amax / (levels * 16.0));
    double hi = std::log(amax * 2.0);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = feature_err(s, nodes, std::exp(x1), bits);
    double f2 = feature_err(s, nodes, std::exp(x2), bits);
    for (int it = 0; it < 24; ++it) {
        if (f1 <= f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = feature_err(s, nodes, std::exp(x1), bits);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = feature_err(s, nodes, std::exp(x2), bits);
        }
    }
    // The error curve is only piecewise smooth; keep the endpoint midpoint
    // unless a coarse sweep around it finds something strictly better.
    double best = std::exp(0.5 * (lo + hi));
    double best_err = feature_err(s, nodes, best, bits);
    for (int step = -4; step <= 4; ++step) {
        double cand = best * std::pow(1.12, step);
        double err = feature_err(s, nodes, cand, bits);
        if (err < best_err) {
            best_err = err;
            best = cand;
        }
    }
    return best;
}

double fit_alpha(const OptimizerState& s, int k, int bits) {
    return fit_alpha_nodes(s, s.bucket_nodes[k], bits);
}

void apply_bucket(OptimizerState& s, int k) {
    matmul_rows(s, s.bucket_nodes[k], s.alpha[k], s.bits[k], s.bq);
}

QuantParams expand_params(const OptimizerState& s) {
    QuantParams p;
    p.degree_index_cap = s.cap;
    p.scales.resize(s.cap);
    p.bitwidths.resize(s.cap);
    for (int d = 0; d < s.cap; ++d) {
        int k = s.bucket_of_degree[d];
        p.scales[d] = s.alpha[k];
        p.bitwidths[d] = s.bits[k];
    }
    return p;
}

} // namespace

OptimizeResult optimize_params(const Graph& g, const QuantizedWeights& wq,
                               double m_target_kb, double lambda, uint64_t seed) {
    if (!(m_target_kb > 0.0)) throw ParamError("m_target must be > 0");
    if (lambda < 0.0) throw ParamError("lambda must be >= 0");
    if (g.num_nodes <= 0 || g.feature_dim <= 0) throw ParamError("graph has no features");
    if (wq.rows != g.feature_dim) throw ParamError("weight rows must equal feature_dim");
    (void)seed;  // reserved for stochastic variants; current descent is deterministic

    OptimizerState s;
    s.g = &g;
    s.wq = &wq;
    s.n = g.num_nodes;
    s.f = g.feature_dim;
    s.f2 = wq.cols;
    s.m_target = m_target_kb;
    s.lambda = lambda;
    s.w_deq = dequantize_weights(wq);

    DegreeProfile profile = degree_profile(g);
    s.cap = std::max(1, profile.max_degree);

    // Degree population, then bucket merging: degree entries with fewer than
    // 8 nodes join the nearest lower populated bucket.
    std::vector<int64_t> pop(s.cap, 0);
    for (int32_t i = 0; i < s.n; ++i) pop[degree_index(profile.in_degree[i], s.cap)]++;
    std::vector<int> reps;
    for (int d = 0; d < s.cap; ++d) {
        if (pop[d] >= 8) reps.push_back(d);
    }
    if (reps.empty()) reps.push_back(0);
    s.bucket_of_degree.resize(s.cap);
    for (int d = 0; d < s.cap; ++d) {
        int k = 0;
        for (size_t r = 0; r < reps.size(); ++r) {
            if (reps[r] <= d) k = static_cast<int>(r);
        }
        s.bucket_of_degree[d] = k;
    }
    s.bucket_nodes.assign(reps.size(), {});
    for (int32_t i = 0; i < s.n; ++i) {
        s.bucket_nodes[s.bucket_of_degree[degree_index(profile.in_degree[i], s.cap)]].push_back(i);
    }

    // Reference output A * (X * W).
    std::vector<double> b_ref(static_cast<size_t>(s.n) * s.f2, 0.0);
    for (int32_t i = 0; i < s.n; ++i) {
        const float* xrow = &g.features[static_cast<size_t>(i) * s.f];
        double* orow = &b_ref[static_cast<size_t>(i) * s.f2];
        for (int32_t p = 0; p < s.f; ++p) {
            double xv = xrow[p];
            if (xv == 0.0) continue;
            const double* wrow = &s.w_deq[static_cast<size_t>(p) * s.f2];
            for (int32_t j = 0; j < s.f2; ++j) orow[j] += xv * wrow[j];
        }
    }
    s.r_ref.assign(static_cast<size_t>(s.n) * s.f2, 0.0);
    {
        const Csc& a = g.adjacency;
        for (int32_t col = 0; col < s.n; ++col) {
            const double* brow = &b_ref[static_cast<size_t>(col) * s.f2];
            for (int64_t e = a.col_offsets[col]; e < a.col_offsets[col + 1]; ++e) {
                double w = a.weights[e];
                double* rrow = &s.r_ref[static_cast<size_t>(a.row_indices[e]) * s.f2];
                for (int32_t j = 0; j < s.f2; ++j) rrow[j] += w * brow[j];
            }
        }
    }

    const size_t nb = s.bucket_nodes.size();
    s.alpha.assign(nb, 1.0);
    s.bits.assign(nb, lambda == 0.0 ? 8 : 4);
    s.bq.assign(static_cast<size_t>(s.n) * s.f2, 0.0);
    for (size_t k = 0; k < nb; ++k) {
        s.alpha[k] = fit_alpha(s, static_cast<int>(k), s.bits[k]);
        apply_bucket(s, static_cast<int>(k));
    }

    double floor_kb = static_cast<double>(s.n) * s.f / (8.0 * 1024.0);
    bool feasible = m_target_kb >= floor_kb;

    if (lambda > 0.0) {
        double cur = loss(s);
        for (int sweep = 0; sweep < 8; ++sweep) {
            bool changed = false;
            for (size_t k = 0; k < nb; ++k) {
                for (int dir : {+1, -1}) {
                    while (true) {
                        int nbits = s.bits[k] + dir;
                        if (nbits < 1 || nbits > 8) break;
                        double old_alpha = s.alpha[k];
                        int old_bits = s.bits[k];
                        s.bits[k] = nbits;
                        s.alpha[k] = fit_alpha(s, static_cast<int>(k), nbits);
                        apply_bucket(s, static_cast<int>(k));
                        double cand = loss(s);
                        if (cand < cur - 1e-18) {
                            cur = cand;
                            changed = true;
                        } else {
                            s.bits[k] = old_bits;
                            s.alpha[k] = old_alpha;
                            apply_bucket(s, static_cast<int>(k));
                            break;
                        }
                    }
                }
            }
            if (!changed) break;
        }
        // Uniform-allocation restart candidates.
        std::vector<double> best_alpha = s.alpha;
        std::vector<int> best_bits = s.bits;
        double best = cur;
        for (int b = 1; b <= 8; ++b) {
            for (size_t k = 0; k < nb; ++k) {
                s.bits[k] = b;
                s.alpha[k] = fit_alpha(s, static_cast<int>(k), b);
                apply_bucket(s, static_cast<int>(k));
            }
            double cand = loss(s);
            if (cand < best) {
                best = cand;
                best_alpha = s.alpha;
                best_bits = s.bits;
            }
        }
        s.alpha = best_alpha;
        s.bits = best_bits;
        for (size_t k = 0; k < nb; ++k) apply_bucket(s, static_cast<int>(k));
    }

    OptimizeResult res;
    res.params = expand_params(s);

    // The bitwidth search shares scales across merged buckets for statistical
    // stability; once bitwidths are fixed, refit the scale of every populated
    // degree entry on its own nodes. This only tightens reconstruction error
    // and leaves the bit budget unchanged.
    {
        std::vector<std::vector<int32_t>> index_nodes(s.cap);
        for (int32_t i = 0; i < s.n; ++i) {
            index_nodes[degree_index(profile.in_degree[i], s.cap)].push_back(i);
        }
        for (int d = 0; d < s.cap; ++d) {
            if (index_nodes[d].empty()) continue;
            double refit = fit_alpha_nodes(s, index_nodes[d], res.params.bitwidths[d]);
            double before = feature_err(s, index_nodes[d], res.params.scales[d],
                                        res.params.bitwidths[d]);
            double after =
                feature_err(s, index_nodes[d], refit, res.params.bitwidths[d]);
            if (after < before) res.params.scales[d] = refit;
            matmul_rows(s, index_nodes[d], res.params.scales[d], res.params.bitwidths[d],
                        s.bq);
        }
    }

    res.feasible = feasible;
    res.proxy_mse = aggregated_mse(s);
    res.total_feature_bits = total_bits(s);
    return res;
}

} // namespace mega
