#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mega/graph.hpp"

namespace mega {

/// Per-degree learned quantization tables. Entry k holds the parameters for
/// in-degree k+1; degrees are clamped to [1, degree_index_cap] before lookup
/// (degree-0 nodes share the first entry).
struct QuantParams {
    std::vector<double> scales;
    std::vector<int> bitwidths;  // each in [1, 8]
    int degree_index_cap = 0;

    void validate() const;
    std::string to_json() const;
    static QuantParams from_json(const std::string& text);
};

struct QuantizedFeatures {
    int32_t num_nodes = 0;
    int32_t feature_dim = 0;
    std::vector<int8_t> values;          // row-major N x F
    std::vector<double> node_scale;      // alpha_i
    std::vector<uint8_t> node_bitwidth;  // b_i in [1, 8]

    int8_t value(int32_t i, int32_t j) const {
        return values[static_cast<size_t>(i) * feature_dim + j];
    }
};

struct QuantizedWeights {
    int32_t rows = 0;  // F
    int32_t cols = 0;  // F2
    std::vector<int8_t> values;    // row-major, |v| <= 7 (4-bit)
    std::vector<double> col_scale; // beta_j
};

int32_t quantize_value(double x, double alpha, int bitwidth);

QuantizedFeatures quantize_features(const std::vector<float>& x, int32_t num_nodes,
                                    int32_t feature_dim, const DegreeProfile& profile,
                                    const QuantParams& params);

std::vector<double> dequantize(const QuantizedFeatures& q);

QuantizedWeights quantize_weights(const std::vector<double>& w, int32_t rows, int32_t cols);

std::vector<double> dequantize_weights(const QuantizedWeights& w);

// Integer product scaled by alpha_i * beta_j (row/column scale outer product).
std::vector<double> integer_matmul(const QuantizedFeatures& xq, const QuantizedWeights& wq);

double memory_penalty(const std::vector<std::vector<uint8_t>>& node_bitwidths,
                      const std::vector<int>& dims, double m_target_kb);

struct OptimizeResult {
    QuantParams params;
    bool feasible = true;   // false when m_target is below the all-1-bit floor
    double proxy_mse = 0.0;
    double total_feature_bits = 0.0;
};

OptimizeResult optimize_params(const Graph& g, const QuantizedWeights& wq,
                               double m_target_kb, double lambda, uint64_t seed);

double compression_ratio(const QuantizedFeatures& q);
// Multi-layer variant: feature-bit-weighted mean bitwidth across layers.
double compression_ratio(const std::vector<std::vector<uint8_t>>& node_bitwidths,
                         const std::vector<int>& dims);

} // namespace mega
