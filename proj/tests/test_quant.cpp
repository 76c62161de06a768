#include <doctest.h>

#include <cmath>
#include <random>

#include "mega/errors.hpp"
#include "mega/graph.hpp"
#include "mega/quant.hpp"

using namespace mega;

namespace {

// Independent oracle: literal transcription of the clamped round-to-nearest
// quantizer, written without reference to the library implementation.
int oracle_quantize(double x, double alpha, int b) {
    double limit = std::pow(2.0, b - 1) - 1.0;
    int sign = (x > 0) - (x < 0);
    double mag = std::fabs(x);
    double q;
    if (mag < alpha * limit) {
        q = std::floor(mag / alpha + 0.5);
    } else {
        q = limit;
    }
    return sign * static_cast<int>(q);
}

QuantParams uniform_params(double alpha, int b, int cap) {
    QuantParams p;
    p.scales.assign(cap, alpha);
    p.bitwidths.assign(cap, b);
    p.degree_index_cap = cap;
    return p;
}

} // namespace

TEST_CASE("quantize_value hand-traced cases") {
    // alpha=0.5, b=3: limit 3, threshold at |x| < 1.5
    CHECK(quantize_value(1.3, 0.5, 3) == 3);    // floor(2.6+0.5)=3, still < limit path
    CHECK(quantize_value(1.4, 0.5, 3) == 3);
    CHECK(quantize_value(2.0, 0.5, 3) == 3);    // clamped
    CHECK(quantize_value(-2.0, 0.5, 3) == -3);
    CHECK(quantize_value(0.24, 0.5, 3) == 0);   // rounds down
    CHECK(quantize_value(0.25, 0.5, 3) == 1);   // ties round up in magnitude
    CHECK(quantize_value(0.0, 0.5, 3) == 0);
    CHECK(quantize_value(-0.26, 0.5, 3) == -1);
    // b=1 has zero levels: everything collapses to 0
    CHECK(quantize_value(100.0, 0.5, 1) == 0);
    // b=8: limit 127
    CHECK(quantize_value(1000.0, 1.0, 8) == 127);
}

TEST_CASE("quantize_value matches the brute-force oracle on random triples") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ux(-20.0, 20.0);
    std::uniform_real_distribution<double> ua(0.01, 4.0);
    std::uniform_int_distribution<int> ub(1, 8);
    for (int t = 0; t < 20000; ++t) {
        double x = ux(rng), a = ua(rng);
        int b = ub(rng);
        CAPTURE(x);
        CAPTURE(a);
        CAPTURE(b);
        REQUIRE(quantize_value(x, a, b) == oracle_quantize(x, a, b));
    }
}

TEST_CASE("quantize_value rejects bad parameters") {
    CHECK_THROWS_AS(quantize_value(1.0, 0.0, 4), ParamError);
    CHECK_THROWS_AS(quantize_value(1.0, -1.0, 4), ParamError);
    CHECK_THROWS_AS(quantize_value(1.0, 1.0, 0), ParamError);
    CHECK_THROWS_AS(quantize_value(1.0, 1.0, 9), ParamError);
}

TEST_CASE("per-node parameters are selected by clamped in-degree") {
    // entry k holds parameters for in-degree k+1
    // degrees: node0 -> 0 (clamps to 1), node1 -> 2, node2 -> 5 (clamps to cap 3)
    DegreeProfile prof;
    prof.in_degree = {0, 2, 5};
    prof.max_degree = 5;
    QuantParams p;
    p.scales = {0.25, 0.5, 1.0};
    p.bitwidths = {2, 3, 4};
    p.degree_index_cap = 3;
    std::vector<float> x = {1.0f, -1.0f, 1.0f, -1.0f, 1.0f, -1.0f};
    QuantizedFeatures q = quantize_features(x, 3, 2, prof, p);
    CHECK(q.node_scale[0] == 0.25);
    CHECK(q.node_bitwidth[0] == 2);
    CHECK(q.node_scale[1] == 0.5);
    CHECK(q.node_bitwidth[1] == 3);
    CHECK(q.node_scale[2] == 1.0);
    CHECK(q.node_bitwidth[2] == 4);
    CHECK(q.value(0, 0) == 1);   // clamped to 2^1-1
    CHECK(q.value(2, 1) == -1);
}

TEST_CASE("weight quantization is per-column 4-bit with zero-column guard") {
    // col0 max |w| = 14 -> beta 2; col1 all zero -> beta 1
    std::vector<double> w = {14.0, 0.0, -7.0, 0.0};
    QuantizedWeights wq = quantize_weights(w, 2, 2);
    CHECK(wq.col_scale[0] == doctest::Approx(2.0));
    CHECK(wq.col_scale[1] == doctest::Approx(1.0));
    CHECK(wq.values[0] == 7);
    CHECK(wq.values[2] == -4);  // floor(3.5+0.5)
    for (int8_t v : wq.values) CHECK(std::abs(v) <= 7);
}

TEST_CASE("integer matmul equals float matmul of dequantized operands") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ud(-3.0, 3.0);
    std::uniform_int_distribution<int> udim(1, 64);
    for (int t = 0; t < 100; ++t) {
        int32_t n = udim(rng), k = udim(rng), m = udim(rng);
        std::vector<float> x(static_cast<size_t>(n) * k);
        for (auto& v : x) v = static_cast<float>(ud(rng));
        std::vector<double> w(static_cast<size_t>(k) * m);
        for (auto& v : w) v = ud(rng);

        DegreeProfile prof;
        prof.in_degree.assign(n, 1);
        QuantizedFeatures xq = quantize_features(x, n, k, prof, uniform_params(0.5, 4, 1));
        QuantizedWeights wq = quantize_weights(w, k, m);

        std::vector<double> got = integer_matmul(xq, wq);
        std::vector<double> xd = dequantize(xq), wd = dequantize_weights(wq);
        for (int32_t i = 0; i < n; ++i) {
            for (int32_t j = 0; j < m; ++j) {
                double want = 0;
                for (int32_t p = 0; p < k; ++p) {
                    want += xd[static_cast<size_t>(i) * k + p] * wd[static_cast<size_t>(p) * m + j];
                }
                double rel = std::fabs(got[static_cast<size_t>(i) * m + j] - want) /
                             std::max(1.0, std::fabs(want));
                REQUIRE(rel < 1e-6);
            }
        }
    }
}

TEST_CASE("memory penalty worked case") {
    // two nodes at dim 128 with bitwidths 2 and 4: 768 bits = 0.09375 KB
    std::vector<std::vector<uint8_t>> bits = {{2, 4}};
    std::vector<int> dims = {128};
    CHECK(memory_penalty(bits, dims, 0.09375) == doctest::Approx(0.0));
    CHECK(memory_penalty(bits, dims, 0.0) == doctest::Approx(0.09375 * 0.09375));
    // quadratic growth away from the target
    CHECK(memory_penalty(bits, dims, 2.09375) == doctest::Approx(4.0));
    CHECK_THROWS_AS(memory_penalty(bits, {128, 64}, 1.0), ParamError);
}

TEST_CASE("compression ratio worked values") {
    QuantizedFeatures q;
    q.num_nodes = 10;
    q.node_bitwidth.assign(10, 4);
    CHECK(compression_ratio(q) == doctest::Approx(8.0));
    // published averages: 1.70 -> 18.8x, 2.74 -> 11.7x
    CHECK(32.0 / 1.70 == doctest::Approx(18.8).epsilon(0.01));
    CHECK(32.0 / 2.74 == doctest::Approx(11.7).epsilon(0.01));

    std::vector<std::vector<uint8_t>> bits = {{2, 2}, {8, 8}};
    std::vector<int> dims = {100, 100};
    CHECK(compression_ratio(bits, dims) == doctest::Approx(32.0 / 5.0));
}

TEST_CASE("quant params JSON round trip and validation") {
    QuantParams p = uniform_params(0.75, 5, 4);
    QuantParams q = QuantParams::from_json(p.to_json());
    CHECK(q.scales == p.scales);
    CHECK(q.bitwidths == p.bitwidths);
    CHECK(q.degree_index_cap == 4);

    QuantParams bad = p;
    bad.bitwidths[0] = 9;
    CHECK_THROWS_AS(bad.validate(), ParamError);
    bad = p;
    bad.scales[1] = 0.0;
    CHECK_THROWS_AS(bad.validate(), ParamError);
}

TEST_CASE("optimizer with zero lambda keeps full 8-bit precision") {
    DatasetPreset small{"small", 64, 160, 12, 2.5, 0.3};
    Graph g = synth_graph(small, 5, 1.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ud(-0.5, 0.5);
    std::vector<double> w(static_cast<size_t>(g.feature_dim) * 8);
    for (auto& v : w) v = ud(rng);
    QuantizedWeights wq = quantize_weights(w, g.feature_dim, 8);

    OptimizeResult r = optimize_params(g, wq, 1.0, 0.0, 3);
    for (int b : r.params.bitwidths) CHECK(b == 8);
    CHECK(r.feasible);
    r.params.validate();
}

TEST_CASE("optimizer flags infeasible memory targets") {
    DatasetPreset small{"small", 64, 160, 12, 2.5, 0.3};
    Graph g = synth_graph(small, 5, 1.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ud(-0.5, 0.5);
    std::vector<double> w(static_cast<size_t>(g.feature_dim) * 8);
    for (auto& v : w) v = ud(rng);
    QuantizedWeights wq = quantize_weights(w, g.feature_dim, 8);

    // all-1-bit floor is N*F/8192 KB = 64*12/8192
    OptimizeResult r = optimize_params(g, wq, 0.01, 10.0, 3);
    CHECK_FALSE(r.feasible);
    OptimizeResult ok = optimize_params(g, wq, 0.5, 10.0, 3);
    CHECK(ok.feasible);
}

TEST_CASE("optimizer approaches the memory target under a strong penalty") {
    DatasetPreset small{"small", 128, 384, 16, 3.0, 0.3};
    Graph g = synth_graph(small, 11, 1.0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> ud(-0.5, 0.5);
    std::vector<double> w(static_cast<size_t>(g.feature_dim) * 8);
    for (auto& v : w) v = ud(rng);
    QuantizedWeights wq = quantize_weights(w, g.feature_dim, 8);

    double m_target = 3.0 * 128 * 16 / 8192.0;  // 3-bit average
    OptimizeResult r = optimize_params(g, wq, m_target, 1e4, 3);
    double kb = r.total_feature_bits / 8192.0;
    CHECK(kb == doctest::Approx(m_target).epsilon(0.05));
    CHECK(r.feasible);
}
