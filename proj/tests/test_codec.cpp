#include <doctest.h>

#include <cstdio>
#include <random>

#include "mega/codec.hpp"
#include "mega/errors.hpp"

using namespace mega;

namespace {

QuantizedFeatures make_features(int32_t n, int32_t f, const std::vector<int8_t>& vals,
                                const std::vector<uint8_t>& bits) {
    QuantizedFeatures q;
    q.num_nodes = n;
    q.feature_dim = f;
    q.values = vals;
    q.node_scale.assign(n, 1.0);
    q.node_bitwidth = bits;
    return q;
}

QuantizedFeatures random_features(std::mt19937_64& rng, int32_t n, int32_t f, double sparsity) {
    std::uniform_int_distribution<int> ub(1, 8);
    std::uniform_real_distribution<double> uz(0.0, 1.0);
    QuantizedFeatures q;
    q.num_nodes = n;
    q.feature_dim = f;
    q.node_scale.assign(n, 1.0);
    q.node_bitwidth.resize(n);
    q.values.resize(static_cast<size_t>(n) * f);
    for (int32_t i = 0; i < n; ++i) {
        int b = ub(rng);
        q.node_bitwidth[i] = static_cast<uint8_t>(b);
        int maxmag = (1 << (b - 1)) - 1;
        std::uniform_int_distribution<int> uv(-maxmag, maxmag);
        for (int32_t j = 0; j < f; ++j) {
            int8_t v = 0;
            if (maxmag > 0 && uz(rng) >= sparsity) {
                v = static_cast<int8_t>(uv(rng));
            }
            q.values[static_cast<size_t>(i) * f + j] = v;
        }
    }
    return q;
}

bool same_payload(const QuantizedFeatures& a, const QuantizedFeatures& b) {
    return a.num_nodes == b.num_nodes && a.feature_dim == b.feature_dim &&
           a.values == b.values && a.node_bitwidth == b.node_bitwidth;
}

} // namespace

TEST_CASE("length settings are validated") {
    auto check = [](int s, int m, int l) { PackageLengths{s, m, l}.validate(); };
    CHECK_NOTHROW(check(64, 128, 192));
    CHECK_THROWS_AS(check(128, 64, 192), ConfigError);
    CHECK_THROWS_AS(check(0, 128, 192), ConfigError);
    CHECK_THROWS_AS(check(63, 128, 192), ConfigError);
    CHECK_THROWS_AS(check(64, 64, 192), ConfigError);
}

TEST_CASE("single package holds same-bitwidth values and decodes back") {
    // 3 values at b=3 -> 9 valid bits -> short mode, 55 pad bits
    QuantizedFeatures q = make_features(1, 5, {3, 0, -2, 1, 0}, {3});
    PackageStream s = encode(q);
    REQUIRE(s.packages.size() == 1);
    CHECK(s.packages[0].mode == 0);
    CHECK(s.packages[0].bitwidth == 3);
    CHECK(s.packages[0].valid_bits == 9);
    CHECK(s.padding_bits() == 55);
    CHECK(s.package_bits() == 5 + 64);
    CHECK(same_payload(decode(s, 5), q));
}

TEST_CASE("bitwidth change closes the open package") {
    QuantizedFeatures q = make_features(2, 2, {1, -1, 3, -3}, {2, 3});
    PackageStream s = encode(q);
    REQUIRE(s.packages.size() == 2);
    CHECK(s.packages[0].bitwidth == 2);
    CHECK(s.packages[0].valid_bits == 4);
    CHECK(s.packages[1].bitwidth == 3);
    CHECK(s.packages[1].valid_bits == 6);
    CHECK(same_payload(decode(s, 2), q));
}

TEST_CASE("a 62-bit run pads 2 bits in short mode but 130 in fixed-long mode") {
    // 31 two-bit values then a bitwidth change: the adaptive codec closes the
    // run into a 64-bit short package (2 pad bits); a fixed 192-bit package
    // would pad 130 bits for the same run.
    std::vector<int8_t> vals;
    std::vector<uint8_t> bits;
    std::vector<int8_t> row(40, 0);
    for (int j = 0; j < 31; ++j) row[j] = 1;
    vals.insert(vals.end(), row.begin(), row.end());
    bits.push_back(2);
    std::vector<int8_t> row2(40, 0);
    row2[0] = 3;
    vals.insert(vals.end(), row2.begin(), row2.end());
    bits.push_back(3);

    QuantizedFeatures q = make_features(2, 40, vals, bits);
    PackageStream s = encode(q);
    REQUIRE(s.packages.size() == 2);
    CHECK(s.packages[0].mode == 0);  // smallest mode that fits 62 bits
    CHECK(s.packages[0].valid_bits == 62);
    CHECK(s.lengths.mode_bits(0) - s.packages[0].valid_bits == 2);

    StorageReport r = storage_report(q);
    // fixed baseline spends one full long package per close
    CHECK(r.bits_fixed_package == 2 * (5 + 192) + 2ull * 40);  // packages + bitmap region
    CHECK(r.padding_bits == s.padding_bits());
    CHECK(same_payload(decode(s, 40), q));
}

TEST_CASE("capacity overflow closes at the long-mode boundary") {
    // 100 values at b=2 = 200 bits > 192: expect a long package (96 values)
    // then a short one (4 values).
    std::vector<int8_t> vals(128, 0);
    for (int j = 0; j < 100; ++j) vals[j] = (j % 2) ? 1 : -1;
    QuantizedFeatures q = make_features(1, 128, vals, {2});
    PackageStream s = encode(q);
    REQUIRE(s.packages.size() == 2);
    CHECK(s.packages[0].mode == 2);
    CHECK(s.packages[0].valid_bits == 192);
    CHECK(s.packages[1].mode == 0);
    CHECK(s.packages[1].valid_bits == 8);
    CHECK(same_payload(decode(s, 128), q));
}

TEST_CASE("encode rejects values outside the node bitwidth") {
    QuantizedFeatures q = make_features(1, 2, {4, 0}, {3});  // |4| > 2^2-1
    CHECK_THROWS_AS(encode(q), EncodeError);
    QuantizedFeatures q1 = make_features(1, 2, {1, 0}, {1});  // b=1 stores only zeros
    CHECK_THROWS_AS(encode(q1), EncodeError);
}

TEST_CASE("round trip holds across sparsity and bitwidth ranges") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> un(1, 40), uf(1, 50);
    std::uniform_real_distribution<double> us(0.0, 0.99);
    for (int t = 0; t < 500; ++t) {
        int32_t n = un(rng), f = uf(rng);
        QuantizedFeatures q = random_features(rng, n, f, us(rng));
        PackageStream s = encode(q);
        REQUIRE(same_payload(decode(s, f), q));
    }
}

TEST_CASE("round trip holds exhaustively for tiny shapes") {
    std::mt19937_64 rng(13);
    for (int32_t n = 1; n <= 8; ++n) {
        for (int32_t f = 1; f <= 8; ++f) {
            for (double sp : {0.0, 0.5, 1.0}) {
                QuantizedFeatures q = random_features(rng, n, f, sp);
                PackageStream s = encode(q);
                REQUIRE(same_payload(decode(s, f), q));
            }
        }
    }
}

TEST_CASE("round trip with non-default length settings") {
    std::mt19937_64 rng(21);
    for (PackageLengths lens : {PackageLengths{8, 16, 24}, PackageLengths{400, 512, 800},
                                PackageLengths{64, 256, 1024}}) {
        for (int t = 0; t < 40; ++t) {
            QuantizedFeatures q = random_features(rng, 20, 30, 0.6);
            PackageStream s = encode(q, lens);
            REQUIRE(same_payload(decode(s, 30), q));
        }
    }
}

TEST_CASE("bitindex expands to sorted row positions") {
    std::vector<uint8_t> bitmap = {0b10100110, 0b00000001};
    CHECK(bitindex_to_row_indices(bitmap, 12) == std::vector<int32_t>{1, 2, 5, 7, 8});
    CHECK(bitindex_to_row_indices(bitmap, 3) == std::vector<int32_t>{1, 2});
    CHECK(bitindex_to_row_indices({0}, 8).empty());
}

TEST_CASE("storage report orders representations on a sparse mixed-precision workload") {
    // Nodes grouped by bitwidth (as degree-ordered data would be) so packages
    // amortize across same-bitwidth runs; 80% sparse.
    std::mt19937_64 rng(31);
    QuantizedFeatures q;
    q.num_nodes = 64;
    q.feature_dim = 128;
    q.node_scale.assign(64, 1.0);
    std::uniform_real_distribution<double> uz(0.0, 1.0);
    for (int32_t i = 0; i < 64; ++i) {
        int b = (i < 32) ? 2 : 3;
        q.node_bitwidth.push_back(static_cast<uint8_t>(b));
        for (int32_t j = 0; j < 128; ++j) {
            int8_t v = 0;
            if (uz(rng) >= 0.80) v = (rng() % 2) ? 1 : -1;
            q.values.push_back(v);
        }
    }
    StorageReport r = storage_report(q);
    CHECK(r.bits_ideal <= r.bits_adaptive);
    CHECK(r.bits_adaptive < r.bits_bitmap);
    CHECK(r.bits_adaptive < r.bits_csr);
    CHECK(r.bits_adaptive < r.bits_fixed_package);
    CHECK(r.bits_bitmap < r.bits_dense);
    CHECK(r.bits_csr < r.bits_dense);
    CHECK_FALSE(r.dense_regime);
}

TEST_CASE("dense regime is flagged when compression cannot win") {
    // fully dense 8-bit payload: bitmap + headers can only add overhead
    QuantizedFeatures q;
    q.num_nodes = 4;
    q.feature_dim = 64;
    q.node_scale.assign(4, 1.0);
    q.node_bitwidth.assign(4, 8);
    q.values.assign(4 * 64, 127);
    StorageReport r = storage_report(q);
    CHECK(r.bits_adaptive >= r.bits_dense);
    CHECK(r.dense_regime);
}

TEST_CASE("stream file round trip") {
    std::mt19937_64 rng(17);
    QuantizedFeatures q = random_features(rng, 12, 9, 0.5);
    PackageStream s = encode(q);
    const std::string path = "/tmp/mega_test_codec.megp";
    write_stream(path, s);
    PackageStream t = read_stream(path);
    CHECK(t.num_nodes == s.num_nodes);
    CHECK(t.feature_dim == s.feature_dim);
    CHECK(t.bitmaps == s.bitmaps);
    CHECK(t.node_bitwidth == s.node_bitwidth);
    REQUIRE(t.packages.size() == s.packages.size());
    for (size_t i = 0; i < s.packages.size(); ++i) {
        CHECK(t.packages[i].mode == s.packages[i].mode);
        CHECK(t.packages[i].bitwidth == s.packages[i].bitwidth);
        CHECK(t.packages[i].val_bits == s.packages[i].val_bits);
    }
    CHECK(same_payload(decode(t, 9), q));
    std::remove(path.c_str());
}

TEST_CASE("corrupt streams are rejected with specific errors") {
    std::mt19937_64 rng(19);
    QuantizedFeatures q = random_features(rng, 6, 8, 0.4);
    PackageStream s = encode(q);

    SUBCASE("mode code 11 is invalid") {
        PackageStream bad = s;
        REQUIRE(!bad.packages.empty());
        bad.packages[0].mode = 3;
        CHECK_THROWS_AS(decode(bad, 8), CorruptStreamError);
    }
    SUBCASE("dropping a package starves the bitmap") {
        PackageStream bad = s;
        REQUIRE(!bad.packages.empty());
        bad.packages.pop_back();
        CHECK_THROWS_AS(decode(bad, 8), CorruptStreamError);
    }
    SUBCASE("bitwidth disagreement between sideband and package") {
        PackageStream bad = s;
        bad.node_bitwidth.assign(bad.node_bitwidth.size(), 7);
        bool threw = false;
        try {
            decode(bad, 8);
        } catch (const CorruptStreamError&) {
            threw = true;
        }
        CHECK(threw);
    }
    SUBCASE("feature dim mismatch") {
        CHECK_THROWS_AS(decode(s, 9), CorruptStreamError);
    }
    SUBCASE("bad magic on disk") {
        const std::string path = "/tmp/mega_test_codec_bad.megp";
        FILE* f = std::fopen(path.c_str(), "wb");
        std::fwrite("NOPE####", 1, 8, f);
        std::fclose(f);
        CHECK_THROWS_AS(read_stream(path), CorruptStreamError);
        std::remove(path.c_str());
    }
    SUBCASE("truncated file") {
        const std::string path = "/tmp/mega_test_codec_trunc.megp";
        write_stream(path, s);
        FILE* f = std::fopen(path.c_str(), "rb");
        std::fseek(f, 0, SEEK_END);
        long sz = std::ftell(f);
        std::fclose(f);
        std::string data(sz, '\0');
        f = std::fopen(path.c_str(), "rb");
        REQUIRE(std::fread(data.data(), 1, sz, f) == static_cast<size_t>(sz));
        std::fclose(f);
        f = std::fopen(path.c_str(), "wb");
        std::fwrite(data.data(), 1, sz - 3, f);  // chop mid-package
        std::fclose(f);
        CHECK_THROWS_AS(read_stream(path), CorruptStreamError);
        std::remove(path.c_str());
    }
}

TEST_CASE("byte totals account packages plus the bitmap region") {
    std::mt19937_64 rng(23);
    QuantizedFeatures q = random_features(rng, 10, 16, 0.5);
    PackageStream s = encode(q);
    uint64_t expect = (10 * 16 + 7) / 8;
    for (const auto& p : s.packages) {
        expect += (5 + static_cast<uint64_t>(s.lengths.mode_bits(p.mode)) + 7) / 8;
    }
    CHECK(s.byte_aligned_bytes() == expect);
}
