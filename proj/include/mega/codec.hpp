#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mega/quant.hpp"

namespace mega {

struct PackageLengths {
    int short_bits = 64;
    int medium_bits = 128;
    int long_bits = 192;

    void validate() const;
    int mode_bits(int mode) const;
};

/// One Adaptive-Package: 2-bit mode (00 short / 01 medium / 10 long), 3-bit
/// bitwidth code (b - 1), and a val array of mode length. Non-zero values are
/// packed sign-magnitude, LSB-first, b bits each; trailing pad bits are zero.
struct Package {
    uint8_t mode = 0;
    uint8_t bitwidth = 1;             // decoded b in [1, 8]
    std::vector<uint8_t> val_bits;    // mode length / 8 bytes
    int valid_bits = 0;               // bits actually carrying values
};

struct PackageStream {
    int32_t num_nodes = 0;
    int32_t feature_dim = 0;
    PackageLengths lengths;
    std::vector<Package> packages;
    std::vector<uint8_t> bitmaps;          // ceil(N*F/8) bytes, LSB-first per node
    std::vector<int32_t> node_order;       // ascending node IDs
    std::vector<uint8_t> node_bitwidth;    // per-node b, sideband for decode

    bool bitmap_bit(int32_t node, int32_t j) const {
        size_t idx = static_cast<size_t>(node) * feature_dim + j;
        return (bitmaps[idx >> 3] >> (idx & 7)) & 1;
    }
    uint64_t package_bits() const;    // sum of (5 + mode length) over packages
    uint64_t padding_bits() const;
    uint64_t byte_aligned_bytes() const;  // on-DRAM footprint incl. bitmaps
};

struct StorageReport {
    uint64_t bits_dense = 0;
    uint64_t bits_bitmap = 0;
    uint64_t bits_csr = 0;
    uint64_t bits_fixed_package = 0;
    uint64_t bits_adaptive = 0;
    uint64_t bits_ideal = 0;
    uint64_t padding_bits = 0;
    bool dense_regime = false;  // adaptive >= dense (low-sparsity worst case)
};

PackageStream encode(const QuantizedFeatures& q, PackageLengths lengths = {});

QuantizedFeatures decode(const PackageStream& s, int32_t feature_dim);

std::vector<int32_t> bitindex_to_row_indices(const std::vector<uint8_t>& bitmap, int32_t f);

StorageReport storage_report(const QuantizedFeatures& q, PackageLengths lengths = {});

// On-disk form: header {magic "MEGP", u32 N, u32 F, u16 short, u16 medium,
// u16 long}, bitmap region, per-node bitwidth region (N bytes), then
// byte-aligned packages; little-endian.
void write_stream(const std::string& path, const PackageStream& s);
PackageStream read_stream(const std::string& path);

} // namespace mega
