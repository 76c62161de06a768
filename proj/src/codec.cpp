#include "mega/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mega/errors.hpp"

namespace mega {

void PackageLengths::validate() const {
    if (!(0 < short_bits && short_bits < medium_bits && medium_bits < long_bits)) {
        throw ConfigError("package lengths must be strictly increasing");
    }
    if (short_bits % 8 || medium_bits % 8 || long_bits % 8) {
        throw ConfigError("package lengths must be multiples of 8");
    }
}

int PackageLengths::mode_bits(int mode) const {
    switch (mode) {
        case 0: return short_bits;
        case 1: return medium_bits;
        case 2: return long_bits;
        default: throw CorruptStreamError("invalid package mode code 11");
    }
}

uint64_t PackageStream::package_bits() const {
    uint64_t bits = 0;
    for (const auto& p : packages) bits += 5 + lengths.mode_bits(p.mode);
    return bits;
}

uint64_t PackageStream::padding_bits() const {
    uint64_t bits = 0;
    for (const auto& p : packages) bits += lengths.mode_bits(p.mode) - p.valid_bits;
    return bits;
}

uint64_t PackageStream::byte_aligned_bytes() const {
    uint64_t bytes = (static_cast<uint64_t>(num_nodes) * feature_dim + 7) / 8;
    for (const auto& p : packages) {
        bytes += (5 + static_cast<uint64_t>(lengths.mode_bits(p.mode)) + 7) / 8;
    }
    return bytes;
}

namespace {

inline void set_bits(std::vector<uint8_t>& buf, int offset, uint32_t value, int count) {
    for (int k = 0; k < count; ++k) {
        if ((value >> k) & 1) buf[(offset + k) >> 3] |= uint8_t(1u << ((offset + k) & 7));
    }
}

inline uint32_t get_bits(const std::vector<uint8_t>& buf, int offset, int count) {
    uint32_t v = 0;
    for (int k = 0; k < count; ++k) {
        v |= uint32_t((buf[(offset + k) >> 3] >> ((offset + k) & 7)) & 1) << k;
    }
    return v;
}

// Sign-magnitude field: b-1 magnitude bits LSB-first, sign in the top bit.
inline uint32_t value_field(int32_t v, int b) {
    uint32_t mag = static_cast<uint32_t>(v < 0 ? -v : v);
    uint32_t field = mag;
    if (v < 0) field |= 1u << (b - 1);
    return field;
}

inline int32_t field_value(uint32_t field, int b) {
    int32_t mag = static_cast<int32_t>(field & ((1u << (b - 1)) - 1u));
    return (field >> (b - 1)) & 1 ? -mag : mag;
}

} // namespace

PackageStream encode(const QuantizedFeatures& q, PackageLengths lengths) {
    lengths.validate();
    PackageStream s;
    s.num_nodes = q.num_nodes;
    s.feature_dim = q.feature_dim;
    s.lengths = lengths;
    s.bitmaps.assign((static_cast<size_t>(q.num_nodes) * q.feature_dim + 7) / 8, 0);
    s.node_bitwidth = q.node_bitwidth;
    s.node_order.resize(q.num_nodes);
    for (int32_t i = 0; i < q.num_nodes; ++i) s.node_order[i] = i;

    std::vector<int32_t> pending;  // values of the open package
    int open_b = 0;
    int acc_bits = 0;

    auto close = [&]() {
        if (acc_bits == 0) return;
        Package p;
        if (acc_bits <= lengths.short_bits) p.mode = 0;
        else if (acc_bits <= lengths.medium_bits) p.mode = 1;
        else p.mode = 2;
        p.bitwidth = static_cast<uint8_t>(open_b);
        p.valid_bits = acc_bits;
        p.val_bits.assign(lengths.mode_bits(p.mode) / 8, 0);
        int off = 0;
        for (int32_t v : pending) {
            set_bits(p.val_bits, off, value_field(v, open_b), open_b);
            off += open_b;
        }
        s.packages.push_back(std::move(p));
        pending.clear();
        acc_bits = 0;
        open_b = 0;
    };

    for (int32_t i = 0; i < q.num_nodes; ++i) {
        const int b = q.node_bitwidth[i];
        if (b < 1 || b > 8) throw EncodeError("node bitwidth out of [1, 8]");
        const int32_t maxmag = (1 << (b - 1)) - 1;
        const size_t row = static_cast<size_t>(i) * q.feature_dim;
        for (int32_t j = 0; j < q.feature_dim; ++j) {
            int32_t v = q.values[row + j];
            if (v == 0) continue;
            if (v > maxmag || v < -maxmag) {
                throw EncodeError("value " + std::to_string(v) + " exceeds bitwidth " +
                                  std::to_string(b) + " range");
            }
            size_t idx = row + j;
            s.bitmaps[idx >> 3] |= uint8_t(1u << (idx & 7));
            if (acc_bits > 0 && open_b != b) close();                 // bitwidth change
            if (acc_bits > 0 && acc_bits + b > lengths.long_bits) close();  // capacity
            if (acc_bits == 0) open_b = b;
            pending.push_back(v);
            acc_bits += b;
        }
    }
    close();
    return s;
}

QuantizedFeatures decode(const PackageStream& s, int32_t feature_dim) {
    if (feature_dim != s.feature_dim) {
        throw CorruptStreamError("feature dim mismatch with stream header");
    }
    if (s.node_bitwidth.size() != static_cast<size_t>(s.num_nodes)) {
        throw CorruptStreamError("stream lacks per-node bitwidths");
    }
    for (const auto& p : s.packages) {
        if (p.mode > 2) throw CorruptStreamError("invalid package mode code 11");
        if (p.bitwidth < 1 || p.bitwidth > 8) {
            throw CorruptStreamError("invalid package bitwidth code");
        }
    }

    QuantizedFeatures q;
    q.num_nodes = s.num_nodes;
    q.feature_dim = feature_dim;
    q.values.assign(static_cast<size_t>(s.num_nodes) * feature_dim, 0);
    q.node_scale.assign(s.num_nodes, 1.0);  // scales travel with QuantParams, not the stream
    q.node_bitwidth = s.node_bitwidth;

    size_t p = 0;
    int off = 0;
    for (int32_t i = 0; i < s.num_nodes; ++i) {
        const int b = s.node_bitwidth[i];
        const size_t row = static_cast<size_t>(i) * feature_dim;
        for (int32_t j = 0; j < feature_dim; ++j) {
            if (!s.bitmap_bit(i, j)) continue;
            // Mirror the encoder's close rules: advance on a bitwidth change
            // or when the long-mode capacity would have been exceeded.
            while (p < s.packages.size() &&
                   ((off > 0 && s.packages[p].bitwidth != b) ||
                    (off > 0 && off + b > s.lengths.long_bits))) {
                ++p;
                off = 0;
            }
            if (p >= s.packages.size()) {
                throw CorruptStreamError("bitmap demands more values than the stream holds");
            }
            const Package& pkg = s.packages[p];
            if (pkg.bitwidth != b) {
                throw CorruptStreamError("package bitwidth disagrees with node bitwidth");
            }
            int plen = s.lengths.mode_bits(pkg.mode);
            if (off + b > plen || static_cast<size_t>(plen) > pkg.val_bits.size() * 8) {
                throw CorruptStreamError("truncated package: values overrun val array");
            }
            int32_t v = field_value(get_bits(pkg.val_bits, off, b), b);
            if (v == 0) throw CorruptStreamError("zero value stored in package");
            q.values[row + j] = static_cast<int8_t>(v);
            off += b;
        }
    }
    if (p + 1 < s.packages.size() || (off == 0 && p < s.packages.size())) {
        throw CorruptStreamError("trailing packages not referenced by any bitmap");
    }
    return q;
}

std::vector<int32_t> bitindex_to_row_indices(const std::vector<uint8_t>& bitmap, int32_t f) {
    std::vector<int32_t> out;
    for (int32_t j = 0; j < f; ++j) {
        if ((bitmap[j >> 3] >> (j & 7)) & 1) out.push_back(j);
    }
    return out;
}

namespace {

int ceil_log2(uint64_t v) {
    int bits = 0;
    uint64_t cap = 1;
    while (cap < v) {
        cap <<= 1;
        ++bits;
    }
    return bits;
}

} // namespace

StorageReport storage_report(const QuantizedFeatures& q, PackageLengths lengths) {
    lengths.validate();
    StorageReport r;
    const uint64_t n = q.num_nodes, f = q.feature_dim;
    uint64_t nnz = 0, ideal = 0;
    int b_max = 1;
    for (int32_t i = 0; i < q.num_nodes; ++i) {
        b_max = std::max<int>(b_max, q.node_bitwidth[i]);
        const size_t row = static_cast<size_t>(i) * q.feature_dim;
        for (int32_t j = 0; j < q.feature_dim; ++j) {
            if (q.values[row + j] != 0) {
                ++nnz;
                ideal += q.node_bitwidth[i];
            }
        }
    }
    r.bits_dense = n * f * 8;
    r.bits_bitmap = n * f + nnz * b_max;
    const int idx_bits = ceil_log2(std::max<uint64_t>(f, 2));
    const int ptr_bits = ceil_log2(nnz + 2);
    r.bits_csr = nnz * (b_max + idx_bits) + (n + 1) * ptr_bits;

    PackageStream adaptive = encode(q, lengths);
    r.bits_adaptive = adaptive.package_bits() + n * f;
    r.padding_bits = adaptive.padding_bits();

    // Fixed-length baseline: same greedy algorithm restricted to one
    // (long) package length.
    PackageLengths fixed{lengths.long_bits - 16, lengths.long_bits - 8, lengths.long_bits};
    PackageStream fixed_stream = encode(q, fixed);
    uint64_t fixed_bits = 0;
    for (const auto& p : fixed_stream.packages) {
        (void)p;
        fixed_bits += 5 + static_cast<uint64_t>(lengths.long_bits);
    }
    r.bits_fixed_package = fixed_bits + n * f;

    r.bits_ideal = ideal;
    r.dense_regime = r.bits_adaptive >= r.bits_dense;
    return r;
}

void write_stream(const std::string& path, const PackageStream& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    out.write("MEGP", 4);
    uint32_t n = s.num_nodes, f = s.feature_dim;
    uint16_t ls = static_cast<uint16_t>(s.lengths.short_bits);
    uint16_t lm = static_cast<uint16_t>(s.lengths.medium_bits);
    uint16_t ll = static_cast<uint16_t>(s.lengths.long_bits);
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&f), 4);
    out.write(reinterpret_cast<const char*>(&ls), 2);
    out.write(reinterpret_cast<const char*>(&lm), 2);
    out.write(reinterpret_cast<const char*>(&ll), 2);
    out.write(reinterpret_cast<const char*>(s.bitmaps.data()),
              static_cast<std::streamsize>(s.bitmaps.size()));
    out.write(reinterpret_cast<const char*>(s.node_bitwidth.data()),
              static_cast<std::streamsize>(s.node_bitwidth.size()));
    for (const auto& p : s.packages) {
        // 5-bit header, byte-aligned package: header byte + val array.
        uint8_t header = static_cast<uint8_t>((p.mode & 3) | ((p.bitwidth - 1) << 2));
        out.write(reinterpret_cast<const char*>(&header), 1);
        out.write(reinterpret_cast<const char*>(p.val_bits.data()),
                  static_cast<std::streamsize>(p.val_bits.size()));
    }
}

PackageStream read_stream(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open stream file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MEGP", 4) != 0) {
        throw CorruptStreamError("bad stream magic in " + path);
    }
    PackageStream s;
    uint32_t n = 0, f = 0;
    uint16_t ls = 0, lm = 0, ll = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    in.read(reinterpret_cast<char*>(&f), 4);
    in.read(reinterpret_cast<char*>(&ls), 2);
    in.read(reinterpret_cast<char*>(&lm), 2);
    in.read(reinterpret_cast<char*>(&ll), 2);
    if (!in) throw CorruptStreamError("truncated stream header");
    s.num_nodes = static_cast<int32_t>(n);
    s.feature_dim = static_cast<int32_t>(f);
    s.lengths = PackageLengths{ls, lm, ll};
    s.lengths.validate();
    s.bitmaps.resize((static_cast<size_t>(n) * f + 7) / 8);
    in.read(reinterpret_cast<char*>(s.bitmaps.data()),
            static_cast<std::streamsize>(s.bitmaps.size()));
    s.node_bitwidth.resize(n);
    in.read(reinterpret_cast<char*>(s.node_bitwidth.data()),
            static_cast<std::streamsize>(s.node_bitwidth.size()));
    if (!in) throw CorruptStreamError("truncated bitmap/bitwidth region");
    s.node_order.resize(n);
    for (uint32_t i = 0; i < n; ++i) s.node_order[i] = static_cast<int32_t>(i);

    uint8_t header = 0;
    while (in.read(reinterpret_cast<char*>(&header), 1)) {
        Package p;
        p.mode = header & 3;
        p.bitwidth = static_cast<uint8_t>(((header >> 2) & 7) + 1);
        if (p.mode > 2) throw CorruptStreamError("invalid package mode code 11");
        p.val_bits.resize(s.lengths.mode_bits(p.mode) / 8);
        in.read(reinterpret_cast<char*>(p.val_bits.data()),
                static_cast<std::streamsize>(p.val_bits.size()));
        if (!in) throw CorruptStreamError("truncated final package");
        p.valid_bits = s.lengths.mode_bits(p.mode);  // recomputed by decode on demand
        s.packages.push_back(std::move(p));
    }
    return s;
}

} // namespace mega
