#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ctxppi/errors.hpp"
#include "ctxppi/matrix.hpp"

namespace ctxppi {

namespace detail {

struct Crc32 {
    std::uint32_t value = 0xffffffffu;

    static const std::uint32_t* table() {
        static const auto t = [] {
            static std::uint32_t tab[256];
            for (std::uint32_t i = 0; i < 256; ++i) {
                std::uint32_t c = i;
                for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
                tab[i] = c;
            }
            return tab;
        }();
        return t;
    }

    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i)
            value = table()[(value ^ p[i]) & 0xffu] ^ (value >> 8);
    }

    std::uint32_t final() const { return value ^ 0xffffffffu; }
};

}  // namespace detail

// Versioned binary container: magic bytes, little-endian shape headers, raw
// 64-bit float payloads, trailing CRC32 over everything before it.
struct Checkpoint {
    static constexpr char kMagic[8] = {'C', 'T', 'X', 'P', 'P', 'I', '1', '\0'};
    static constexpr std::uint32_t kVersion = 1;

    std::uint32_t version = kVersion;
    std::uint64_t config_hash = 0;
    std::uint32_t epoch = 0;
    std::array<std::uint64_t, 4> rng_state{};
    std::vector<std::pair<std::string, Matrix>> matrices;

    const Matrix* find(const std::string& name) const {
        for (const auto& [n, m] : matrices)
            if (n == name) return &m;
        return nullptr;
    }
};

// FNV-1a over a canonical description string; used to bind checkpoints to the
// configuration and graph they were trained on.
inline std::uint64_t fnv1a_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace detail {

template <typename T>
void append_le(std::string& buf, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xffu));
}

template <typename T>
T read_le(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw CorruptCheckpoint("truncated checkpoint");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += sizeof(T);
    return static_cast<T>(v);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string buf(Checkpoint::kMagic, sizeof(Checkpoint::kMagic));
    detail::append_le(buf, ckpt.version);
    detail::append_le(buf, ckpt.config_hash);
    detail::append_le(buf, ckpt.epoch);
    for (auto w : ckpt.rng_state) detail::append_le(buf, w);
    detail::append_le(buf, static_cast<std::uint32_t>(ckpt.matrices.size()));
    for (const auto& [name, m] : ckpt.matrices) {
        detail::append_le(buf, static_cast<std::uint32_t>(name.size()));
        buf.append(name);
        detail::append_le(buf, static_cast<std::uint64_t>(m.rows));
        detail::append_le(buf, static_cast<std::uint64_t>(m.cols));
        for (double d : m.data) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, sizeof(d));
            detail::append_le(buf, bits);
        }
    }
    detail::Crc32 crc;
    crc.update(buf.data(), buf.size());
    detail::append_le(buf, crc.final());

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write checkpoint: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(Checkpoint::kMagic) + 4) throw CorruptCheckpoint("truncated checkpoint");
    if (std::memcmp(buf.data(), Checkpoint::kMagic, sizeof(Checkpoint::kMagic)) != 0)
        throw CorruptCheckpoint("bad magic bytes");

    detail::Crc32 crc;
    crc.update(buf.data(), buf.size() - 4);
    std::size_t tail = buf.size() - 4;
    const auto stored = detail::read_le<std::uint32_t>(buf, tail);
    if (crc.final() != stored) throw CorruptCheckpoint("CRC mismatch");

    std::size_t pos = sizeof(Checkpoint::kMagic);
    Checkpoint ckpt;
    ckpt.version = detail::read_le<std::uint32_t>(buf, pos);
    if (ckpt.version != Checkpoint::kVersion)
        throw UnsupportedVersion("checkpoint version " + std::to_string(ckpt.version) +
                                 " (supported: " + std::to_string(Checkpoint::kVersion) + ")");
    ckpt.config_hash = detail::read_le<std::uint64_t>(buf, pos);
    ckpt.epoch = detail::read_le<std::uint32_t>(buf, pos);
    for (auto& w : ckpt.rng_state) w = detail::read_le<std::uint64_t>(buf, pos);
    const auto n_matrices = detail::read_le<std::uint32_t>(buf, pos);
    for (std::uint32_t i = 0; i < n_matrices; ++i) {
        const auto name_len = detail::read_le<std::uint32_t>(buf, pos);
        if (pos + name_len > buf.size()) throw CorruptCheckpoint("truncated checkpoint");
        std::string name = buf.substr(pos, name_len);
        pos += name_len;
        const auto rows = detail::read_le<std::uint64_t>(buf, pos);
        const auto cols = detail::read_le<std::uint64_t>(buf, pos);
        Matrix m(rows, cols);
        for (auto& d : m.data) {
            const auto bits = detail::read_le<std::uint64_t>(buf, pos);
            std::memcpy(&d, &bits, sizeof(d));
        }
        ckpt.matrices.push_back({std::move(name), std::move(m)});
    }
    if (pos != buf.size() - 4) throw CorruptCheckpoint("trailing bytes in checkpoint");
    return ckpt;
}

}  // namespace ctxppi
