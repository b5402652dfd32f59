#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "anomalycd/embedding.hpp"

// Embedding cache (.aecd), little-endian:
//   "AECD" | u16 version=1 | u8 dtype=0 (f32) | u16 stride | u32 D | u32 h | u32 w
//   | D*h*w f32 payload, cell-major | u32 CRC32(payload)

namespace anomalycd {

inline constexpr char kCacheMagic[4] = {'A', 'E', 'C', 'D'};
inline constexpr std::uint16_t kCacheVersion = 1;
inline constexpr std::size_t kCacheHeaderBytes = 4 + 2 + 1 + 2 + 4 + 4 + 4;

namespace detail {

inline void put_le(std::vector<unsigned char>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

inline std::uint32_t crc32_bytes(const unsigned char* p, std::size_t n) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = ::crc32(crc, p, chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<unsigned char> encode_cache(const EmbeddingMap& emb) {
    if (emb.stride > 0xffff) throw Error("stride does not fit the cache header");
    std::vector<unsigned char> out;
    out.reserve(kCacheHeaderBytes + emb.data.size() * 4 + 4);
    out.insert(out.end(), std::begin(kCacheMagic), std::end(kCacheMagic));
    detail::put_le(out, kCacheVersion, 2);
    detail::put_le(out, 0, 1);
    detail::put_le(out, static_cast<std::uint64_t>(emb.stride), 2);
    detail::put_le(out, static_cast<std::uint64_t>(emb.dim), 4);
    detail::put_le(out, static_cast<std::uint64_t>(emb.h), 4);
    detail::put_le(out, static_cast<std::uint64_t>(emb.w), 4);
    const std::size_t payload_start = out.size();
    for (float f : emb.data) detail::put_le(out, std::bit_cast<std::uint32_t>(f), 4);
    const auto crc = detail::crc32_bytes(out.data() + payload_start, out.size() - payload_start);
    detail::put_le(out, crc, 4);
    return out;
}

inline EmbeddingMap decode_cache(const std::vector<unsigned char>& buf) {
    if (buf.size() < kCacheHeaderBytes) throw Error("truncated cache file");
    if (std::memcmp(buf.data(), kCacheMagic, 4) != 0) throw Error("bad magic");
    const unsigned char* p = buf.data() + 4;
    if (detail::get_le(p, 2) != kCacheVersion) throw Error("unsupported cache version");
    if (p[2] != 0) throw Error("unsupported cache dtype");
    const auto stride = static_cast<int>(detail::get_le(p + 3, 2));
    const auto dim = detail::get_le(p + 5, 4);
    const auto h = detail::get_le(p + 9, 4);
    const auto w = detail::get_le(p + 13, 4);
    if (dim == 0 || h == 0 || w == 0 || stride == 0) throw Error("invalid cache dimensions");
    const std::uint64_t n = dim * h * w;
    if (buf.size() != kCacheHeaderBytes + n * 4 + 4) throw Error("truncated cache file");
    const unsigned char* payload = buf.data() + kCacheHeaderBytes;
    const auto stored = static_cast<std::uint32_t>(detail::get_le(payload + n * 4, 4));
    if (detail::crc32_bytes(payload, n * 4) != stored) throw Error("checksum mismatch");
    EmbeddingMap emb(static_cast<int>(dim), static_cast<int>(h), static_cast<int>(w), stride);
    for (std::uint64_t i = 0; i < n; ++i)
        emb.data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(detail::get_le(payload + 4 * i, 4)));
    return emb;
}

inline void write_cache(const EmbeddingMap& emb, const std::filesystem::path& path) {
    const auto bytes = encode_cache(emb);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline EmbeddingMap read_cache(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_cache(buf);
}

/// `<timestamp>_<tile_x0>_<tile_y0>.aecd`
inline std::string cache_file_name(const std::string& timestamp, int x0, int y0) {
    return timestamp + "_" + std::to_string(x0) + "_" + std::to_string(y0) + ".aecd";
}

/// Embedder backed by pre-exported cache files; fails fast on a missing file.
class CacheEmbedderStore {
public:
    explicit CacheEmbedderStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

    EmbeddingMap load(const std::string& timestamp, int x0, int y0, int tile_size) const {
        const auto p = dir_ / cache_file_name(timestamp, x0, y0);
        if (!std::filesystem::exists(p)) throw Error("missing embedding cache: " + p.string());
        auto emb = read_cache(p);
        if (emb.h * emb.stride != tile_size || emb.w * emb.stride != tile_size)
            throw Error("cache grid does not match tile size: " + p.string());
        return emb;
    }

    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path dir_;
};

}  // namespace anomalycd
