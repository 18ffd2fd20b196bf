#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ares {

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

// 64-bit FNV-1a.  Used for corpus/vocab/params digests; not cryptographic,
// just a stable fingerprint that is cheap to recompute everywhere.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

// Feeds an integral value into an FNV stream as 8 little-endian bytes.
constexpr std::uint64_t fnv1a64_u64(std::uint64_t v,
                                    std::uint64_t h = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
  return h;
}

// CRC-32 (IEEE, reflected polynomial 0xEDB88320) over a byte buffer.
// Checkpoint files carry this so truncated or bit-flipped files are
// rejected on load instead of producing a silently wrong policy.
std::uint32_t crc32(const void* data, std::size_t len);

std::string to_hex(std::uint64_t v);

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

// splitmix64 step; used to derive independent seeds from (seed, tag) pairs
// so that stages, problems, and evaluation passes never share an RNG stream.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// The tag side is weighted before combining so the mix is order-sensitive:
// mix_seed(a, b) and mix_seed(b, a) are distinct streams.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(splitmix64(seed) +
                    splitmix64(tag) * 0x9e3779b97f4a7c15ull);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

// Uniform double in [0, 1) built from the top 53 bits of one draw.  The
// bit-for-bit recipe is pinned here (rather than via std::uniform_real_
// distribution, whose output is implementation-defined) because run
// reproducibility is a hard requirement.
inline double uniform_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform index in [0, n).  Plain modulo: the bias at desk scale is
// negligible and the mapping must stay identical across platforms.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

// ---------------------------------------------------------------------------
// Filesystem helpers
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);

// Writes to `<path>.tmp` then renames over `path`.  rename(2) on the same
// filesystem is atomic, so readers either see the old file or the complete
// new one -- never a torn write.  All manifests, reports, and checkpoints
// go through this.
void atomic_write_file(const std::filesystem::path& path,
                       std::string_view contents);

// ---------------------------------------------------------------------------
// Small string utilities
// ---------------------------------------------------------------------------

// ASCII whitespace trim.  Bytes >= 0x80 are never trimmed, so multi-byte
// UTF-8 sequences pass through untouched.
std::string_view trim(std::string_view s);

bool is_sentence_terminator(char c);

}  // namespace ares
