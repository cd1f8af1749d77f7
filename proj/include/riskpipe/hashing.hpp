#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace riskpipe {

// FNV-1a 64-bit. Content hashes are used for provenance and change
// detection in run records, not for security.
constexpr std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::uint64_t h);
std::uint64_t hash_file(const std::filesystem::path& path);
std::string hash_file_hex(const std::filesystem::path& path);

// Fans the experiment seed out to per-stage/per-model seeds so each stage
// is independently reproducible.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view scope) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int i = 0; i < 8; ++i) {
        h ^= (seed >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
    }
    return fnv1a64(scope, h);
}

}  // namespace riskpipe
