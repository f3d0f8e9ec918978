#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace masc::rng {

// splitmix64 finalizer; good enough to decorrelate derived stream seeds.
inline std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Independent substream seed for (master, purpose tag, index).
inline std::uint64_t derive(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    return mix(master ^ mix(fnv1a(tag) + 0x9e3779b97f4a7c15ULL * index));
}

inline std::mt19937_64 stream(std::uint64_t master, std::string_view tag, std::uint64_t index = 0) {
    return std::mt19937_64(derive(master, tag, index));
}

}  // namespace masc::rng
