#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace qnetopt {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed for an independent per-trial stream. Depends only on (master, index),
// so trial results do not change with evaluation order.
inline std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master;
    (void)splitmix64(s);  // decorrelate nearby master seeds
    s ^= 0x9e3779b97f4a7c15ULL * (index + 1);
    return splitmix64(s);
}

// Uniform on the open interval (0,1): never returns 0, so exponential
// waiting times are finite and strictly positive.
inline double uniform_open01(std::mt19937_64& engine) {
    return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
}

inline double exponential_draw(std::mt19937_64& engine, double rate) {
    return -std::log(uniform_open01(engine)) / rate;
}

}  // namespace qnetopt
