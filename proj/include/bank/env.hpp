#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

namespace bank {

// UTC milliseconds since the Unix epoch.
using Clock = std::function<std::int64_t()>;

// Fills the buffer with random bytes.
using RandomSource = std::function<void(std::span<std::uint8_t>)>;

Clock system_clock();

// OpenSSL CSPRNG.
RandomSource secure_random();

// Deterministic stream for reproducible journals. Not for production use.
RandomSource seeded_random(std::uint64_t seed);

std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace bank
