#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace bussim {

using Rng = std::mt19937_64;

// Seed splitting. Every generator in the toolkit is seeded from a master seed
// and a fixed tuple of stream keys:
//
//   seed = fold(master, k0, k1, ...)   with   fold(s, k) = splitmix64(s ^ splitmix64(k + c))
//
// so that results depend only on (master, keys) and never on scheduling.
std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) noexcept;

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
  return Rng(derive_seed(master, keys));
}

// First stream key of each consumer.
namespace stream {
inline constexpr std::uint64_t kScenarioParams = 1;
inline constexpr std::uint64_t kHistorical = 2;
inline constexpr std::uint64_t kRealtime = 3;
inline constexpr std::uint64_t kCalibration = 4;
inline constexpr std::uint64_t kFilter = 5;
inline constexpr std::uint64_t kPriorParams = 6;
inline constexpr std::uint64_t kFreeRun = 7;
inline constexpr std::uint64_t kReplication = 8;
inline constexpr std::uint64_t kObservationNoise = 9;
}  // namespace stream

}  // namespace bussim
