#pragma once

#include <cstdint>

namespace mfgp::sim {

/// Independent random streams of one simulated day.
enum class Stream : std::uint64_t {
  kInventory = 1,
  kPriceNoise = 2,
  kFlowNoise = 3,
  kCalibration = 4,
};

/// One round of the splitmix64 output function.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for (master, index, stream): two chained splitmix64 rounds over the
/// master seed, the index and the stream tag. Depends on nothing else, so
/// days can be generated in any order or thread.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                          Stream stream);

}  // namespace mfgp::sim
