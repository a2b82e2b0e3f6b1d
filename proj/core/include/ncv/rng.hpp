#pragma once

#include <array>
#include <cstdint>

namespace ncv {

/// Philox4x32-10 block function.
/// Stateless: maps (counter, key) to four 32-bit words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Purpose tags that keep substreams of one master seed disjoint.
enum class StreamDomain : std::uint16_t {
  FirstPass = 1,
  SecondPass = 2,
  Training = 3,
  NetworkInit = 4,
  Pilot = 5,
  Multilevel = 6,
  Test = 7,
};

/// 64-bit mixer used to derive child seeds (strike index, method, ...).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Counter-based random stream. A stream is identified by (seed, domain,
/// index); two streams with different identities never share a counter
/// block, so per-path streams can be generated in any order or in parallel.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamDomain domain, std::uint64_t index);

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  /// Standard normal (Box-Muller, both variates used).
  double normal();
  /// Exponential with the given rate; rate must be positive.
  double exponential(double rate);

  std::uint64_t next_u64();

 private:
  std::uint32_t next_u32();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ncv
