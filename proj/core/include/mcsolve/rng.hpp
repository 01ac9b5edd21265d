#pragma once

#include <array>
#include <cstdint>

namespace mcsolve {

/// Philox 4x32 with 10 rounds: a counter-based generator (Salmon et al.,
/// "Parallel random numbers: as easy as 1, 2, 3"). Output depends only on
/// (counter, key), so any walk, step, or sample can be generated from its
/// coordinates alone — no shared mutable state, identical results for any
/// thread count or evaluation order.
///
/// std::uniform_real_distribution and friends are deliberately avoided:
/// their output is not pinned by the standard, and the reproducibility
/// tests require bit-stable streams.
struct Philox4x32 {
  static constexpr std::uint32_t kMult0 = 0xD2511F53u;
  static constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> encrypt(std::array<std::uint32_t, 4> counter,
                                              std::array<std::uint32_t, 2> key);
};

/// Purpose tags keeping unrelated consumers of the same seed on disjoint
/// counter planes.
inline constexpr std::uint32_t kDomainWalk = 1;      // chain transitions
inline constexpr std::uint32_t kDomainSampling = 2;  // row subset selection
inline constexpr std::uint32_t kDomainFredholm = 3;  // continuous-state walks
inline constexpr std::uint32_t kDomainProblem = 4;   // instance generation

/// Read-only view of one logical uniform stream, identified by
/// (seed, domain, tag). Each uniform is addressed by an (item, draw) pair:
/// `item` is the walk or sample ordinal, `draw` counts uniforms consumed
/// within that item. Streams with different tags (e.g. per solution
/// component) are independent because the tag perturbs the cipher key.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t domain, std::uint32_t tag = 0)
      : key_{static_cast<std::uint32_t>(seed & 0xffffffffu),
             static_cast<std::uint32_t>(seed >> 32) ^ tag},
        domain_(domain) {}

  /// Raw 64-bit output for coordinates (item, draw).
  std::uint64_t bits(std::uint64_t item, std::uint32_t draw) const {
    auto out = Philox4x32::encrypt(
        {static_cast<std::uint32_t>(item & 0xffffffffu),
         static_cast<std::uint32_t>(item >> 32), draw, domain_},
        key_);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  }

  /// Uniform double in [0, 1): top 53 bits of the 64-bit output.
  double uniform(std::uint64_t item, std::uint32_t draw) const {
    return static_cast<double>(bits(item, draw) >> 11) * 0x1.0p-53;
  }

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint32_t domain_;
};

}  // namespace mcsolve
