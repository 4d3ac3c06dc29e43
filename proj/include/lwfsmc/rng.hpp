#pragma once

// Portable pseudorandom source. Every stochastic stage draws from xoshiro256**
// (Blackman & Vigna, 2018) seeded through SplitMix64, and all variates are
// produced by the transforms below rather than <random> distributions, whose
// output is implementation-defined. Traces therefore reproduce bit-for-bit on
// any platform with IEEE-754 doubles and a faithful std::log.

#include <array>
#include <cmath>
#include <cstdint>

namespace lwfsmc {

inline constexpr std::uint64_t
splitmix64(std::uint64_t& state) noexcept
{
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed splitting rule: stream s of master seed m is the first SplitMix64
/// output of state m + s * 0x9E3779B97F4A7C15.
inline constexpr std::uint64_t
derive_seed(std::uint64_t master, std::uint64_t stream) noexcept
{
  std::uint64_t state = master + stream * 0x9E3779B97F4A7C15ULL;
  return splitmix64(state);
}

class Xoshiro256
{
public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) noexcept
  {
    std::uint64_t sm = seed;
    for (auto& word : m_s)
      word = splitmix64(sm);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type
  operator()() noexcept
  {
    const std::uint64_t result = rotl(m_s[1] * 5, 7) * 9;
    const std::uint64_t t = m_s[1] << 17;
    m_s[2] ^= m_s[0];
    m_s[3] ^= m_s[1];
    m_s[1] ^= m_s[2];
    m_s[0] ^= m_s[3];
    m_s[2] ^= t;
    m_s[3] = rotl(m_s[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double
  uniform() noexcept
  {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1); safe as a log argument.
  double
  uniform_open() noexcept
  {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by the Marsaglia polar method; the spare is cached.
  double
  normal() noexcept
  {
    if (m_has_spare)
    {
      m_has_spare = false;
      return m_spare;
    }
    double u, v, s;
    do
    {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    m_spare = v * f;
    m_has_spare = true;
    return u * f;
  }

  /// Gamma(shape, 1) by Marsaglia & Tsang (2000); shape < 1 uses the
  /// U^(1/shape) boost.
  double
  gamma(double shape) noexcept
  {
    if (shape < 1.0)
      return gamma(shape + 1.0) * std::pow(uniform_open(), 1.0 / shape);
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;)
    {
      double x, v;
      do
      {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_open();
      if (u < 1.0 - 0.0331 * x * x * x * x)
        return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

private:
  static constexpr std::uint64_t
  rotl(std::uint64_t x, int k) noexcept
  {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> m_s{};
  double m_spare = 0.0;
  bool m_has_spare = false;
};

} // namespace lwfsmc
