#pragma once

// Lloyd-Max scalar quantization of the SNR range into N = 2^r levels.
//
// Everything runs in dB against the Gaussian form of the log-normal SNR pdf
// (the change of variables d = 10 log10 gamma maps one onto the other), so the
// centroid condition reduces to Gaussian partial moments. The end thresholds
// are pinned to the observed SNR range and never move. Distortion is the
// squared-error criterion normalized to the mass inside [g0, gN].

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lwfsmc/distfit.hpp"
#include "lwfsmc/error.hpp"
#include "lwfsmc/numfmt.hpp"

namespace lwfsmc {

/// A density on the real line exposing the partial moments Lloyd-Max needs.
template <class D>
concept QuantizerDensity = requires(const D& d, double x, double a, double b) {
  { d.pdf(x) } -> std::convertible_to<double>;
  { d.mass(a, b) } -> std::convertible_to<double>;
  { d.first_moment(a, b) } -> std::convertible_to<double>;
  { d.truncated_quantile(a, b, x) } -> std::convertible_to<double>;
};

/// Normal density over SNR in dB.
class GaussianDb
{
public:
  GaussianDb(double mu_db, double sigma_db)
    : m_mu{mu_db}
    , m_sigma{sigma_db}
    , m_normal{mu_db, sigma_db}
  {}

  explicit GaussianDb(const SnrDistribution& dist)
    : GaussianDb{(dist.validate(), dist.mu_db), dist.sigma_db}
  {}

  double mu() const noexcept { return m_mu; }
  double sigma() const noexcept { return m_sigma; }

  double
  pdf(double x) const
  {
    return boost::math::pdf(m_normal, x);
  }

  double
  mass(double a, double b) const
  {
    // Upper-tail complements keep precision when both ends sit above the mean.
    if (a >= m_mu)
      return boost::math::cdf(complement(m_normal, a)) - boost::math::cdf(complement(m_normal, b));
    return boost::math::cdf(m_normal, b) - boost::math::cdf(m_normal, a);
  }

  double
  first_moment(double a, double b) const
  {
    return m_mu * mass(a, b) + m_sigma * m_sigma * (pdf(a) - pdf(b));
  }

  double
  truncated_quantile(double a, double b, double u) const
  {
    if (0.5 * (a + b) <= m_mu)
    {
      const double fa = boost::math::cdf(m_normal, a);
      const double fb = boost::math::cdf(m_normal, b);
      return boost::math::quantile(m_normal, fa + u * (fb - fa));
    }
    const double qa = boost::math::cdf(complement(m_normal, a));
    const double qb = boost::math::cdf(complement(m_normal, b));
    return boost::math::quantile(complement(m_normal, qa - u * (qa - qb)));
  }

private:
  double m_mu;
  double m_sigma;
  boost::math::normal_distribution<double> m_normal;
};

/// Uniform density on [lo, hi]; the analytic reference case for the quantizer.
class UniformDensity
{
public:
  UniformDensity(double lo, double hi)
    : m_lo{lo}
    , m_hi{hi}
  {}

  double
  pdf(double x) const noexcept
  {
    return (x >= m_lo && x <= m_hi) ? 1.0 / (m_hi - m_lo) : 0.0;
  }

  double
  mass(double a, double b) const noexcept
  {
    a = std::clamp(a, m_lo, m_hi);
    b = std::clamp(b, m_lo, m_hi);
    return (b - a) / (m_hi - m_lo);
  }

  double
  first_moment(double a, double b) const noexcept
  {
    a = std::clamp(a, m_lo, m_hi);
    b = std::clamp(b, m_lo, m_hi);
    return 0.5 * (b * b - a * a) / (m_hi - m_lo);
  }

  double
  truncated_quantile(double a, double b, double u) const noexcept
  {
    a = std::clamp(a, m_lo, m_hi);
    b = std::clamp(b, m_lo, m_hi);
    return a + u * (b - a);
  }

private:
  double m_lo;
  double m_hi;
};

/// Level boundaries g0 < g1 < ... < gN and one representative per level, in dB.
struct ThresholdSet
{
  std::vector<double> thresholds;
  std::vector<double> representatives;
  double distortion = 0.0;

  std::size_t
  n_states() const noexcept
  {
    return representatives.size();
  }

  /// Ordering and containment; the midpoint condition is a property of
  /// lloyd_max output, not of every threshold set.
  void
  validate() const
  {
    const std::size_t n = representatives.size();
    if (n < 1 || thresholds.size() != n + 1)
      throw Error{Errc::invalid_argument, "threshold set needs N >= 1 levels and N + 1 boundaries"};
    for (double t : thresholds)
      if (!std::isfinite(t))
        throw Error{Errc::invalid_argument, "thresholds must be finite"};
    for (std::size_t i = 0; i < n; ++i)
    {
      if (!(thresholds[i] < thresholds[i + 1]))
        throw Error{Errc::invalid_argument, "thresholds must be strictly increasing"};
      if (!(representatives[i] >= thresholds[i] && representatives[i] <= thresholds[i + 1]))
        throw Error{Errc::invalid_argument, "representative " + std::to_string(i + 1) + " lies outside its cell"};
    }
  }

  friend bool operator==(const ThresholdSet&, const ThresholdSet&) = default;
};

inline constexpr bool
is_power_of_two_levels(std::size_t n) noexcept
{
  return n >= 2 && (n & (n - 1)) == 0;
}

inline constexpr double kQuadratureAbsTolerance = 1e-10;
inline constexpr double kMinCellMass = 1e-12;

/// Sum over cells of the integral of (rep_n - x)^2 p(x) on [g_{n-1}, g_n],
/// divided by the total mass on [g0, gN].
template <QuantizerDensity D>
double
distortion(const D& density, std::span<const double> thresholds, std::span<const double> reps)
{
  if (thresholds.size() != reps.size() + 1 || reps.empty())
    throw Error{Errc::invalid_argument, "distortion needs N representatives and N + 1 thresholds"};
  const double total = density.mass(thresholds.front(), thresholds.back());
  if (!(total > 0.0))
    throw Error{Errc::degenerate_cell, "distribution has no mass on the quantizer support"};
  double d = 0.0;
  for (std::size_t n = 0; n < reps.size(); ++n)
  {
    const double rep = reps[n];
    auto f = [&](double x) { return (rep - x) * (rep - x) * density.pdf(x); };
    double err = 0.0;
    const double cell =
      boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, thresholds[n], thresholds[n + 1], 15, 1e-13, &err);
    if (!std::isfinite(cell) || err > kQuadratureAbsTolerance * total)
      throw Error{Errc::quadrature_failure, "distortion integral on cell " + std::to_string(n + 1) + " did not reach tolerance"};
    d += cell;
  }
  return d / total;
}

inline double
distortion(const SnrDistribution& dist, const ThresholdSet& set)
{
  set.validate();
  return distortion(GaussianDb{dist}, set.thresholds, set.representatives);
}

struct LloydMaxOptions
{
  /// Stop once no threshold moves by more than this (dB).
  double tolerance = 1e-8;
  int max_iterations = 1000;
};

struct LloydMaxRun
{
  ThresholdSet set;
  /// Distortion after every centroid update, in iteration order.
  std::vector<double> distortion_history;
  int iterations = 0;
};

/// Alternates the midpoint condition g_n = (rep_n + rep_{n+1}) / 2 and the
/// centroid condition rep_n = E[x | g_{n-1} <= x < g_n] from representatives
/// seeded at the (2n - 1) / 2N quantiles of the truncated density.
template <QuantizerDensity D>
LloydMaxRun
lloyd_max_run(const D& density, std::size_t n_states, double g_min, double g_max, const LloydMaxOptions& opts = {})
{
  if (!is_power_of_two_levels(n_states))
    throw Error{Errc::invalid_argument, "number of states must be a power of two >= 2, got " + std::to_string(n_states)};
  if (!(g_min < g_max) || !std::isfinite(g_min) || !std::isfinite(g_max))
    throw Error{Errc::degenerate_cell, "SNR range is empty (min " + numfmt::shortest(g_min) + ", max " + numfmt::shortest(g_max) + ")"};

  const std::size_t n = n_states;
  const double total = density.mass(g_min, g_max);
  if (!(total > kMinCellMass))
    throw Error{Errc::degenerate_cell, "distribution has no mass on [" + numfmt::shortest(g_min) + ", " + numfmt::shortest(g_max) + "]"};

  LloydMaxRun run;
  auto& thr = run.set.thresholds;
  auto& rep = run.set.representatives;
  thr.assign(n + 1, 0.0);
  thr.front() = g_min;
  thr.back() = g_max;
  rep.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    rep[i] = density.truncated_quantile(g_min, g_max, (2.0 * i + 1.0) / (2.0 * n));

  auto centroids = [&] {
    for (std::size_t i = 0; i < n; ++i)
    {
      const double m = density.mass(thr[i], thr[i + 1]);
      if (!(m / total >= kMinCellMass))
        throw Error{Errc::degenerate_cell,
                    "cell " + std::to_string(i + 1) + " [" + numfmt::shortest(thr[i]) + ", " +
                      numfmt::shortest(thr[i + 1]) + ") holds probability " + numfmt::shortest(m / total)};
      rep[i] = std::clamp(density.first_moment(thr[i], thr[i + 1]) / m, thr[i], thr[i + 1]);
    }
  };

  bool done = false;
  std::vector<double> prev(n + 1, INFINITY);
  for (int it = 1; it <= opts.max_iterations; ++it)
  {
    for (std::size_t i = 1; i < n; ++i)
      thr[i] = 0.5 * (rep[i - 1] + rep[i]);
    centroids();
    run.distortion_history.push_back(distortion(density, thr, rep));
    run.iterations = it;

    double change = 0.0;
    for (std::size_t i = 1; i < n; ++i)
      change = std::max(change, std::abs(thr[i] - prev[i]));
    prev = thr;
    if (change < opts.tolerance)
    {
      done = true;
      break;
    }
  }
  if (!done)
    throw Error{Errc::no_convergence, "Lloyd-Max did not converge in " + std::to_string(opts.max_iterations) + " iterations"};

  for (std::size_t i = 1; i < n; ++i)
    thr[i] = 0.5 * (rep[i - 1] + rep[i]);
  run.set.distortion = distortion(density, thr, rep);
  run.set.validate();
  return run;
}

inline ThresholdSet
lloyd_max(const SnrDistribution& dist, std::size_t n_states, double g_min_db, double g_max_db, const LloydMaxOptions& opts = {})
{
  return lloyd_max_run(GaussianDb{dist}, n_states, g_min_db, g_max_db, opts).set;
}

inline void
write_threshold_header(std::ostream& out, std::size_t n_states)
{
  out << "interval_index,n_states";
  for (std::size_t i = 0; i <= n_states; ++i)
    out << ",g" << i;
  for (std::size_t i = 1; i <= n_states; ++i)
    out << ",rep" << i;
  out << ",distortion\n";
}

inline void
write_threshold_row(std::ostream& out, std::size_t interval_index, const ThresholdSet& set)
{
  out << interval_index << ',' << set.n_states();
  for (double t : set.thresholds)
    out << ',' << numfmt::shortest(t);
  for (double r : set.representatives)
    out << ',' << numfmt::shortest(r);
  out << ',' << numfmt::shortest(set.distortion) << '\n';
}

} // namespace lwfsmc
