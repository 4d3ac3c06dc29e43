#pragma once

// Candidate amplitude-fading families, their maximum-likelihood fits and
// AICc scoring over spatial windows.
//
// Fitting works on linear amplitude a = 10^(snr_db / 20), i.e. 0 dB maps to
// amplitude 1. A log-normal amplitude fit (mu, sigma of ln a) is the same
// model as a Gaussian over snr_db with mu_db = mu * 20/ln10 and
// sigma_db = sigma * 20/ln10, which is the form the quantizer consumes.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "lwfsmc/error.hpp"
#include "lwfsmc/numfmt.hpp"
#include "lwfsmc/parallel.hpp"
#include "lwfsmc/trace.hpp"

namespace lwfsmc {

enum class Family
{
  Rice,
  Rayleigh,
  Nakagami,
  Weibull,
  LogNormal,
};

inline constexpr std::array<Family, 5> kAllFamilies{
  Family::Rice, Family::Rayleigh, Family::Nakagami, Family::Weibull, Family::LogNormal};

/// Parameter layout per family:
///   Rice {nu, sigma}, Rayleigh {sigma}, Nakagami {m, omega},
///   Weibull {shape, scale}, LogNormal {mu, sigma} of ln(a).
inline constexpr int
k_params(Family f) noexcept
{
  return f == Family::Rayleigh ? 1 : 2;
}

inline constexpr std::string_view
to_string(Family f) noexcept
{
  switch (f)
  {
    case Family::Rice: return "Rice";
    case Family::Rayleigh: return "Rayleigh";
    case Family::Nakagami: return "Nakagami";
    case Family::Weibull: return "Weibull";
    case Family::LogNormal: return "LogNormal";
  }
  return "?";
}

inline std::optional<Family>
family_from_string(std::string_view name) noexcept
{
  for (auto f : kAllFamilies)
    if (to_string(f) == name)
      return f;
  return std::nullopt;
}

inline double
amplitude_from_db(double snr_db) noexcept
{
  return std::pow(10.0, snr_db / 20.0);
}

/// Convergence contract of the iterative fitters.
inline constexpr double kMleTolerance = 1e-9;
inline constexpr int kMleMaxIterations = 200;

struct FitResult
{
  Family family = Family::LogNormal;
  std::vector<double> params;
  double loglik = 0.0;
  int iterations = 0;
  /// Rice only: noncentrality collapsed and the Rayleigh solution was used.
  bool rayleigh_fallback = false;
};

namespace detail {

/// ln I0(z) for z >= 0; switches to the large-argument expansion before
/// I0 overflows.
inline double
log_bessel_i0(double z)
{
  if (z < 500.0)
    return std::log(boost::math::cyl_bessel_i(0, z));
  const double r = 1.0 / z;
  return z - 0.5 * std::log(2.0 * std::numbers::pi * z) +
         std::log1p(r / 8.0 + 9.0 * r * r / 128.0 + 225.0 * r * r * r / 3072.0);
}

/// I1(z) / I0(z) for z >= 0.
inline double
bessel_ratio(double z)
{
  if (z == 0.0)
    return 0.0;
  if (z < 500.0)
    return boost::math::cyl_bessel_i(1, z) / boost::math::cyl_bessel_i(0, z);
  const double r = 1.0 / z;
  return 1.0 - 0.5 * r - 0.125 * r * r - 0.125 * r * r * r;
}

inline bool
converged(double delta, double value)
{
  return std::abs(delta) <= kMleTolerance * std::max(1.0, std::abs(value));
}

[[noreturn]] inline void
fail_convergence(Family f)
{
  throw Error{Errc::no_convergence,
              std::string(to_string(f)) + " MLE did not converge within " + std::to_string(kMleMaxIterations) +
                " iterations"};
}

inline FitResult
fit_rayleigh(std::span<const double> x)
{
  double m2 = 0.0;
  for (double v : x)
    m2 += v * v;
  m2 /= static_cast<double>(x.size());
  return {Family::Rayleigh, {std::sqrt(m2 / 2.0)}, 0.0, 0, false};
}

inline FitResult
fit_lognormal(std::span<const double> x)
{
  double mu = 0.0;
  for (double v : x)
    mu += std::log(v);
  mu /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x)
    var += (std::log(v) - mu) * (std::log(v) - mu);
  var /= static_cast<double>(x.size());
  const double sigma = std::sqrt(var);
  if (!(sigma > 1e-12 * std::max(1.0, std::abs(mu))))
    throw Error{Errc::degenerate_fit, "LogNormal fit: samples have zero log-variance"};
  return {Family::LogNormal, {mu, sigma}, 0.0, 0, false};
}

// Rice ML on amplitudes scaled to unit power. Falls back to the Rayleigh
// solution when the best noncentrality is negligible against sigma.
inline FitResult
fit_rice(std::span<const double> raw)
{
  double m2 = 0.0;
  for (double v : raw)
    m2 += v * v;
  m2 /= static_cast<double>(raw.size());
  const double scale = std::sqrt(m2);
  std::vector<double> x(raw.begin(), raw.end());
  for (double& v : x)
    v /= scale;

  // With unit power every stationary point of the likelihood lies on the
  // curve s2 = (1 - nu^2) / 2 and satisfies the fixed point
  //   nu = mean(x I1(x nu / s2) / I0(x nu / s2)).
  // nu = 0 always solves it. Plain iteration crawls when the optimum sits near
  // zero, so interior solutions are bracketed on a grid and polished by
  // bisection, then compared with nu = 0 by likelihood.
  const auto s2_of = [](double nu) { return std::max((1.0 - nu * nu) / 2.0, 1e-300); };
  const auto excess = [&](double nu) {
    const double s2 = s2_of(nu);
    double acc = 0.0;
    for (double v : x)
      acc += v * bessel_ratio(v * nu / s2);
    return acc / static_cast<double>(x.size()) - nu;
  };
  const auto loglik = [&](double nu) {
    const double s2 = s2_of(nu);
    double ll = 0.0;
    for (double v : x)
      ll += std::log(v / s2) - (v * v + nu * nu) / (2.0 * s2) + log_bessel_i0(v * nu / s2);
    return ll;
  };

  std::vector<double> grid;
  for (int k = 1; k < 64; ++k)
    grid.push_back(k / 64.0);
  for (int j = 7; j <= 40; ++j)
    grid.push_back(1.0 - std::ldexp(1.0, -j));

  FitResult r{Family::Rice, {}, 0.0, 0, false};
  double nu = 0.0;
  double best = loglik(0.0);
  double lo = grid[0], f_lo = excess(lo);
  for (std::size_t g = 1; g < grid.size(); ++g)
  {
    double hi = grid[g];
    const double f_hi = excess(hi);
    if ((f_lo > 0.0) != (f_hi > 0.0))
    {
      double a = lo, b = hi, fa = f_lo;
      int it = 0;
      while (!converged(b - a, b))
      {
        if (++it > kMleMaxIterations)
          fail_convergence(Family::Rice);
        const double mid = 0.5 * (a + b);
        const double fm = excess(mid);
        if ((fm > 0.0) == (fa > 0.0))
        {
          a = mid;
          fa = fm;
        }
        else
          b = mid;
      }
      r.iterations += it;
      const double root = 0.5 * (a + b);
      const double ll = loglik(root);
      if (ll > best)
      {
        best = ll;
        nu = root;
      }
    }
    lo = hi;
    f_lo = f_hi;
  }
  double s2 = s2_of(nu);
  if (nu / std::sqrt(s2) < 1e-6)
  {
    r.rayleigh_fallback = true;
    nu = 0.0;
    s2 = 0.5;
  }
  r.params = {nu * scale, std::sqrt(s2) * scale};
  return r;
}

// Gamma-shape ML equation for m on the squared amplitudes:
//   ln m - digamma(m) = ln(omega) - mean(ln x^2)
// seeded with the closed-form Greenwood-Durand/Thom approximation and solved
// by Newton. The standard parameterization restricts m >= 1/2.
inline FitResult
fit_nakagami(std::span<const double> x)
{
  double omega = 0.0, mean_log = 0.0;
  for (double v : x)
  {
    omega += v * v;
    mean_log += std::log(v * v);
  }
  omega /= static_cast<double>(x.size());
  mean_log /= static_cast<double>(x.size());
  const double delta = std::log(omega) - mean_log;
  if (!(delta > 1e-14))
    throw Error{Errc::degenerate_fit, "Nakagami fit: samples have zero spread"};

  double m = (3.0 - delta + std::sqrt((delta - 3.0) * (delta - 3.0) + 24.0 * delta)) / (12.0 * delta);
  FitResult r{Family::Nakagami, {}, 0.0, 0, false};
  bool done = false;
  for (int it = 1; it <= kMleMaxIterations; ++it)
  {
    const double f = std::log(m) - boost::math::digamma(m) - delta;
    const double fp = 1.0 / m - boost::math::trigamma(m);
    double next = m - f / fp;
    if (!(next > 0.0))
      next = m / 2.0;
    const double step = next - m;
    m = next;
    r.iterations = it;
    if (converged(step, m))
    {
      done = true;
      break;
    }
  }
  if (!done)
    fail_convergence(Family::Nakagami);
  r.params = {std::max(m, 0.5), omega};
  return r;
}

// Profile equation for the Weibull shape k on y = x / scale0:
//   g(k) = sum y^k ln y / sum y^k - 1/k - mean(ln y) = 0
// g is increasing, so Newton is kept inside a shrinking bracket.
inline FitResult
fit_weibull(std::span<const double> x)
{
  const std::size_t n = x.size();
  std::vector<double> ly(n);
  double mean_l = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    mean_l += std::log(x[i]);
  mean_l /= static_cast<double>(n);
  double var_l = 0.0, max_l = -INFINITY;
  for (std::size_t i = 0; i < n; ++i)
  {
    ly[i] = std::log(x[i]) - mean_l; // log of x / geometric mean
    var_l += ly[i] * ly[i];
    max_l = std::max(max_l, ly[i]);
  }
  var_l /= static_cast<double>(n);
  if (!(var_l > 1e-24))
    throw Error{Errc::degenerate_fit, "Weibull fit: samples have zero spread"};

  auto eval = [&](double k, double& g, double& gp, double& s0) {
    // Shift exponents by k * max_l so the largest term is exp(0).
    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
    for (double l : ly)
    {
      const double w = std::exp(k * (l - max_l));
      a0 += w;
      a1 += w * l;
      a2 += w * l * l;
    }
    g = a1 / a0 - 1.0 / k; // mean(ln y) is 0 after centering
    gp = (a2 * a0 - a1 * a1) / (a0 * a0) + 1.0 / (k * k);
    s0 = a0;
  };

  double k = (std::numbers::pi / std::sqrt(6.0)) / std::sqrt(var_l);
  double lo = 0.0, hi = INFINITY;
  FitResult r{Family::Weibull, {}, 0.0, 0, false};
  bool done = false;
  double s0 = 0.0;
  for (int it = 1; it <= kMleMaxIterations; ++it)
  {
    double g, gp;
    eval(k, g, gp, s0);
    if (g < 0.0)
      lo = k;
    else
      hi = k;
    double next = k - g / gp;
    if (!(next > lo && next < hi))
      next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * k;
    const double step = next - k;
    k = next;
    r.iterations = it;
    if (converged(step, k))
    {
      done = true;
      break;
    }
  }
  if (!done)
    fail_convergence(Family::Weibull);
  double g, gp;
  eval(k, g, gp, s0);
  // scale = (mean y^k)^(1/k) * geometric mean, with the max_l shift undone.
  const double scale = std::exp(mean_l + max_l + std::log(s0 / static_cast<double>(n)) / k);
  r.params = {k, scale};
  return r;
}

} // namespace detail

/// Log density of one amplitude sample; -inf outside the support.
inline double
log_pdf(Family f, std::span<const double> p, double x)
{
  if (!(x > 0.0))
    return -INFINITY;
  switch (f)
  {
    case Family::Rice:
    {
      const double nu = p[0], s2 = p[1] * p[1];
      return std::log(x / s2) - (x * x + nu * nu) / (2.0 * s2) + detail::log_bessel_i0(x * nu / s2);
    }
    case Family::Rayleigh:
    {
      const double s2 = p[0] * p[0];
      return std::log(x / s2) - x * x / (2.0 * s2);
    }
    case Family::Nakagami:
    {
      const double m = p[0], omega = p[1];
      return std::numbers::ln2 + m * std::log(m) - boost::math::lgamma(m) - m * std::log(omega) +
             (2.0 * m - 1.0) * std::log(x) - m * x * x / omega;
    }
    case Family::Weibull:
    {
      const double k = p[0], lambda = p[1];
      const double z = std::log(x / lambda);
      return std::log(k / lambda) + (k - 1.0) * z - std::exp(k * z);
    }
    case Family::LogNormal:
    {
      const double mu = p[0], sigma = p[1];
      const double z = (std::log(x) - mu) / sigma;
      return -std::log(x * sigma) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
    }
  }
  return -INFINITY;
}

inline double
log_likelihood(Family f, std::span<const double> params, std::span<const double> samples)
{
  double ll = 0.0;
  for (double x : samples)
    ll += log_pdf(f, params, x);
  return ll;
}

/// Maximum-likelihood fit of one family to positive linear amplitudes.
/// Rayleigh and LogNormal are closed form; Rice, Nakagami and Weibull iterate
/// to a relative parameter change of kMleTolerance within kMleMaxIterations.
inline FitResult
fit_mle(Family family, std::span<const double> samples)
{
  if (samples.size() < 2)
    throw Error{Errc::insufficient_data, std::string(to_string(family)) + " fit needs at least 2 samples"};
  for (double x : samples)
    if (!(x > 0.0) || !std::isfinite(x))
      throw Error{Errc::invalid_argument, "amplitude samples must be finite and strictly positive"};

  FitResult r;
  switch (family)
  {
    case Family::Rice: r = detail::fit_rice(samples); break;
    case Family::Rayleigh: r = detail::fit_rayleigh(samples); break;
    case Family::Nakagami: r = detail::fit_nakagami(samples); break;
    case Family::Weibull: r = detail::fit_weibull(samples); break;
    case Family::LogNormal: r = detail::fit_lognormal(samples); break;
  }
  r.loglik = log_likelihood(family, r.params, samples);
  return r;
}

/// Akaike criterion with the small-sample correction.
inline double
aicc(double log_likelihood, int k, std::size_t n)
{
  if (static_cast<double>(n) <= k + 1.0)
    throw Error{Errc::invalid_argument, "AICc needs n > k + 1 (n = " + std::to_string(n) + ", k = " + std::to_string(k) + ")"};
  const double kd = k;
  return -2.0 * log_likelihood + 2.0 * kd + 2.0 * kd * (kd + 1.0) / (static_cast<double>(n) - kd - 1.0);
}

struct FamilyScore
{
  Family family = Family::LogNormal;
  bool ok = false;
  std::vector<double> params;
  double loglik = 0.0;
  double aicc = 0.0;
  /// Why the family was skipped or failed; empty when ok.
  std::string failure;
};

struct FittedWindow
{
  std::size_t window_index = 0;
  std::size_t n_samples = 0;
  std::array<FamilyScore, kAllFamilies.size()> fits{};
  std::optional<Family> winner;
};

/// Scores every candidate family on one window of amplitudes. A family is
/// skipped when the window has fewer than k + 2 samples.
inline FittedWindow
fit_window(std::size_t window_index, std::span<const double> amplitudes)
{
  FittedWindow w;
  w.window_index = window_index;
  w.n_samples = amplitudes.size();
  double best = INFINITY;
  for (std::size_t i = 0; i < kAllFamilies.size(); ++i)
  {
    auto& s = w.fits[i];
    s.family = kAllFamilies[i];
    const int k = k_params(s.family);
    if (amplitudes.size() < static_cast<std::size_t>(k + 2))
    {
      s.failure = "skipped: " + std::to_string(amplitudes.size()) + " samples";
      continue;
    }
    try
    {
      auto fit = fit_mle(s.family, amplitudes);
      s.params = std::move(fit.params);
      s.loglik = fit.loglik;
      s.aicc = aicc(fit.loglik, k, amplitudes.size());
      s.ok = std::isfinite(s.aicc);
      if (!s.ok)
        s.failure = "non-finite AICc";
    }
    catch (const Error& e)
    {
      s.failure = e.what();
    }
    // Ties go to the earlier family in kAllFamilies.
    if (s.ok && s.aicc < best)
    {
      best = s.aicc;
      w.winner = s.family;
    }
  }
  return w;
}

inline std::vector<double>
amplitudes_of(std::span<const SnrSample> samples)
{
  std::vector<double> a;
  a.reserve(samples.size());
  for (const auto& s : samples)
    a.push_back(amplitude_from_db(s.snr_db));
  return a;
}

/// Fits each slice independently. Work is spread over `threads` workers;
/// results are ordered by slice position whatever the thread count.
inline std::vector<FittedWindow>
fit_windows(std::span<const Slice> windows, unsigned threads = 1)
{
  std::vector<FittedWindow> out(windows.size());
  detail::parallel_for(windows.size(), threads, [&](std::size_t i) {
    const auto amps = amplitudes_of(windows[i].samples);
    out[i] = fit_window(windows[i].index, amps);
  });
  return out;
}

struct FamilySelection
{
  Family best = Family::LogNormal;
  std::array<std::size_t, kAllFamilies.size()> wins{};
  std::size_t scored_windows = 0;

  std::size_t
  wins_of(Family f) const noexcept
  {
    return wins[static_cast<std::size_t>(f)];
  }
};

/// Plurality vote of per-window AICc winners. Ties resolve to the earlier
/// family in kAllFamilies, so the result does not depend on window order.
inline FamilySelection
select_family(std::span<const FittedWindow> windows)
{
  FamilySelection sel;
  for (const auto& w : windows)
  {
    if (!w.winner)
      continue;
    ++sel.wins[static_cast<std::size_t>(*w.winner)];
    ++sel.scored_windows;
  }
  if (sel.scored_windows == 0)
    throw Error{Errc::insufficient_data, "no window has a successful fit"};
  std::size_t best = 0;
  for (std::size_t i = 1; i < sel.wins.size(); ++i)
    if (sel.wins[i] > sel.wins[best])
      best = i;
  sel.best = kAllFamilies[best];
  return sel;
}

inline void
write_fit_report(std::ostream& out, std::span<const FittedWindow> windows)
{
  out << "window_index,family,n_samples,loglik,aicc,winner\n";
  for (const auto& w : windows)
    for (const auto& s : w.fits)
    {
      out << w.window_index << ',' << to_string(s.family) << ',' << w.n_samples << ',';
      if (s.ok)
        out << numfmt::shortest(s.loglik) << ',' << numfmt::shortest(s.aicc);
      else
        out << ',';
      out << ',' << (w.winner == s.family ? 1 : 0) << '\n';
    }
}

// ---------------------------------------------------------------------------
// SNR distribution

/// 10 / ln 10: dB per neper of power.
inline constexpr double kXi = 10.0 / std::numbers::ln10;

/// Log-normal SNR model: 10 log10(gamma) ~ Normal(mu_db, sigma_db).
struct SnrDistribution
{
  Family family = Family::LogNormal;
  double mu_db = 0.0;
  double sigma_db = 1.0;

  void
  validate() const
  {
    if (family != Family::LogNormal)
      throw Error{Errc::invalid_argument, "only the log-normal SNR model is supported"};
    if (!std::isfinite(mu_db) || !(sigma_db > 0.0) || !std::isfinite(sigma_db))
      throw Error{Errc::invalid_argument, "SNR distribution needs finite mu and sigma > 0"};
  }

  friend bool operator==(const SnrDistribution&, const SnrDistribution&) = default;
};

/// Density of the linear SNR gamma:
///   p(gamma) = xi / (sqrt(2 pi) sigma gamma) * exp(-(10 log10 gamma - mu)^2 / (2 sigma^2))
/// The exponential is required for p to be a density; see README.
inline double
snr_pdf(const SnrDistribution& dist, double gamma_linear)
{
  dist.validate();
  if (!(gamma_linear > 0.0))
    throw Error{Errc::invalid_argument, "SNR must be positive in linear scale"};
  const double d = 10.0 * std::log10(gamma_linear) - dist.mu_db;
  return kXi / (std::sqrt(2.0 * std::numbers::pi) * dist.sigma_db * gamma_linear) *
         std::exp(-d * d / (2.0 * dist.sigma_db * dist.sigma_db));
}

/// Log-normal amplitude MLE expressed in dB.
inline SnrDistribution
fit_snr_distribution(std::span<const SnrSample> samples)
{
  const auto amps = amplitudes_of(samples);
  const auto fit = fit_mle(Family::LogNormal, amps);
  constexpr double db_per_neper = 20.0 / std::numbers::ln10;
  return {Family::LogNormal, fit.params[0] * db_per_neper, fit.params[1] * db_per_neper};
}

} // namespace lwfsmc
