#pragma once

// Reference computations used only by the tests. None of these share code with
// the library: Gaussian moments come from std::erfc, matrix powers from plain
// loops, and MLE checks from grid search.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

inline double
phi(double z)
{
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double
Phi(double z)
{
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// Exact minimizer of the squared-error quantizer distortion over thresholds
/// restricted to the grid g_min + k*step, for a N(mu, sigma^2) density on
/// [g_min, g_max]. Representatives are cell centroids, which are optimal for
/// any fixed partition, so a dynamic program over cell end points finds the
/// global grid optimum.
struct GridQuantizer
{
  std::vector<double> thresholds;
  double distortion = 0.0; // unnormalized
};

inline GridQuantizer
grid_quantizer(double mu, double sigma, double g_min, double g_max, std::size_t n_cells, double step)
{
  const auto g = static_cast<std::size_t>(std::llround((g_max - g_min) / step));
  // Prefix moments of y = x - mu from g_min up to grid point k.
  std::vector<double> m0(g + 1), m1(g + 1), m2(g + 1);
  const double za = (g_min - mu) / sigma;
  for (std::size_t k = 0; k <= g; ++k)
  {
    const double x = k == g ? g_max : g_min + static_cast<double>(k) * step;
    const double z = (x - mu) / sigma;
    m0[k] = Phi(z) - Phi(za);
    m1[k] = sigma * (phi(za) - phi(z));
    m2[k] = sigma * sigma * (m0[k] + za * phi(za) - z * phi(z));
  }
  auto cost = [&](std::size_t a, std::size_t b) {
    const double w0 = m0[b] - m0[a];
    if (w0 <= 0.0)
      return 0.0;
    const double w1 = m1[b] - m1[a];
    return (m2[b] - m2[a]) - w1 * w1 / w0;
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best(n_cells + 1, std::vector<double>(g + 1, inf));
  std::vector<std::vector<std::size_t>> arg(n_cells + 1, std::vector<std::size_t>(g + 1, 0));
  best[0][0] = 0.0;
  for (std::size_t c = 1; c <= n_cells; ++c)
    for (std::size_t b = c; b <= g; ++b)
      for (std::size_t a = c - 1; a < b; ++a)
      {
        const double v = best[c - 1][a] + cost(a, b);
        if (v < best[c][b])
        {
          best[c][b] = v;
          arg[c][b] = a;
        }
      }

  GridQuantizer out;
  out.distortion = best[n_cells][g];
  out.thresholds.assign(n_cells + 1, 0.0);
  std::size_t b = g;
  for (std::size_t c = n_cells; c > 0; --c)
  {
    out.thresholds[c] = b == g ? g_max : g_min + static_cast<double>(b) * step;
    b = arg[c][b];
  }
  out.thresholds[0] = g_min;
  return out;
}

using Matrix = std::vector<std::vector<double>>;

inline Matrix
multiply(const Matrix& a, const Matrix& b)
{
  const std::size_t n = a.size();
  Matrix c(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j)
        c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Matrix
power(Matrix p, unsigned e)
{
  Matrix r(p.size(), std::vector<double>(p.size(), 0.0));
  for (std::size_t i = 0; i < p.size(); ++i)
    r[i][i] = 1.0;
  while (e)
  {
    if (e & 1u)
      r = multiply(r, p);
    p = multiply(p, p);
    e >>= 1u;
  }
  return r;
}

inline double
weibull_loglik(double shape, double scale, const std::vector<double>& x)
{
  double ll = 0.0;
  for (double v : x)
  {
    const double t = v / scale;
    ll += std::log(shape / scale) + (shape - 1.0) * std::log(t) - std::pow(t, shape);
  }
  return ll;
}

/// Coarse-to-fine grid search over (shape, scale).
inline std::pair<double, double>
weibull_grid_mle(const std::vector<double>& x, double shape_lo, double shape_hi, double scale_lo, double scale_hi)
{
  double bs = shape_lo, bc = scale_lo;
  double ds = (shape_hi - shape_lo) / 40.0, dc = (scale_hi - scale_lo) / 40.0;
  for (int pass = 0; pass < 4; ++pass)
  {
    double best = -std::numeric_limits<double>::infinity();
    const double s0 = pass == 0 ? shape_lo : bs - 20.0 * ds;
    const double c0 = pass == 0 ? scale_lo : bc - 20.0 * dc;
    double nbs = bs, nbc = bc;
    for (int i = 0; i <= 40; ++i)
      for (int j = 0; j <= 40; ++j)
      {
        const double s = s0 + i * ds, c = c0 + j * dc;
        if (s <= 0.0 || c <= 0.0)
          continue;
        const double ll = weibull_loglik(s, c, x);
        if (ll > best)
        {
          best = ll;
          nbs = s;
          nbc = c;
        }
      }
    bs = nbs;
    bc = nbc;
    ds /= 10.0;
    dc /= 10.0;
  }
  return {bs, bc};
}

/// dF/dgamma of the dB-domain Gaussian CDF F(gamma) = Phi((10 log10 gamma - mu) / sigma),
/// by a central difference.
inline double
snr_pdf_numeric(double mu, double sigma, double gamma)
{
  auto cdf = [&](double g) { return Phi((10.0 * std::log10(g) - mu) / sigma); };
  const double h = gamma * 1e-5;
  return (cdf(gamma + h) - cdf(gamma - h)) / (2.0 * h);
}

/// 40 carrier wavelengths at 2.412 GHz.
inline constexpr double kWindow40At2412MHz = 4.97168255389718;

} // namespace oracle
