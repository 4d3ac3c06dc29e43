#pragma once

// Channel simulation from a fitted model as a receiver moves along the section.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lwfsmc/error.hpp"
#include "lwfsmc/fsmc.hpp"
#include "lwfsmc/numfmt.hpp"
#include "lwfsmc/rng.hpp"
#include "lwfsmc/synth.hpp"
#include "lwfsmc/trace.hpp"

namespace lwfsmc {

/// How a state is turned into an SNR value.
enum class Dither
{
  off,     ///< emit the level's representative
  uniform, ///< emit a uniform draw over the level's cell
};

inline constexpr std::string_view
to_string(Dither d) noexcept
{
  return d == Dither::off ? "off" : "uniform";
}

inline std::optional<Dither>
dither_from_string(std::string_view s) noexcept
{
  if (s == "off")
    return Dither::off;
  if (s == "uniform")
    return Dither::uniform;
  return std::nullopt;
}

/// Slots at positions k * speed * slot_duration covering [0, section_length).
/// Inside an interval the state follows that interval's matrix. On entering a
/// new interval the state becomes the new interval's level containing the last
/// emitted SNR (clamped to the edge levels); this replaces the transition for
/// that slot. The first state is drawn from the first interval's state_probs.
inline SnrTrace
simulate_run(const FsmcModel& model, double speed_m_per_s, std::uint64_t seed, Dither dither = Dither::uniform)
{
  model.validate(1e-9);
  if (!(speed_m_per_s > 0.0) || !std::isfinite(speed_m_per_s))
    throw Error{Errc::invalid_argument, "speed must be positive"};

  const double step = speed_m_per_s * model.slot_duration_s;
  const std::size_t n_slots = detail::bin_count(model.geometry.section_length_m, step);

  Xoshiro256 rng{seed};
  SnrTrace out;
  out.slot_duration_s = model.slot_duration_s;
  out.run_id = "sim-" + std::to_string(seed);
  out.samples.reserve(n_slots);

  std::size_t current = 0;
  State state = detail::categorical(model.intervals.front().state_probs, rng.uniform());
  double last_snr = 0.0;
  for (std::size_t k = 0; k < n_slots; ++k)
  {
    const double x = static_cast<double>(k) * step;
    const std::size_t l = model.interval_at(x);
    const auto& iv = model.intervals[l];
    if (k > 0)
    {
      if (l != current)
        state = state_of(last_snr, iv.thresholds);
      else
        state = detail::categorical(iv.matrix.row(state), rng.uniform());
    }
    current = l;

    const auto& thr = iv.thresholds.thresholds;
    double snr = iv.thresholds.representatives[state];
    if (dither == Dither::uniform)
    {
      const double lo = thr[state], hi = thr[state + 1];
      snr = lo + rng.uniform() * (hi - lo);
      if (snr >= hi)
        snr = std::nextafter(hi, lo);
    }
    out.samples.push_back({x, k, snr});
    last_snr = snr;
  }
  return out;
}

inline void
write_simulation_metadata(std::ostream& out, const FsmcModel& model, std::uint64_t seed, double speed_m_per_s, Dither dither)
{
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(model_fingerprint(model)));
  out << "model_hash=" << hash << '\n'
      << "seed=" << seed << '\n'
      << "speed_m_per_s=" << numfmt::shortest(speed_m_per_s) << '\n'
      << "slot_duration_s=" << numfmt::shortest(model.slot_duration_s) << '\n'
      << "dither=" << to_string(dither) << '\n';
}

// ---------------------------------------------------------------------------
// Stationary distribution

struct StationaryResult
{
  std::vector<double> pi;
  bool reducible = false;
  /// Closed communicating classes with the stationary vector supported on
  /// each; a single entry for an irreducible chain.
  std::vector<std::vector<State>> closed_classes;
  std::vector<std::vector<double>> per_class;
  int iterations = 0;
  std::string warning;
};

namespace detail {

/// Power iteration on the lazy chain (I + P) / 2, which has the same
/// stationary vectors as P and is aperiodic.
inline std::vector<double>
power_iterate(const TransitionMatrix& p, std::vector<double> pi, double tolerance, int max_iterations, int& iterations)
{
  const std::size_t n = p.n_states();
  std::vector<double> next(n);
  for (iterations = 1; iterations <= max_iterations; ++iterations)
  {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        next[j] += pi[i] * p(i, j);
    double sum = 0.0;
    for (double v : next)
      sum += v;
    for (double& v : next)
      v /= sum;

    double residual = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      residual += std::abs(next[j] - pi[j]);
    for (std::size_t j = 0; j < n; ++j)
      pi[j] = 0.5 * (pi[j] + next[j]);
    if (residual < tolerance)
      break;
  }
  return pi;
}

/// Reachability closure over positive entries.
inline std::vector<std::vector<bool>>
reachability(const TransitionMatrix& p)
{
  const std::size_t n = p.n_states();
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i)
  {
    r[i][i] = true;
    for (std::size_t j = 0; j < n; ++j)
      if (p(i, j) > 0.0)
        r[i][j] = true;
  }
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (r[i][k])
        for (std::size_t j = 0; j < n; ++j)
          if (r[k][j])
            r[i][j] = true;
  return r;
}

} // namespace detail

/// Left eigenvector for eigenvalue 1, normalized to sum 1, by power iteration
/// until the L1 residual |pi P - pi| drops below 1e-12. A chain with more than
/// one closed class is flagged reducible and each class is solved separately;
/// `pi` is then the limit from the uniform start.
inline StationaryResult
stationary_distribution(const TransitionMatrix& matrix, double tolerance = 1e-12, int max_iterations = 10'000'000)
{
  matrix.validate(1e-9);
  const std::size_t n = matrix.n_states();
  StationaryResult res;

  const auto reach = detail::reachability(matrix);
  std::vector<bool> assigned(n, false);
  for (std::size_t i = 0; i < n; ++i)
  {
    if (assigned[i])
      continue;
    std::vector<State> cls;
    bool closed = true;
    for (std::size_t j = 0; j < n; ++j)
    {
      if (reach[i][j] && reach[j][i])
        cls.push_back(j);
      else if (reach[i][j])
        closed = false;
    }
    for (State s : cls)
      assigned[s] = true;
    if (closed)
      res.closed_classes.push_back(std::move(cls));
  }
  res.reducible = res.closed_classes.size() > 1;

  for (const auto& cls : res.closed_classes)
  {
    std::vector<double> start(n, 0.0);
    for (State s : cls)
      start[s] = 1.0 / static_cast<double>(cls.size());
    int it = 0;
    res.per_class.push_back(detail::power_iterate(matrix, std::move(start), tolerance, max_iterations, it));
    res.iterations = std::max(res.iterations, it);
  }

  if (res.reducible)
  {
    res.warning = "reducible chain: " + std::to_string(res.closed_classes.size()) + " closed classes";
    int it = 0;
    res.pi = detail::power_iterate(matrix, std::vector<double>(n, 1.0 / static_cast<double>(n)), tolerance, max_iterations, it);
    res.iterations = std::max(res.iterations, it);
  }
  else
  {
    res.pi = res.per_class.front();
  }
  if (res.iterations > max_iterations)
    throw Error{Errc::no_convergence, "power iteration did not reach the residual target"};
  return res;
}

} // namespace lwfsmc
