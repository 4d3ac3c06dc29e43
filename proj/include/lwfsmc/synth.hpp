#pragma once

// Synthetic measurement data with known ground truth.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lwfsmc/distfit.hpp"
#include "lwfsmc/error.hpp"
#include "lwfsmc/fsmc.hpp"
#include "lwfsmc/rng.hpp"
#include "lwfsmc/trace.hpp"

namespace lwfsmc {

/// SNR(x) = mean_db_at_origin + slope_db_per_m * x + shadowing(x), with
/// shadowing a zero-mean Gaussian AR(1) sequence of stationary std sigma_db.
struct GroundTruthProfile
{
  double mean_db_at_origin = 49.0;
  double slope_db_per_m = -0.03;
  double sigma_db = 2.0;
  std::uint64_t seed = 0;

  void
  validate() const
  {
    if (!std::isfinite(mean_db_at_origin) || !std::isfinite(slope_db_per_m) || !std::isfinite(sigma_db))
      throw Error{Errc::invalid_argument, "profile fields must be finite"};
    if (sigma_db < 0.0)
      throw Error{Errc::invalid_argument, "shadowing sigma must be >= 0"};
  }

  double
  mean_at(double position_m) const noexcept
  {
    return mean_db_at_origin + slope_db_per_m * position_m;
  }
};

/// One sample every speed * slot_duration metres from 0 up to and including
/// the section end. `correlation` is the AR(1) coefficient between
/// consecutive slots.
inline SnrTrace
generate_trace(const GroundTruthProfile& profile,
               const TrackGeometry& geometry,
               double speed_m_per_s,
               double slot_duration_s,
               double correlation)
{
  profile.validate();
  geometry.validate();
  if (!(speed_m_per_s > 0.0) || !std::isfinite(speed_m_per_s))
    throw Error{Errc::invalid_argument, "speed must be positive"};
  if (!(slot_duration_s > 0.0) || !std::isfinite(slot_duration_s))
    throw Error{Errc::invalid_argument, "slot duration must be positive"};
  if (!(correlation >= 0.0 && correlation < 1.0))
    throw Error{Errc::invalid_argument, "correlation must lie in [0, 1)"};

  const double step = speed_m_per_s * slot_duration_s;
  const double length = geometry.section_length_m;
  const auto last = static_cast<std::uint64_t>(std::floor(length / step * (1.0 + 1e-12)));
  const double innovation = profile.sigma_db * std::sqrt(1.0 - correlation * correlation);

  Xoshiro256 rng{profile.seed};
  SnrTrace trace;
  trace.slot_duration_s = slot_duration_s;
  trace.run_id = "synth-" + std::to_string(profile.seed);
  trace.samples.reserve(last + 1);
  double shadow = profile.sigma_db * rng.normal();
  for (std::uint64_t k = 0; k <= last; ++k)
  {
    if (k > 0)
      shadow = correlation * shadow + innovation * rng.normal();
    const double x = std::min(static_cast<double>(k) * step, length);
    trace.samples.push_back({x, k, profile.mean_at(x) + shadow});
  }
  trace.validate();
  return trace;
}

namespace detail {

/// Index drawn from a discrete distribution given u in [0, 1). Entries are
/// expected to sum to 1; rounding slack goes to the last positive entry.
inline std::size_t
categorical(std::span<const double> probs, double u) noexcept
{
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i)
  {
    if (probs[i] <= 0.0)
      continue;
    last_positive = i;
    acc += probs[i];
    if (u < acc)
      return i;
  }
  return last_positive;
}

} // namespace detail

/// Forward simulation of a Markov chain from an initial distribution.
inline std::vector<State>
generate_markov_chain(const TransitionMatrix& matrix, std::span<const double> initial, std::size_t n_slots, std::uint64_t seed)
{
  matrix.validate(1e-9);
  if (initial.size() != matrix.n_states())
    throw Error{Errc::invalid_argument, "initial distribution length differs from the state count"};
  if (n_slots < 1)
    throw Error{Errc::invalid_argument, "need at least one slot"};
  double sum = 0.0;
  for (double p : initial)
  {
    if (!(p >= 0.0))
      throw Error{Errc::invalid_argument, "initial distribution has a negative entry"};
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error{Errc::invalid_argument, "initial distribution does not sum to 1"};

  Xoshiro256 rng{seed};
  std::vector<State> out(n_slots);
  out[0] = detail::categorical(initial, rng.uniform());
  for (std::size_t k = 1; k < n_slots; ++k)
    out[k] = detail::categorical(matrix.row(out[k - 1]), rng.uniform());
  return out;
}

inline std::vector<State>
generate_markov_trace(const IntervalModel& model, std::size_t n_slots, std::uint64_t seed)
{
  return generate_markov_chain(model.matrix, model.state_probs, n_slots, seed);
}

/// Seeded amplitude draws from one candidate family, parameterized as in
/// fit_mle.
inline std::vector<double>
draw_amplitudes(Family family, std::span<const double> params, std::size_t n, std::uint64_t seed)
{
  if (params.size() != static_cast<std::size_t>(k_params(family)))
    throw Error{Errc::invalid_argument, "wrong parameter count for " + std::string(to_string(family))};
  Xoshiro256 rng{seed};
  std::vector<double> out(n);
  for (auto& x : out)
  {
    switch (family)
    {
      case Family::Rice:
      {
        const double i = params[0] + params[1] * rng.normal();
        const double q = params[1] * rng.normal();
        x = std::hypot(i, q);
        break;
      }
      case Family::Rayleigh: x = params[0] * std::sqrt(-2.0 * std::log(rng.uniform_open())); break;
      case Family::Nakagami:
        x = std::sqrt(rng.gamma(params[0]) * params[1] / params[0]);
        break;
      case Family::Weibull: x = params[1] * std::pow(-std::log(rng.uniform_open()), 1.0 / params[0]); break;
      case Family::LogNormal: x = std::exp(params[0] + params[1] * rng.normal()); break;
    }
  }
  return out;
}

} // namespace lwfsmc
