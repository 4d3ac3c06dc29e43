#pragma once

// End-to-end fitting: traces -> per-interval SNR distributions -> Lloyd-Max
// thresholds -> transition matrices, plus the windowed family selection.

#include <cstddef>
#include <span>
#include <vector>

#include "lwfsmc/distfit.hpp"
#include "lwfsmc/fsmc.hpp"
#include "lwfsmc/parallel.hpp"
#include "lwfsmc/trace.hpp"

namespace lwfsmc {

struct FitOptions
{
  TrackGeometry geometry;
  double interval_m = 25.0;
  std::size_t n_states = 4;
};

inline ModelBuild
fit_model(std::span<const SnrTrace> runs, const FitOptions& opts)
{
  const auto dists = fit_interval_distributions(runs, opts.geometry, opts.interval_m);
  return build_model(runs, opts.geometry, opts.interval_m, opts.n_states, dists);
}

/// Windows of n_wavelengths carrier wavelengths, pooled across runs, each
/// scored against every candidate family.
inline std::vector<FittedWindow>
score_windows(std::span<const SnrTrace> runs, const TrackGeometry& geometry, int n_wavelengths, unsigned threads = 1)
{
  std::vector<Slice> pooled;
  for (const auto& run : runs)
  {
    auto slices = window_by_wavelengths(run, n_wavelengths, geometry);
    if (pooled.empty())
    {
      pooled = std::move(slices);
      continue;
    }
    for (std::size_t k = 0; k < slices.size(); ++k)
      pooled[k].samples.insert(pooled[k].samples.end(), slices[k].samples.begin(), slices[k].samples.end());
  }
  return fit_windows(pooled, threads);
}

} // namespace lwfsmc
