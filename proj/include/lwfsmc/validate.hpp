#pragma once

// Model-versus-measurement agreement: position-binned MSE, interval-length
// sweeps, and side-by-side transition matrices.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lwfsmc/error.hpp"
#include "lwfsmc/fsmc.hpp"
#include "lwfsmc/numfmt.hpp"
#include "lwfsmc/pipeline.hpp"
#include "lwfsmc/simulate.hpp"
#include "lwfsmc/trace.hpp"

namespace lwfsmc {

/// Mean SNR per fixed-width position bin; nullopt for empty bins.
inline std::vector<std::optional<double>>
binned_means(std::span<const SnrTrace> traces, double bin_m, double section_length_m)
{
  const std::size_t n = detail::bin_count(section_length_m, bin_m);
  std::vector<double> sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (const auto& t : traces)
    for (const auto& s : t.samples)
    {
      if (s.position_m > section_length_m)
        continue;
      const auto k = std::min(static_cast<std::size_t>(std::floor(s.position_m / bin_m)), n - 1);
      sum[k] += s.snr_db;
      ++count[k];
    }
  std::vector<std::optional<double>> out(n);
  for (std::size_t k = 0; k < n; ++k)
    if (count[k] > 0)
      out[k] = sum[k] / static_cast<double>(count[k]);
  return out;
}

struct OverlayPoint
{
  double position_m = 0.0; ///< bin centre
  double measured_mean_db = 0.0;
  double simulated_mean_db = 0.0;
};

struct MseOptions
{
  double speed_m_per_s = 0.0;
  std::size_t n_runs = 1;
  std::uint64_t seed = 0;
  /// Bin width; 0 selects one carrier wavelength.
  double bin_m = 0.0;
  Dither dither = Dither::uniform;
};

struct MseResult
{
  double mse = 0.0;
  std::size_t bins_compared = 0;
  std::vector<OverlayPoint> overlay;
};

/// Mean over position bins of (mean simulated SNR - mean measured SNR)^2.
/// Run r of the n_runs simulations uses seed + r; all runs are pooled per bin.
inline MseResult
mse_against_trace(const FsmcModel& model, const SnrTrace& heldout, const MseOptions& opts)
{
  if (opts.n_runs < 1)
    throw Error{Errc::invalid_argument, "need at least one simulation run"};
  const double bin = opts.bin_m > 0.0 ? opts.bin_m : model.geometry.wavelength_m();
  const double length = model.geometry.section_length_m;

  std::vector<SnrTrace> sims;
  for (std::size_t r = 0; r < opts.n_runs; ++r)
    sims.push_back(simulate_run(model, opts.speed_m_per_s, opts.seed + r, opts.dither));

  const auto sim_means = binned_means(sims, bin, length);
  const auto meas_means = binned_means(std::span<const SnrTrace>(&heldout, 1), bin, length);

  MseResult res;
  double acc = 0.0;
  for (std::size_t k = 0; k < sim_means.size(); ++k)
  {
    if (!sim_means[k] || !meas_means[k])
      continue;
    const double d = *sim_means[k] - *meas_means[k];
    acc += d * d;
    ++res.bins_compared;
    const double centre = std::min((static_cast<double>(k) + 0.5) * bin, 0.5 * (static_cast<double>(k) * bin + length));
    res.overlay.push_back({centre, *meas_means[k], *sim_means[k]});
  }
  if (res.bins_compared == 0)
    throw Error{Errc::insufficient_data, "simulated and measured traces share no position bins"};
  res.mse = acc / static_cast<double>(res.bins_compared);
  return res;
}

struct MatrixComparison
{
  std::size_t interval_index = 0;
  double start_m = 0.0;
  double end_m = 0.0;
  TransitionMatrix model;
  TransitionMatrix empirical;
  double max_abs_diff = 0.0;
};

/// Estimates a matrix from held-out samples under the model's own thresholds
/// and reports the largest entrywise gap inside the tridiagonal band.
inline MatrixComparison
compare_matrices(const IntervalModel& model, std::span<const std::vector<SnrSample>> heldout_runs)
{
  std::vector<std::vector<State>> seqs;
  std::size_t total = 0;
  for (const auto& run : heldout_runs)
  {
    for (const auto& s : run)
      if (s.position_m < model.start_m || s.position_m > model.end_m)
        throw Error{Errc::invalid_argument, "held-out sample at " + numfmt::shortest(s.position_m) + " m lies outside interval " +
                                              std::to_string(model.index)};
    seqs.push_back(states_from_trace(run, model.thresholds));
    total += run.size();
  }
  if (total < 2)
    throw Error{Errc::insufficient_data, "interval " + std::to_string(model.index) + ": need at least 2 held-out samples"};

  MatrixComparison c;
  c.interval_index = model.index;
  c.start_m = model.start_m;
  c.end_m = model.end_m;
  c.model = model.matrix;
  c.empirical = estimate_matrix(seqs, model.n_states()).matrix;
  const std::size_t n = model.n_states();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = (i == 0 ? 0 : i - 1); j <= std::min(i + 1, n - 1); ++j)
      c.max_abs_diff = std::max(c.max_abs_diff, std::abs(c.model(i, j) - c.empirical(i, j)));
  return c;
}

inline MatrixComparison
compare_matrices(const IntervalModel& model, std::span<const SnrSample> heldout)
{
  const std::vector<std::vector<SnrSample>> one{std::vector<SnrSample>(heldout.begin(), heldout.end())};
  return compare_matrices(model, std::span<const std::vector<SnrSample>>(one));
}

/// Per-interval comparisons for every interval the held-out runs cover with at
/// least two samples.
inline std::vector<MatrixComparison>
compare_model(const FsmcModel& model, std::span<const SnrTrace> heldout)
{
  const auto parts = detail::partition_runs(heldout, model.interval_m, model.geometry);
  std::vector<MatrixComparison> out;
  for (std::size_t l = 0; l < parts.size(); ++l)
  {
    std::size_t n = 0;
    for (const auto& r : parts[l])
      n += r.size();
    if (n >= 2)
      out.push_back(compare_matrices(model.intervals[l], std::span<const std::vector<SnrSample>>(parts[l])));
  }
  return out;
}

/// Rows k = 1..N with the sub-diagonal, diagonal and super-diagonal entries of
/// the model and the measurement; "-" where the entry does not exist.
inline void
write_matrix_table(std::ostream& out, std::span<const MatrixComparison> comparisons)
{
  out << "interval_index,start_m,end_m,k,model_p_k_km1,model_p_k_k,model_p_k_kp1,"
         "measured_p_k_km1,measured_p_k_k,measured_p_k_kp1,max_abs_diff\n";
  for (const auto& c : comparisons)
  {
    const std::size_t n = c.model.n_states();
    auto cell = [&](const TransitionMatrix& m, std::size_t i, long j) -> std::string {
      if (j < 0 || static_cast<std::size_t>(j) >= n)
        return "-";
      return numfmt::shortest(m(i, static_cast<std::size_t>(j)));
    };
    for (std::size_t i = 0; i < n; ++i)
    {
      const long ii = static_cast<long>(i);
      out << c.interval_index << ',' << numfmt::shortest(c.start_m) << ',' << numfmt::shortest(c.end_m) << ',' << i + 1;
      for (const auto* m : {&c.model, &c.empirical})
        out << ',' << cell(*m, i, ii - 1) << ',' << cell(*m, i, ii) << ',' << cell(*m, i, ii + 1);
      out << ',' << numfmt::shortest(c.max_abs_diff) << '\n';
    }
  }
}

inline void
write_overlay(std::ostream& out, std::span<const OverlayPoint> points)
{
  out << "position_m,measured_mean_db,simulated_mean_db\n";
  for (const auto& p : points)
    out << numfmt::shortest(p.position_m) << ',' << numfmt::shortest(p.measured_mean_db) << ','
        << numfmt::shortest(p.simulated_mean_db) << '\n';
}

struct ValidationReport
{
  std::size_t n_states = 0;
  std::vector<double> interval_lengths_m;
  std::vector<double> mse_per_interval_length;
  std::vector<MatrixComparison> comparisons;
};

inline void
write_mse_curve(std::ostream& out, const ValidationReport& report)
{
  out << "interval_m,mse\n";
  for (std::size_t i = 0; i < report.interval_lengths_m.size(); ++i)
    out << numfmt::shortest(report.interval_lengths_m[i]) << ',' << numfmt::shortest(report.mse_per_interval_length[i]) << '\n';
}

inline const std::vector<double> kDefaultSweepIntervals{5, 10, 20, 25, 40, 50, 100, 300};

struct SweepOptions
{
  TrackGeometry geometry;
  std::size_t n_states = 4;
  /// 0 replays the held-out trace's spatial step at the model slot duration.
  double speed_m_per_s = 0.0;
  std::size_t n_runs = 10;
  std::uint64_t seed = 0;
  double bin_m = 0.0;
  Dither dither = Dither::uniform;
  unsigned threads = 1;
};

/// Fits a model at every interval length and scores it against `heldout`.
/// Every sweep point simulates with the same seeds, so differences between
/// points come from the models rather than from the random streams.
inline ValidationReport
sweep_intervals(std::span<const SnrTrace> training,
                const SnrTrace& heldout,
                std::span<const double> interval_lengths,
                const SweepOptions& opts)
{
  ValidationReport report;
  report.n_states = opts.n_states;
  report.interval_lengths_m.assign(interval_lengths.begin(), interval_lengths.end());
  report.mse_per_interval_length.assign(interval_lengths.size(), 0.0);

  auto point = [&](std::size_t i) {
    const double len = interval_lengths[i];
    try
    {
      const auto build = fit_model(training, {opts.geometry, len, opts.n_states});
      MseOptions mo;
      mo.speed_m_per_s = opts.speed_m_per_s > 0.0 ? opts.speed_m_per_s : heldout.step_per_slot_m() / build.model.slot_duration_s;
      mo.n_runs = opts.n_runs;
      mo.seed = opts.seed;
      mo.bin_m = opts.bin_m;
      mo.dither = opts.dither;
      report.mse_per_interval_length[i] = mse_against_trace(build.model, heldout, mo).mse;
    }
    catch (const Error& e)
    {
      throw Error{e.code(), "interval length " + numfmt::shortest(len) + " m: " + e.what()};
    }
  };
  detail::parallel_for(interval_lengths.size(), opts.threads, point);
  return report;
}

} // namespace lwfsmc
