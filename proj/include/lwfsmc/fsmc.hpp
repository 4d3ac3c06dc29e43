#pragma once

// Location-dependent finite-state Markov channel.
//
// States are 0-based in code (state s_n of the usual 1-based notation is
// index n - 1). State n covers SNR in [g_n, g_{n+1}); samples outside the
// threshold range clamp to the edge states. Transitions are restricted to
// the tridiagonal band: observed jumps of more than one level are counted,
// reported as the off-band fraction, and dropped before row normalization.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lwfsmc/distfit.hpp"
#include "lwfsmc/error.hpp"
#include "lwfsmc/numfmt.hpp"
#include "lwfsmc/quantizer.hpp"
#include "lwfsmc/trace.hpp"

namespace lwfsmc {

using State = std::size_t;

class TransitionMatrix
{
public:
  TransitionMatrix() = default;

  explicit TransitionMatrix(std::size_t n)
    : m_n{n}
    , m_p(n * n, 0.0)
  {}

  /// Row-major entries; rows are "from" states.
  TransitionMatrix(std::size_t n, std::vector<double> entries)
    : m_n{n}
    , m_p{std::move(entries)}
  {
    if (m_p.size() != n * n)
      throw Error{Errc::invalid_argument, "transition matrix needs N*N entries"};
  }

  static TransitionMatrix
  identity(std::size_t n)
  {
    TransitionMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
      m(i, i) = 1.0;
    return m;
  }

  std::size_t n_states() const noexcept { return m_n; }
  double operator()(std::size_t from, std::size_t to) const noexcept { return m_p[from * m_n + to]; }
  double& operator()(std::size_t from, std::size_t to) noexcept { return m_p[from * m_n + to]; }
  std::span<const double> entries() const noexcept { return m_p; }

  std::span<const double>
  row(std::size_t from) const noexcept
  {
    return std::span<const double>(m_p).subspan(from * m_n, m_n);
  }

  bool
  is_tridiagonal() const noexcept
  {
    for (std::size_t i = 0; i < m_n; ++i)
      for (std::size_t j = 0; j < m_n; ++j)
        if ((i > j + 1 || j > i + 1) && (*this)(i, j) != 0.0)
          return false;
    return true;
  }

  /// Entries in [0, 1] and every row summing to 1 within `tolerance`.
  void
  validate(double tolerance = 1e-12) const
  {
    if (m_n == 0)
      throw Error{Errc::invalid_argument, "transition matrix is empty"};
    for (std::size_t i = 0; i < m_n; ++i)
    {
      double sum = 0.0;
      for (double p : row(i))
      {
        if (!(p >= 0.0 && p <= 1.0))
          throw Error{Errc::invalid_argument, "row " + std::to_string(i) + " has an entry outside [0, 1]"};
        sum += p;
      }
      if (std::abs(sum - 1.0) > tolerance)
        throw Error{Errc::invalid_argument, "row " + std::to_string(i) + " sums to " + numfmt::shortest(sum)};
    }
  }

  friend bool operator==(const TransitionMatrix&, const TransitionMatrix&) = default;

private:
  std::size_t m_n = 0;
  std::vector<double> m_p;
};

/// Level of one SNR value under `set`; out-of-range values clamp.
inline State
state_of(double snr_db, const ThresholdSet& set) noexcept
{
  const auto first = set.thresholds.begin() + 1;
  const auto last = set.thresholds.end() - 1;
  return static_cast<State>(std::upper_bound(first, last, snr_db) - first);
}

inline std::vector<State>
states_from_trace(std::span<const SnrSample> samples, const ThresholdSet& set)
{
  set.validate();
  std::vector<State> out;
  out.reserve(samples.size());
  for (const auto& s : samples)
    out.push_back(state_of(s.snr_db, set));
  return out;
}

struct MatrixEstimate
{
  TransitionMatrix matrix;
  std::vector<double> state_probs;
  std::size_t transitions = 0;
  std::size_t offband_transitions = 0;
  double offband_fraction = 0.0;
  /// Visited states with no in-band successor; given a self-loop.
  std::vector<State> dead_end_states;
  /// Never-visited states; also given a self-loop so every row is stochastic.
  std::vector<State> unvisited_states;
};

/// Counts consecutive pairs within each run (pairs never straddle two runs),
/// keeps only the tridiagonal band, and normalizes each row.
inline MatrixEstimate
estimate_matrix(std::span<const std::vector<State>> runs, std::size_t n_states)
{
  if (n_states < 1)
    throw Error{Errc::invalid_argument, "need at least one state"};
  MatrixEstimate est;
  std::vector<double> counts(n_states * n_states, 0.0);
  std::vector<double> visits(n_states, 0.0);
  std::size_t total = 0;
  for (const auto& run : runs)
  {
    for (std::size_t k = 0; k < run.size(); ++k)
    {
      if (run[k] >= n_states)
        throw Error{Errc::invalid_argument, "state index " + std::to_string(run[k]) + " out of range"};
      visits[run[k]] += 1.0;
      if (k + 1 < run.size())
      {
        if (run[k + 1] >= n_states)
          throw Error{Errc::invalid_argument, "state index " + std::to_string(run[k + 1]) + " out of range"};
        counts[run[k] * n_states + run[k + 1]] += 1.0;
        ++est.transitions;
        if (run[k] > run[k + 1] + 1 || run[k + 1] > run[k] + 1)
          ++est.offband_transitions;
      }
    }
    total += run.size();
  }
  if (est.transitions == 0)
    throw Error{Errc::insufficient_data, "state sequence needs at least 2 consecutive samples"};

  est.offband_fraction = static_cast<double>(est.offband_transitions) / static_cast<double>(est.transitions);
  est.state_probs.resize(n_states);
  for (std::size_t i = 0; i < n_states; ++i)
    est.state_probs[i] = visits[i] / static_cast<double>(total);

  est.matrix = TransitionMatrix(n_states);
  for (std::size_t i = 0; i < n_states; ++i)
  {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = std::min(i + 1, n_states - 1);
    double band = 0.0;
    for (std::size_t j = lo; j <= hi; ++j)
      band += counts[i * n_states + j];
    if (band == 0.0)
    {
      est.matrix(i, i) = 1.0;
      (visits[i] > 0.0 ? est.dead_end_states : est.unvisited_states).push_back(i);
      continue;
    }
    for (std::size_t j = lo; j <= hi; ++j)
      est.matrix(i, j) = counts[i * n_states + j] / band;
  }
  return est;
}

inline MatrixEstimate
estimate_matrix(const std::vector<State>& sequence, std::size_t n_states)
{
  return estimate_matrix(std::span<const std::vector<State>>(&sequence, 1), n_states);
}

struct IntervalModel
{
  std::size_t index = 0;
  double start_m = 0.0;
  double end_m = 0.0;
  ThresholdSet thresholds;
  std::vector<double> state_probs;
  TransitionMatrix matrix;
  std::size_t sample_count = 0;
  double offband_fraction = 0.0;

  std::size_t n_states() const noexcept { return thresholds.n_states(); }

  void
  validate(double tolerance = 1e-12) const
  {
    thresholds.validate();
    if (!(end_m > start_m))
      throw Error{Errc::invalid_argument, "interval " + std::to_string(index) + " has zero length"};
    if (matrix.n_states() != thresholds.n_states() || state_probs.size() != thresholds.n_states())
      throw Error{Errc::invalid_argument, "interval " + std::to_string(index) + ": state counts disagree"};
    matrix.validate(tolerance);
    if (!matrix.is_tridiagonal())
      throw Error{Errc::invalid_argument, "interval " + std::to_string(index) + ": matrix is not tridiagonal"};
    double sum = 0.0;
    for (double p : state_probs)
    {
      if (!(p >= 0.0 && p <= 1.0))
        throw Error{Errc::invalid_argument, "interval " + std::to_string(index) + ": state probability outside [0, 1]"};
      sum += p;
    }
    if (std::abs(sum - 1.0) > tolerance)
      throw Error{Errc::invalid_argument, "interval " + std::to_string(index) + ": state probabilities sum to " + numfmt::shortest(sum)};
  }

  friend bool operator==(const IntervalModel&, const IntervalModel&) = default;
};

struct FsmcModel
{
  TrackGeometry geometry;
  double interval_m = 0.0;
  std::size_t n_states = 0;
  double slot_duration_s = 1.0;
  std::vector<IntervalModel> intervals;

  void
  validate(double tolerance = 1e-12) const
  {
    geometry.validate();
    if (!(interval_m > 0.0) || !(slot_duration_s > 0.0))
      throw Error{Errc::invalid_argument, "interval length and slot duration must be positive"};
    if (intervals.empty())
      throw Error{Errc::invalid_argument, "model has no intervals"};
    if (intervals.size() != detail::bin_count(geometry.section_length_m, interval_m))
      throw Error{Errc::invalid_argument, "interval count does not cover the section"};
    double expected_start = 0.0;
    for (std::size_t i = 0; i < intervals.size(); ++i)
    {
      const auto& iv = intervals[i];
      if (iv.index != i)
        throw Error{Errc::invalid_argument, "intervals out of order at " + std::to_string(i)};
      if (iv.n_states() != n_states)
        throw Error{Errc::invalid_argument, "interval " + std::to_string(i) + " has a different state count"};
      if (iv.start_m != expected_start)
        throw Error{Errc::invalid_argument, "interval " + std::to_string(i) + " is not contiguous with its predecessor"};
      iv.validate(tolerance);
      expected_start = iv.end_m;
    }
  }

  /// Interval owning `position_m`, with the section end folded into the last.
  std::size_t
  interval_at(double position_m) const noexcept
  {
    const auto k = static_cast<std::size_t>(std::max(0.0, std::floor(position_m / interval_m)));
    return std::min(k, intervals.size() - 1);
  }

  friend bool operator==(const FsmcModel&, const FsmcModel&) = default;
};

struct ModelBuild
{
  FsmcModel model;
  std::vector<std::string> warnings;
};

namespace detail {

/// Per-interval sample lists, one entry per run, in run order.
inline std::vector<std::vector<std::vector<SnrSample>>>
partition_runs(std::span<const SnrTrace> runs, double interval_m, const TrackGeometry& geometry)
{
  std::vector<std::vector<std::vector<SnrSample>>> out;
  for (const auto& run : runs)
  {
    auto slices = partition_by_intervals(run, interval_m, geometry);
    if (out.empty())
      out.resize(slices.size());
    for (std::size_t l = 0; l < slices.size(); ++l)
      out[l].push_back(std::move(slices[l].samples));
  }
  return out;
}

inline std::vector<SnrSample>
pooled(const std::vector<std::vector<SnrSample>>& per_run)
{
  std::vector<SnrSample> all;
  for (const auto& r : per_run)
    all.insert(all.end(), r.begin(), r.end());
  return all;
}

} // namespace detail

/// Log-normal SNR fit for every interval, pooling all runs.
inline std::vector<SnrDistribution>
fit_interval_distributions(std::span<const SnrTrace> runs, const TrackGeometry& geometry, double interval_m)
{
  const auto parts = detail::partition_runs(runs, interval_m, geometry);
  std::vector<SnrDistribution> out;
  for (std::size_t l = 0; l < parts.size(); ++l)
  {
    const auto all = detail::pooled(parts[l]);
    if (all.size() < 2)
      throw Error{Errc::insufficient_data, "interval " + std::to_string(l) + " holds " + std::to_string(all.size()) + " samples"};
    try
    {
      out.push_back(fit_snr_distribution(all));
    }
    catch (const Error& e)
    {
      throw Error{e.code(), "interval " + std::to_string(l) + ": " + e.what()};
    }
  }
  return out;
}

/// One threshold set and transition matrix per interval. Thresholds come from
/// Lloyd-Max against `distributions[l]` with the end points pinned to the
/// interval's observed SNR range.
inline ModelBuild
build_model(std::span<const SnrTrace> runs,
            const TrackGeometry& geometry,
            double interval_m,
            std::size_t n_states,
            std::span<const SnrDistribution> distributions)
{
  if (runs.empty())
    throw Error{Errc::insufficient_data, "no traces to fit"};
  for (const auto& r : runs)
    r.validate();
  if (!is_power_of_two_levels(n_states))
    throw Error{Errc::invalid_argument, "states must be a power of two >= 2, got " + std::to_string(n_states)};

  const auto parts = detail::partition_runs(runs, interval_m, geometry);
  if (distributions.size() != parts.size())
    throw Error{Errc::invalid_argument,
                "need one SNR distribution per interval (" + std::to_string(parts.size()) + "), got " + std::to_string(distributions.size())};

  ModelBuild out;
  auto& model = out.model;
  model.geometry = geometry;
  model.interval_m = interval_m;
  model.n_states = n_states;
  model.slot_duration_s = runs.front().slot_duration_s;

  for (std::size_t l = 0; l < parts.size(); ++l)
  {
    const std::string where = "interval " + std::to_string(l);
    const auto all = detail::pooled(parts[l]);
    if (all.size() < 2)
      throw Error{Errc::insufficient_data, where + " holds " + std::to_string(all.size()) + " samples"};
    try
    {
      const auto [lo, hi] = std::minmax_element(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.snr_db < b.snr_db; });
      if (lo->snr_db == hi->snr_db)
        throw Error{Errc::degenerate_fit, "degenerate distribution (min = max = " + numfmt::shortest(lo->snr_db) + " dB)"};

      IntervalModel iv;
      iv.index = l;
      iv.start_m = static_cast<double>(l) * interval_m;
      iv.end_m = std::min(static_cast<double>(l + 1) * interval_m, geometry.section_length_m);
      iv.thresholds = lloyd_max(distributions[l], n_states, lo->snr_db, hi->snr_db);

      std::vector<std::vector<State>> seqs;
      for (const auto& run_samples : parts[l])
        seqs.push_back(states_from_trace(run_samples, iv.thresholds));
      auto est = estimate_matrix(seqs, n_states);
      iv.matrix = std::move(est.matrix);
      iv.state_probs = std::move(est.state_probs);
      iv.sample_count = all.size();
      iv.offband_fraction = est.offband_fraction;
      for (State s : est.dead_end_states)
        out.warnings.push_back(where + ": state " + std::to_string(s + 1) + " has no in-band successor; set to self-loop");
      if (est.offband_transitions > 0)
        out.warnings.push_back(where + ": " + std::to_string(est.offband_transitions) + " of " + std::to_string(est.transitions) +
                               " transitions skip a level");
      model.intervals.push_back(std::move(iv));
    }
    catch (const Error& e)
    {
      throw Error{e.code(), where + ": " + e.what()};
    }
  }
  model.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Model file

namespace detail {

inline void
write_array(std::ostream& out, std::span<const double> xs)
{
  out << '[';
  for (std::size_t i = 0; i < xs.size(); ++i)
    out << (i ? ", " : "") << numfmt::sig17(xs[i]);
  out << ']';
}

} // namespace detail

/// Fixed key order and 17 significant digits, so equal models serialize to
/// equal bytes and parsing recovers every double exactly.
inline void
write_model_json(std::ostream& out, const FsmcModel& model)
{
  using numfmt::sig17;
  out << "{\n";
  out << "  \"geometry\": {\"section_length_m\": " << sig17(model.geometry.section_length_m)
      << ", \"carrier_hz\": " << sig17(model.geometry.carrier_hz) << "},\n";
  out << "  \"interval_m\": " << sig17(model.interval_m) << ",\n";
  out << "  \"n_states\": " << model.n_states << ",\n";
  out << "  \"slot_duration_s\": " << sig17(model.slot_duration_s) << ",\n";
  out << "  \"intervals\": [";
  for (std::size_t i = 0; i < model.intervals.size(); ++i)
  {
    const auto& iv = model.intervals[i];
    out << (i ? ",\n" : "\n") << "    {\"index\": " << iv.index << ", \"span\": ";
    const double span[2] = {iv.start_m, iv.end_m};
    detail::write_array(out, span);
    out << ",\n     \"thresholds\": ";
    detail::write_array(out, iv.thresholds.thresholds);
    out << ",\n     \"representatives\": ";
    detail::write_array(out, iv.thresholds.representatives);
    out << ",\n     \"distortion\": " << sig17(iv.thresholds.distortion);
    out << ",\n     \"state_probs\": ";
    detail::write_array(out, iv.state_probs);
    out << ",\n     \"matrix\": ";
    detail::write_array(out, iv.matrix.entries());
    out << ",\n     \"sample_count\": " << iv.sample_count << ", \"offband_fraction\": " << sig17(iv.offband_fraction) << '}';
  }
  out << "\n  ]\n}\n";
}

inline std::string
model_to_json(const FsmcModel& model)
{
  std::ostringstream os;
  write_model_json(os, model);
  return os.str();
}

/// Reads a model file and checks every model invariant (row sums to 1e-9).
inline FsmcModel
parse_model_json(std::istream& in)
{
  try
  {
    const auto j = nlohmann::json::parse(in);
    FsmcModel m;
    m.geometry.section_length_m = j.at("geometry").at("section_length_m").get<double>();
    m.geometry.carrier_hz = j.at("geometry").at("carrier_hz").get<double>();
    m.interval_m = j.at("interval_m").get<double>();
    m.n_states = j.at("n_states").get<std::size_t>();
    m.slot_duration_s = j.at("slot_duration_s").get<double>();
    for (const auto& o : j.at("intervals"))
    {
      IntervalModel iv;
      iv.index = o.at("index").get<std::size_t>();
      const auto span = o.at("span").get<std::vector<double>>();
      if (span.size() != 2)
        throw Error{Errc::parse_error, "interval span must have two entries"};
      iv.start_m = span[0];
      iv.end_m = span[1];
      iv.thresholds.thresholds = o.at("thresholds").get<std::vector<double>>();
      iv.thresholds.representatives = o.at("representatives").get<std::vector<double>>();
      iv.thresholds.distortion = o.value("distortion", 0.0);
      iv.state_probs = o.at("state_probs").get<std::vector<double>>();
      const auto n = iv.thresholds.representatives.size();
      iv.matrix = TransitionMatrix(n, o.at("matrix").get<std::vector<double>>());
      iv.sample_count = o.at("sample_count").get<std::size_t>();
      iv.offband_fraction = o.at("offband_fraction").get<double>();
      m.intervals.push_back(std::move(iv));
    }
    m.validate(1e-9);
    return m;
  }
  catch (const nlohmann::json::exception& e)
  {
    throw Error{Errc::parse_error, std::string("model file: ") + e.what()};
  }
  catch (const Error& e)
  {
    throw Error{Errc::parse_error, std::string("model file: ") + e.what()};
  }
}

/// FNV-1a over the serialized model; identifies the model in run metadata.
inline std::uint64_t
model_fingerprint(const FsmcModel& model)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : model_to_json(model))
  {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace lwfsmc
