#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lwfsmc/error.hpp"
#include "lwfsmc/numfmt.hpp"

namespace lwfsmc {

inline constexpr double kSpeedOfLight = 299792458.0;

/// One received-SNR observation. SNR is kept in dB everywhere in the library.
struct SnrSample
{
  double position_m = 0.0;
  std::uint64_t slot = 0;
  double snr_db = 0.0;

  friend bool operator==(const SnrSample&, const SnrSample&) = default;
};

struct SnrTrace
{
  std::vector<SnrSample> samples;
  double slot_duration_s = 1.0;
  std::string run_id;

  /// Throws Error{invalid_argument} when an invariant is broken.
  void
  validate() const
  {
    if (samples.size() < 2)
      throw Error{Errc::insufficient_data, "trace '" + run_id + "' has fewer than 2 samples"};
    if (!(slot_duration_s > 0.0) || !std::isfinite(slot_duration_s))
      throw Error{Errc::invalid_argument, "slot duration must be positive"};
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
      const auto& s = samples[i];
      if (!std::isfinite(s.position_m) || s.position_m < 0.0)
        throw Error{Errc::invalid_argument, "sample " + std::to_string(i) + ": position must be finite and >= 0"};
      if (!std::isfinite(s.snr_db))
        throw Error{Errc::invalid_argument, "sample " + std::to_string(i) + ": SNR must be finite"};
      if (i > 0)
      {
        if (s.slot <= samples[i - 1].slot)
          throw Error{Errc::invalid_argument, "sample " + std::to_string(i) + ": non-monotonic slots"};
        if (s.position_m < samples[i - 1].position_m)
          throw Error{Errc::invalid_argument, "sample " + std::to_string(i) + ": positions decrease"};
      }
    }
  }

  /// Mean distance travelled per slot; used to replay a measurement's spatial
  /// sampling in simulation.
  double
  step_per_slot_m() const
  {
    const auto& a = samples.front();
    const auto& b = samples.back();
    return (b.position_m - a.position_m) / static_cast<double>(b.slot - a.slot);
  }
};

struct TrackGeometry
{
  double section_length_m = 300.0;
  double carrier_hz = 2.412e9;

  void
  validate() const
  {
    if (!(section_length_m > 0.0) || !std::isfinite(section_length_m))
      throw Error{Errc::invalid_argument, "section length must be positive"};
    if (!(carrier_hz > 0.0) || !std::isfinite(carrier_hz))
      throw Error{Errc::invalid_argument, "carrier frequency must be positive"};
  }

  double
  wavelength_m() const noexcept
  {
    return kSpeedOfLight / carrier_hz;
  }

  friend bool operator==(const TrackGeometry&, const TrackGeometry&) = default;
};

/// Samples falling in one spatial bin [start_m, end_m).
struct Slice
{
  std::size_t index = 0;
  double start_m = 0.0;
  double end_m = 0.0;
  std::vector<SnrSample> samples;

  friend bool operator==(const Slice&, const Slice&) = default;
};

namespace detail {

inline std::string_view
chomp(std::string_view line)
{
  if (!line.empty() && line.back() == '\r')
    line.remove_suffix(1);
  return line;
}

/// Number of bins of width `width` covering `length`; tolerant of ratios
/// like 300 / 0.1 that land a hair off an integer.
inline std::size_t
bin_count(double length, double width)
{
  const double ratio = length / width;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, nearest))
    return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(ratio));
}

inline std::vector<Slice>
bin_samples(const SnrTrace& trace, double width, const TrackGeometry& geometry)
{
  const std::size_t count = bin_count(geometry.section_length_m, width);
  std::vector<Slice> bins(count);
  for (std::size_t k = 0; k < count; ++k)
  {
    bins[k].index = k;
    bins[k].start_m = static_cast<double>(k) * width;
    bins[k].end_m = std::min(static_cast<double>(k + 1) * width, geometry.section_length_m);
  }
  for (const auto& s : trace.samples)
  {
    if (s.position_m > geometry.section_length_m)
      throw Error{Errc::invalid_argument,
                  "sample at " + numfmt::shortest(s.position_m) + " m lies beyond the " +
                    numfmt::shortest(geometry.section_length_m) + " m section"};
    auto k = static_cast<std::size_t>(std::floor(s.position_m / width));
    k = std::min(k, count - 1);
    bins[k].samples.push_back(s);
  }
  return bins;
}

} // namespace detail

/// Reads the `position_m,slot,snr_db` CSV. A run recorded against the
/// direction of travel (positions falling) is reversed and its slots remapped
/// so the result is always position-ascending.
inline SnrTrace
parse_trace(std::istream& in, double slot_duration_s = 1.0, std::string run_id = {})
{
  SnrTrace trace;
  trace.slot_duration_s = slot_duration_s;
  trace.run_id = std::move(run_id);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line))
    throw ParseError{1, "empty input"};
  ++line_no;
  std::string_view header = detail::chomp(line);
  if (header.starts_with("\xEF\xBB\xBF"))
    header.remove_prefix(3);
  if (header != "position_m,slot,snr_db")
    throw ParseError{line_no, "expected header 'position_m,slot,snr_db'"};

  std::vector<std::size_t> lines;
  while (std::getline(in, line))
  {
    ++line_no;
    const std::string_view row = detail::chomp(line);
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos)
      throw ParseError{line_no, "expected 3 comma-separated fields"};

    const auto pos = numfmt::parse_double(row.substr(0, c1));
    const auto slot = numfmt::parse_uint(row.substr(c1 + 1, c2 - c1 - 1));
    const auto snr = numfmt::parse_double(row.substr(c2 + 1));
    if (!pos || !std::isfinite(*pos) || *pos < 0.0)
      throw ParseError{line_no, "position must be a finite non-negative number"};
    if (!slot)
      throw ParseError{line_no, "slot must be a non-negative integer"};
    if (!snr || !std::isfinite(*snr))
      throw ParseError{line_no, "snr_db must be a finite number"};
    if (!trace.samples.empty() && *slot <= trace.samples.back().slot)
      throw ParseError{line_no, "non-monotonic slots"};

    trace.samples.push_back({*pos, *slot, *snr});
    lines.push_back(line_no);
  }

  if (trace.samples.size() < 2)
    throw Error{Errc::insufficient_data, "trace needs at least 2 samples, got " + std::to_string(trace.samples.size())};

  auto& samples = trace.samples;
  if (samples.front().position_m > samples.back().position_m)
  {
    const std::uint64_t slot_sum = samples.front().slot + samples.back().slot;
    std::reverse(samples.begin(), samples.end());
    std::reverse(lines.begin(), lines.end());
    for (auto& s : samples)
      s.slot = slot_sum - s.slot;
  }
  for (std::size_t i = 1; i < samples.size(); ++i)
    if (samples[i].position_m < samples[i - 1].position_m)
      throw ParseError{lines[i], "positions are not monotonic along the run"};

  return trace;
}

inline void
write_trace(std::ostream& out, const SnrTrace& trace)
{
  out << "position_m,slot,snr_db\n";
  for (const auto& s : trace.samples)
    out << numfmt::shortest(s.position_m) << ',' << s.slot << ',' << numfmt::shortest(s.snr_db) << '\n';
}

/// Splits the section into L = ceil(section / interval_m) half-open bins; the
/// last one is shorter when interval_m does not divide the section. Samples at
/// exactly the section end belong to the last bin.
inline std::vector<Slice>
partition_by_intervals(const SnrTrace& trace, double interval_m, const TrackGeometry& geometry)
{
  geometry.validate();
  if (!(interval_m > 0.0) || !std::isfinite(interval_m))
    throw Error{Errc::invalid_argument, "interval length must be positive"};
  if (interval_m > geometry.section_length_m)
    throw Error{Errc::invalid_argument, "interval length exceeds the section length"};
  return detail::bin_samples(trace, interval_m, geometry);
}

/// Fitting windows of n_wavelengths carrier wavelengths each.
inline std::vector<Slice>
window_by_wavelengths(const SnrTrace& trace, int n_wavelengths, const TrackGeometry& geometry)
{
  geometry.validate();
  if (n_wavelengths < 1)
    throw Error{Errc::invalid_argument, "window must span at least one wavelength"};
  const double width = n_wavelengths * geometry.wavelength_m();
  return detail::bin_samples(trace, std::min(width, geometry.section_length_m), geometry);
}

} // namespace lwfsmc
