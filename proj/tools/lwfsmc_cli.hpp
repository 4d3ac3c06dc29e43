#pragma once

// Command-line front end. run() is kept separate from main() so the test
// suite can drive it in-process.
//
// Exit codes:
//   0  success
//   1  unexpected internal error
//   2  usage error: unknown subcommand, bad or missing flag, invalid value
//   3  file could not be opened, read or written
//   4  malformed input file (trace CSV or model JSON)
//   5  fitting/simulation failure: degenerate data, no convergence, too few samples

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lwfsmc/lwfsmc.hpp"

namespace lwfsmc::cli {

enum ExitCode : int
{
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIo = 3,
  kMalformed = 4,
  kModelFailure = 5,
};

/// Stream numbers for derive_seed; one per stochastic stage.
enum class Stage : std::uint64_t
{
  synth = 1,
  simulate = 2,
  validate = 3,
};

inline std::uint64_t
stage_seed(std::uint64_t seed, Stage stage)
{
  return derive_seed(seed, static_cast<std::uint64_t>(stage));
}

inline int
exit_code_for(Errc code)
{
  switch (code)
  {
    case Errc::invalid_argument: return kUsage;
    case Errc::io_error: return kIo;
    case Errc::parse_error: return kMalformed;
    case Errc::insufficient_data:
    case Errc::degenerate_fit:
    case Errc::degenerate_cell:
    case Errc::no_convergence:
    case Errc::quadrature_failure: return kModelFailure;
  }
  return kInternal;
}

namespace detail {

inline SnrTrace
read_trace(const std::string& path, double slot_duration_s)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error{Errc::io_error, "cannot open trace '" + path + "'"};
  try
  {
    return parse_trace(in, slot_duration_s, path);
  }
  catch (const Error& e)
  {
    // Too few rows is still a malformed file from the caller's side.
    throw Error{Errc::parse_error, path + ": " + e.what()};
  }
}

inline FsmcModel
read_model(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error{Errc::io_error, "cannot open model '" + path + "'"};
  try
  {
    return parse_model_json(in);
  }
  catch (const Error& e)
  {
    throw Error{e.code(), path + ": " + e.what()};
  }
}

/// Writes `text` to `path`, or to `out` when path is "-".
inline void
emit(const std::string& path, const std::string& text, std::ostream& out)
{
  if (path == "-")
  {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f || !(f << text) || !f.flush())
    throw Error{Errc::io_error, "cannot write '" + path + "'"};
}

template <class Fn>
std::string
render(Fn&& fn)
{
  std::ostringstream os;
  fn(os);
  return os.str();
}

struct GeometryFlags
{
  double section_length_m = 300.0;
  double carrier_hz = 2.412e9;

  void
  add_to(CLI::App* app)
  {
    app->add_option("--section-length-m", section_length_m, "Modelled waveguide section length (m)")->capture_default_str();
    app->add_option("--carrier-hz", carrier_hz, "Carrier frequency (Hz)")->capture_default_str();
  }

  TrackGeometry
  geometry() const
  {
    return {section_length_m, carrier_hz};
  }
};

inline const CLI::Validator kPowerOfTwo{
  [](std::string& s) -> std::string {
    const auto v = numfmt::parse_uint(s);
    if (!v || !is_power_of_two_levels(*v))
      return "states must be a power of two >= 2 (got " + s + ")";
    return {};
  },
  "POWER_OF_TWO"};

inline const CLI::Validator kDitherMode{
  [](std::string& s) -> std::string { return dither_from_string(s) ? std::string{} : "dither must be 'off' or 'uniform'"; },
  "off|uniform"};

} // namespace detail

inline int
run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
  CLI::App app{"Location-dependent finite-state Markov channel models for leaky-waveguide SNR traces.\n"
               "Exit codes: 0 ok, 1 internal error, 2 usage error, 3 file i/o error, 4 malformed input, 5 fitting/simulation failure."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::uint64_t seed = 0;
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Master seed; per-stage seeds are derived from it")->required();
  };

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic SNR trace from a linear-decay + AR(1) shadowing profile");
  GroundTruthProfile profile;
  detail::GeometryFlags synth_geo;
  double synth_speed = 10.0, synth_slot = 0.005, synth_corr = 0.9;
  std::string synth_out = "-";
  synth->add_option("--mean-db", profile.mean_db_at_origin, "Mean SNR at position 0 (dB)")->capture_default_str();
  synth->add_option("--slope-db-per-m", profile.slope_db_per_m, "Mean SNR decay along the section (dB/m)")->capture_default_str();
  synth->add_option("--sigma-db", profile.sigma_db, "Shadowing standard deviation (dB)")->capture_default_str();
  synth->add_option("--correlation", synth_corr, "AR(1) coefficient between consecutive slots, in [0, 1)")->capture_default_str();
  synth->add_option("--speed", synth_speed, "Receiver speed (m/s)")->capture_default_str();
  synth->add_option("--slot-duration-s", synth_slot, "Slot duration (s)")->capture_default_str();
  synth_geo.add_to(synth);
  synth->add_option("--out", synth_out, "Output trace CSV ('-' for stdout)")->capture_default_str();
  add_seed(synth);

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a location-dependent FSMC model to one or more trace CSVs");
  std::vector<std::string> fit_traces;
  std::string fit_out, fit_report;
  double fit_interval = 25.0, fit_slot = 1.0;
  std::size_t fit_states = 4;
  int fit_windows = 40;
  unsigned fit_threads = 1;
  detail::GeometryFlags fit_geo;
  fit->add_option("--trace", fit_traces, "Training trace CSV (repeat for several runs)")->required();
  fit->add_option("--interval-m", fit_interval, "Distance interval per transition matrix (m)")->capture_default_str();
  fit->add_option("--states", fit_states, "Number of SNR levels (power of two)")->check(detail::kPowerOfTwo)->capture_default_str();
  fit->add_option("--window-wavelengths", fit_windows, "Distribution-selection window length (carrier wavelengths)")->capture_default_str();
  fit->add_option("--slot-duration-s", fit_slot, "Slot duration of the traces (s); 1 means 'slot units'")->capture_default_str();
  fit->add_option("--threads", fit_threads, "Worker threads for window fitting")->capture_default_str();
  fit_geo.add_to(fit);
  fit->add_option("--out", fit_out, "Output model JSON")->required();
  fit->add_option("--fit-report", fit_report, "Optional per-window AICc report CSV");
  add_seed(fit);

  // thresholds
  auto* thr = app.add_subcommand("thresholds", "Export a model's SNR level thresholds as CSV");
  std::string thr_model, thr_out = "-";
  thr->add_option("--model", thr_model, "Model JSON")->required();
  thr->add_option("--out", thr_out, "Output CSV ('-' for stdout)")->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate an SNR trace from a model");
  std::string sim_model, sim_out = "-", sim_meta, sim_dither = "uniform";
  double sim_speed = 0.0;
  sim->add_option("--model", sim_model, "Model JSON")->required();
  sim->add_option("--speed", sim_speed, "Receiver speed (m/s)")->required();
  sim->add_option("--dither", sim_dither, "SNR emission within a level")->check(detail::kDitherMode)->capture_default_str();
  sim->add_option("--out", sim_out, "Output trace CSV ('-' for stdout)")->capture_default_str();
  sim->add_option("--meta", sim_meta, "Metadata sidecar path (default: <out>.meta when --out is a file)");
  add_seed(sim);

  // validate
  auto* val = app.add_subcommand("validate", "Compare a model against a held-out trace");
  std::string val_model, val_heldout, val_mse_out = "-", val_table_out, val_overlay_out, val_dither = "uniform";
  double val_speed = 0.0, val_bin = 0.0, val_slot = 1.0;
  std::size_t val_runs = 10;
  val->add_option("--model", val_model, "Model JSON")->required();
  val->add_option("--heldout", val_heldout, "Held-out trace CSV")->required();
  val->add_option("--speed", val_speed, "Simulation speed (m/s); 0 replays the held-out trace's step per slot")->capture_default_str();
  val->add_option("--runs", val_runs, "Simulated runs averaged per bin")->capture_default_str();
  val->add_option("--bin-m", val_bin, "MSE position bin (m); 0 means one carrier wavelength")->capture_default_str();
  val->add_option("--slot-duration-s", val_slot, "Slot duration of the held-out trace (s)")->capture_default_str();
  val->add_option("--dither", val_dither, "SNR emission within a level")->check(detail::kDitherMode)->capture_default_str();
  val->add_option("--mse-out", val_mse_out, "interval_m,mse CSV ('-' for stdout)")->capture_default_str();
  val->add_option("--table-out", val_table_out, "Per-interval transition matrix comparison CSV");
  val->add_option("--overlay-out", val_overlay_out, "position_m,measured_mean_db,simulated_mean_db CSV");
  add_seed(val);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "MSE of fitted models across interval lengths");
  std::vector<std::string> sw_traces;
  std::string sw_heldout, sw_out = "-", sw_dither = "uniform";
  std::vector<double> sw_intervals = kDefaultSweepIntervals;
  std::size_t sw_states = 4, sw_runs = 10;
  double sw_speed = 0.0, sw_bin = 0.0, sw_slot = 1.0;
  unsigned sw_threads = 1;
  detail::GeometryFlags sw_geo;
  sweep->add_option("--trace", sw_traces, "Training trace CSV (repeat for several runs)")->required();
  sweep->add_option("--heldout", sw_heldout, "Held-out trace CSV (default: the first training trace)");
  sweep->add_option("--intervals", sw_intervals, "Comma-separated interval lengths (m)")->delimiter(',')->capture_default_str();
  sweep->add_option("--states", sw_states, "Number of SNR levels (power of two)")->check(detail::kPowerOfTwo)->capture_default_str();
  sweep->add_option("--runs", sw_runs, "Simulated runs averaged per bin")->capture_default_str();
  sweep->add_option("--speed", sw_speed, "Simulation speed (m/s); 0 replays the held-out trace's step per slot")->capture_default_str();
  sweep->add_option("--bin-m", sw_bin, "MSE position bin (m); 0 means one carrier wavelength")->capture_default_str();
  sweep->add_option("--slot-duration-s", sw_slot, "Slot duration of the traces (s)")->capture_default_str();
  sweep->add_option("--dither", sw_dither, "SNR emission within a level")->check(detail::kDitherMode)->capture_default_str();
  sweep->add_option("--threads", sw_threads, "Worker threads across sweep points")->capture_default_str();
  sw_geo.add_to(sweep);
  sweep->add_option("--out", sw_out, "interval_m,mse CSV ('-' for stdout)")->capture_default_str();
  add_seed(sweep);

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try
  {
    if (*synth)
    {
      profile.seed = stage_seed(seed, Stage::synth);
      const auto trace = generate_trace(profile, synth_geo.geometry(), synth_speed, synth_slot, synth_corr);
      detail::emit(synth_out, detail::render([&](std::ostream& os) { write_trace(os, trace); }), out);
    }
    else if (*fit)
    {
      std::vector<SnrTrace> runs;
      for (const auto& p : fit_traces)
        runs.push_back(detail::read_trace(p, fit_slot));
      const auto geometry = fit_geo.geometry();

      const auto windows = score_windows(runs, geometry, fit_windows, fit_threads);
      if (!fit_report.empty())
        detail::emit(fit_report, detail::render([&](std::ostream& os) { write_fit_report(os, windows); }), out);
      const auto selection = select_family(windows);
      if (selection.best != Family::LogNormal)
        err << "warning: " << to_string(selection.best)
            << " wins most windows; thresholds still use the log-normal SNR model\n";

      const auto build = fit_model(runs, {geometry, fit_interval, fit_states});
      for (const auto& w : build.warnings)
        err << "warning: " << w << '\n';
      detail::emit(fit_out, model_to_json(build.model), out);
      err << "fitted " << build.model.intervals.size() << " intervals; " << to_string(selection.best) << " won "
          << selection.wins_of(selection.best) << " of " << selection.scored_windows << " windows\n";
    }
    else if (*thr)
    {
      const auto model = detail::read_model(thr_model);
      detail::emit(thr_out,
                   detail::render([&](std::ostream& os) {
                     write_threshold_header(os, model.n_states);
                     for (const auto& iv : model.intervals)
                       write_threshold_row(os, iv.index, iv.thresholds);
                   }),
                   out);
    }
    else if (*sim)
    {
      const auto model = detail::read_model(sim_model);
      const auto dither = *dither_from_string(sim_dither);
      const auto run_seed = stage_seed(seed, Stage::simulate);
      const auto trace = simulate_run(model, sim_speed, run_seed, dither);
      detail::emit(sim_out, detail::render([&](std::ostream& os) { write_trace(os, trace); }), out);
      const std::string meta = !sim_meta.empty() ? sim_meta : (sim_out != "-" ? sim_out + ".meta" : "");
      if (!meta.empty())
        detail::emit(meta,
                     detail::render([&](std::ostream& os) { write_simulation_metadata(os, model, run_seed, sim_speed, dither); }),
                     out);
    }
    else if (*val)
    {
      const auto model = detail::read_model(val_model);
      const auto heldout = detail::read_trace(val_heldout, val_slot);
      MseOptions mo;
      mo.speed_m_per_s = val_speed > 0.0 ? val_speed : heldout.step_per_slot_m() / model.slot_duration_s;
      mo.n_runs = val_runs;
      mo.seed = stage_seed(seed, Stage::validate);
      mo.bin_m = val_bin;
      mo.dither = *dither_from_string(val_dither);
      const auto mse = mse_against_trace(model, heldout, mo);

      ValidationReport report;
      report.n_states = model.n_states;
      report.interval_lengths_m = {model.interval_m};
      report.mse_per_interval_length = {mse.mse};
      report.comparisons = compare_model(model, std::span<const SnrTrace>(&heldout, 1));

      detail::emit(val_mse_out, detail::render([&](std::ostream& os) { write_mse_curve(os, report); }), out);
      if (!val_table_out.empty())
        detail::emit(val_table_out, detail::render([&](std::ostream& os) { write_matrix_table(os, report.comparisons); }), out);
      if (!val_overlay_out.empty())
        detail::emit(val_overlay_out, detail::render([&](std::ostream& os) { write_overlay(os, mse.overlay); }), out);
    }
    else if (*sweep)
    {
      std::vector<SnrTrace> runs;
      for (const auto& p : sw_traces)
        runs.push_back(detail::read_trace(p, sw_slot));
      const SnrTrace heldout = sw_heldout.empty() ? runs.front() : detail::read_trace(sw_heldout, sw_slot);
      SweepOptions so;
      so.geometry = sw_geo.geometry();
      so.n_states = sw_states;
      so.speed_m_per_s = sw_speed;
      so.n_runs = sw_runs;
      so.seed = stage_seed(seed, Stage::validate);
      so.bin_m = sw_bin;
      so.dither = *dither_from_string(sw_dither);
      so.threads = sw_threads;
      const auto report = sweep_intervals(runs, heldout, sw_intervals, so);
      detail::emit(sw_out, detail::render([&](std::ostream& os) { write_mse_curve(os, report); }), out);
    }
  }
  catch (const Error& e)
  {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
  catch (const std::exception& e)
  {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}

} // namespace lwfsmc::cli
