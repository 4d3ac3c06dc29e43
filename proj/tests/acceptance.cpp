// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "lwfsmc_cli.hpp"
#include "oracles.hpp"

using namespace lwfsmc;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

double
seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string
fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double
max_entry_diff(const TransitionMatrix& a, const TransitionMatrix& b)
{
  double d = 0.0;
  for (std::size_t i = 0; i < a.n_states(); ++i)
    for (std::size_t j = 0; j < a.n_states(); ++j)
      d = std::max(d, std::abs(a(i, j) - b(i, j)));
  return d;
}

// 1. Uniform density on [0, 1]: equal-width thresholds for N = 2 and 4.
Outcome
lloyd_max_uniform()
{
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::size_t n : {2u, 4u})
  {
    const auto run = lloyd_max_run(UniformDensity{0.0, 1.0}, n, 0.0, 1.0);
    for (std::size_t i = 0; i <= n; ++i)
      worst = std::max(worst, std::abs(run.set.thresholds[i] - static_cast<double>(i) / static_cast<double>(n)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 1.0, fmt("max threshold error %.3g (tol 1e-9), %.3f s (limit 1 s)", worst, secs)};
}

// 2. Gaussian in dB (38.5, 1.5) on [35, 42], N = 4, against the grid oracle.
Outcome
lloyd_max_gaussian()
{
  const auto t0 = std::chrono::steady_clock::now();
  const auto run = lloyd_max_run(GaussianDb{38.5, 1.5}, 4, 35.0, 42.0);
  const auto ref = oracle::grid_quantizer(38.5, 1.5, 35.0, 42.0, 4, 1e-3);
  double worst = 0.0;
  for (std::size_t i = 0; i <= 4; ++i)
    worst = std::max(worst, std::abs(run.set.thresholds[i] - ref.thresholds[i]));
  bool descent = true;
  for (std::size_t i = 1; i < run.distortion_history.size(); ++i)
    descent = descent && run.distortion_history[i] <= run.distortion_history[i - 1] + 1e-12;
  const double secs = seconds_since(t0);
  return {worst <= 2e-3 && descent && secs < 10.0,
          fmt("thresholds [%.6f %.6f %.6f], max gap to grid optimum %.3g dB (tol 2e-3), D non-increasing over %d iterations: %s, "
              "%.2f s (limit 10 s)",
              run.set.thresholds[1], run.set.thresholds[2], run.set.thresholds[3], worst, run.iterations, descent ? "yes" : "no", secs)};
}

// 3. MLE recovery for all five families at n = 10 000 with seed 3.
Outcome
mle_recovery()
{
  struct Case
  {
    Family family;
    std::vector<double> truth;
    std::vector<bool> location; // location-type parameters use an absolute bound
  };
  const std::vector<Case> cases{
    {Family::Rice, {3.0, 1.0}, {false, false}},
    {Family::Rayleigh, {2.0}, {false}},
    {Family::Nakagami, {2.0, 2.0}, {false, false}},
    {Family::Weibull, {2.0, 3.0}, {false, false}},
    {Family::LogNormal, {1.0, 0.5}, {true, false}},
  };
  bool ok = true;
  std::string detail;
  for (const auto& c : cases)
  {
    const auto x = draw_amplitudes(c.family, c.truth, 10000, 3);
    const auto r = fit_mle(c.family, x);
    double worst_rel = 0.0;
    for (std::size_t i = 0; i < c.truth.size(); ++i)
    {
      const double err = std::abs(r.params[i] - c.truth[i]);
      const bool within = c.location[i] ? err <= 0.1 : err <= 0.02 * std::abs(c.truth[i]);
      ok = ok && within;
      worst_rel = std::max(worst_rel, err / std::abs(c.truth[i]));
    }
    bool local_max = true;
    for (std::size_t i = 0; i < r.params.size(); ++i)
      for (double d : {-1e-3, 1e-3})
      {
        auto p = r.params;
        p[i] += d;
        local_max = local_max && r.loglik >= log_likelihood(c.family, p, x);
      }
    ok = ok && local_max;
    detail += fmt("%s %.2f%%%s; ", std::string(to_string(c.family)).c_str(), 100.0 * worst_rel, local_max ? "" : " (not a local max)");
  }
  return {ok, detail + "bound 2% relative, 0.1 absolute for location"};
}

// 4. sigma = 3 dB synthetic trace, 61 windows of 40 wavelengths.
Outcome
aicc_selection()
{
  GroundTruthProfile p;
  p.sigma_db = 3.0;
  p.seed = 1;
  const std::vector<SnrTrace> runs{generate_trace(p, {}, 10.0, 0.0005, 0.0)};
  const auto windows = score_windows(runs, {}, 40, 4);
  const auto sel = select_family(windows);
  const double share = static_cast<double>(sel.wins_of(Family::LogNormal)) / static_cast<double>(windows.size());
  return {windows.size() == 61 && share >= 0.9,
          fmt("%zu windows, LogNormal wins %zu (%.1f%%, need >= 90%%)", windows.size(), sel.wins_of(Family::LogNormal), 100.0 * share)};
}

// 5. 10^5-step chain from the reference tridiagonal matrix.
Outcome
matrix_recovery()
{
  const auto p = fixture::reference_chain_matrix();
  const auto seq = generate_markov_chain(p, std::vector<double>{0.25, 0.25, 0.25, 0.25}, 100000, 5);
  const auto e = estimate_matrix(seq, 4);
  const double d = max_entry_diff(e.matrix, p);
  bool stochastic = true;
  for (std::size_t i = 0; i < 4; ++i)
  {
    double s = 0.0;
    for (double v : e.matrix.row(i))
      s += v;
    stochastic = stochastic && std::abs(s - 1.0) <= 1e-12;
  }
  const bool tri = e.matrix.is_tridiagonal();
  return {d <= 0.01 && stochastic && tri,
          fmt("max entry error %.4f (tol 0.01), row-stochastic %s, tridiagonal %s", d, stochastic ? "yes" : "no", tri ? "yes" : "no")};
}

// 6. Single-interval simulation, 10^5 slots, against the stationary vector.
Outcome
stationary_consistency()
{
  const auto p = fixture::reference_chain_matrix();
  const auto model = fixture::single_interval_model(p, {1, 0, 0, 0}, fixture::reference_thresholds(), 1e5);
  const auto t = simulate_run(model, 1.0, 6);
  const auto e = estimate_matrix(states_from_trace(t.samples, model.intervals[0].thresholds), 4);
  const auto pi = stationary_distribution(p).pi;
  double d = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    d = std::max(d, std::abs(e.state_probs[i] - pi[i]));
  return {t.samples.size() == 100000 && d <= 0.01, fmt("%zu slots, max frequency error %.4f (tol 0.01)", t.samples.size(), d)};
}

// 7. Interval sweep on sloped synthetic data.
Outcome
mse_trend()
{
  const auto t0 = std::chrono::steady_clock::now();
  GroundTruthProfile p;
  p.slope_db_per_m = -0.03;
  p.sigma_db = 2.0;
  p.seed = 101;
  const std::vector<SnrTrace> training{generate_trace(p, {}, 10.0, 0.005, 0.9)};
  p.seed = 202;
  const auto heldout = generate_trace(p, {}, 10.0, 0.005, 0.9);
  SweepOptions o;
  o.n_runs = 10;
  o.seed = 7;
  o.threads = 4;
  const auto r = sweep_intervals(training, heldout, kDefaultSweepIntervals, o);
  const auto& mse = r.mse_per_interval_length;
  // kDefaultSweepIntervals = {5, 10, 20, 25, 40, 50, 100, 300}
  const double lo = *std::min_element(mse.begin(), mse.begin() + 4);
  const double hi = *std::max_element(mse.begin(), mse.begin() + 4);
  const double spread = (hi - lo) / lo;
  const double secs = seconds_since(t0);
  std::string curve;
  for (std::size_t i = 0; i < mse.size(); ++i)
    curve += fmt("%g:%.3f ", r.interval_lengths_m[i], mse[i]);
  return {mse[7] > mse[3] && spread <= 0.2 && secs < 300.0,
          fmt("MSE %s| 300 m > 25 m: %s, 5-25 m spread %.1f%% (limit 20%%), %.1f s (limit 300 s)", curve.c_str(),
              mse[7] > mse[3] ? "yes" : "no", 100.0 * spread, secs)};
}

int
run_cli(std::vector<std::string> args, std::string* out = nullptr)
{
  args.insert(args.begin(), "lwfsmc");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  std::ostringstream o, e;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out)
    *out = o.str();
  return code;
}

// 8. Byte-identical CLI reruns and model JSON round-trip.
Outcome
determinism()
{
  fixture::TempDir dir;
  bool ok = true;
  std::size_t files = 0;
  for (const char* tag : {"a", "b"})
  {
    const std::string t = tag;
    ok = ok && run_cli({"synth", "--seed", "7", "--out", dir / ("t" + t + ".csv")}) == 0;
    ok = ok && run_cli({"synth", "--seed", "8", "--out", dir / ("h" + t + ".csv")}) == 0;
    ok = ok && run_cli({"fit", "--trace", dir / ("t" + t + ".csv"), "--seed", "7", "--out", dir / ("m" + t + ".json"), "--fit-report",
                        dir / ("f" + t + ".csv"), "--threads", t == "a" ? "1" : "4"}) == 0;
    ok = ok && run_cli({"thresholds", "--model", dir / ("m" + t + ".json"), "--out", dir / ("g" + t + ".csv")}) == 0;
    ok = ok && run_cli({"simulate", "--model", dir / ("m" + t + ".json"), "--speed", "10", "--seed", "7", "--out", dir / ("s" + t + ".csv")}) == 0;
    ok = ok && run_cli({"validate", "--model", dir / ("m" + t + ".json"), "--heldout", dir / ("h" + t + ".csv"), "--seed", "7", "--mse-out",
                        dir / ("v" + t + ".csv"), "--table-out", dir / ("k" + t + ".csv"), "--overlay-out", dir / ("o" + t + ".csv")}) == 0;
    ok = ok && run_cli({"sweep", "--trace", dir / ("t" + t + ".csv"), "--heldout", dir / ("h" + t + ".csv"), "--intervals", "25,300", "--runs", "2",
                        "--seed", "7", "--out", dir / ("w" + t + ".csv"), "--threads", t == "a" ? "1" : "2"}) == 0;
  }
  for (const char* stem : {"t", "h", "m", "f", "g", "s", "v", "k", "o", "w"})
  {
    const std::string ext = std::string(stem) == "m" ? ".json" : ".csv";
    const auto a = fixture::slurp(dir / (stem + std::string("a") + ext));
    const auto b = fixture::slurp(dir / (stem + std::string("b") + ext));
    ok = ok && !a.empty() && a == b;
    ++files;
  }
  ok = ok && fixture::slurp(dir / "sa.csv.meta") == fixture::slurp(dir / "sb.csv.meta");

  const auto text = fixture::slurp(dir / "ma.json");
  std::istringstream in(text);
  const bool round_trip = model_to_json(parse_model_json(in)) == text;
  return {ok && round_trip,
          fmt("%zu output files + metadata identical across reruns: %s; JSON serialize-parse-serialize identical: %s", files, ok ? "yes" : "no",
              round_trip ? "yes" : "no")};
}

// 9. Simulated trace refitted at the same interval length.
Outcome
closure()
{
  GroundTruthProfile p;
  p.seed = 11;
  const std::vector<SnrTrace> training{generate_trace(p, {}, 10.0, 0.005, 0.9)};
  const auto model = fit_model(training, {{}, 25.0, 4}).model;
  const double speed = 0.003 / model.slot_duration_s; // 10^5 slots over 300 m

  auto refit_gap = [&](Dither d, std::size_t& slots) {
    const std::vector<SnrTrace> sim{simulate_run(model, speed, 909, d)};
    slots = sim[0].samples.size();
    const auto refit = fit_model(sim, {{}, 25.0, 4}).model;
    double worst = 0.0;
    for (std::size_t l = 0; l < model.intervals.size(); ++l)
      worst = std::max(worst, max_entry_diff(model.intervals[l].matrix, refit.intervals[l].matrix));
    return worst;
  };
  std::size_t slots = 0, slots_u = 0;
  const double off = refit_gap(Dither::off, slots);
  const double uniform = refit_gap(Dither::uniform, slots_u);
  return {slots == 100000 && off <= 0.05,
          fmt("25 m intervals, %zu slots, dither=off max entry difference %.4f (tol 0.05); dither=uniform %.4f (informational)", slots, off,
              uniform)};
}

} // namespace

int
main()
{
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
    {"Lloyd-Max uniform density", lloyd_max_uniform},
    {"Lloyd-Max vs brute-force grid", lloyd_max_gaussian},
    {"MLE parameter recovery", mle_recovery},
    {"AICc family selection", aicc_selection},
    {"transition matrix recovery", matrix_recovery},
    {"stationary consistency", stationary_consistency},
    {"MSE vs interval length trend", mse_trend},
    {"determinism and JSON round-trip", determinism},
    {"simulate-refit closure", closure},
  };
  int failures = 0;
  int n = 0;
  for (const auto& [name, check] : criteria)
  {
    ++n;
    Outcome o;
    try
    {
      o = check();
    }
    catch (const std::exception& e)
    {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d [%s] %s: %s\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", n - failures, n);
  return failures == 0 ? 0 : 1;
}
