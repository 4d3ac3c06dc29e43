#pragma once

#include <cstdlib>
#include <stdexcept>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "lwfsmc/lwfsmc.hpp"

namespace fixture {

/// 4-state tridiagonal reference chain. Each row as given sums
/// to 0.999, so rows are rescaled to sum to 1 before use as a generator.
inline lwfsmc::TransitionMatrix
reference_chain_matrix()
{
  std::vector<double> p{
    0.736, 0.263, 0.0,   0.0,   //
    0.253, 0.503, 0.243, 0.0,   //
    0.0,   0.210, 0.587, 0.202, //
    0.0,   0.0,   1.0,   0.0,   //
  };
  for (std::size_t i = 0; i < 4; ++i)
  {
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j)
      s += p[i * 4 + j];
    for (std::size_t j = 0; j < 4; ++j)
      p[i * 4 + j] /= s;
  }
  return lwfsmc::TransitionMatrix(4, std::move(p));
}

inline std::vector<std::vector<double>>
rows(const lwfsmc::TransitionMatrix& m)
{
  std::vector<std::vector<double>> out(m.n_states(), std::vector<double>(m.n_states()));
  for (std::size_t i = 0; i < m.n_states(); ++i)
    for (std::size_t j = 0; j < m.n_states(); ++j)
      out[i][j] = m(i, j);
  return out;
}

/// Single-interval model over a whole section with the given matrix.
inline lwfsmc::FsmcModel
single_interval_model(const lwfsmc::TransitionMatrix& m,
                      std::vector<double> state_probs,
                      lwfsmc::ThresholdSet thresholds,
                      double section_length_m = 300.0)
{
  lwfsmc::FsmcModel model;
  model.geometry.section_length_m = section_length_m;
  model.interval_m = section_length_m;
  model.n_states = m.n_states();
  model.slot_duration_s = 1.0;
  lwfsmc::IntervalModel iv;
  iv.start_m = 0.0;
  iv.end_m = section_length_m;
  iv.thresholds = std::move(thresholds);
  iv.state_probs = std::move(state_probs);
  iv.matrix = m;
  iv.sample_count = 0;
  model.intervals.push_back(std::move(iv));
  return model;
}

inline lwfsmc::ThresholdSet
reference_thresholds()
{
  return {{35.0, 37.3494, 38.7291, 40.0784, 42.0}, {36.2, 38.0, 39.4, 41.0}, 0.0};
}

/// Scratch directory removed on destruction.
struct TempDir
{
  std::filesystem::path path;

  TempDir()
  {
    std::string tmpl = (std::filesystem::temp_directory_path() / "lwfsmc-XXXXXX").string();
    if (!::mkdtemp(tmpl.data()))
      throw std::runtime_error("mkdtemp failed");
    path = tmpl;
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

inline std::string
slurp(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace fixture
