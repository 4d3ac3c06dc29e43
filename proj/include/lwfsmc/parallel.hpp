#pragma once

#include <algorithm>
#include <cstddef>
#include <future>
#include <vector>

namespace lwfsmc::detail {

/// Calls f(i) for i in [0, n) on up to `threads` workers (strided split).
/// Exceptions surface from the lowest-numbered worker that threw.
template <class F>
void
parallel_for(std::size_t n, unsigned threads, F&& f)
{
  threads = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1)));
  auto work = [&](std::size_t begin) {
    for (std::size_t i = begin; i < n; i += threads)
      f(i);
  };
  if (threads == 1)
  {
    work(0);
    return;
  }
  std::vector<std::future<void>> jobs;
  for (unsigned t = 0; t < threads; ++t)
    jobs.push_back(std::async(std::launch::async, work, std::size_t{t}));
  for (auto& j : jobs)
    j.wait();
  for (auto& j : jobs)
    j.get();
}

} // namespace lwfsmc::detail
