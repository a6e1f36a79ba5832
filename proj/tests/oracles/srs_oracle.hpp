#pragma once
// Enumerates every simple random sample without replacement of size n from
// a small population and returns the distribution of the expansion total.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace oracle {

template <class F>
void for_each_combination(std::size_t N, std::size_t n, F&& visit) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  while (true) {
    visit(idx);
    std::size_t i = n;
    while (i > 0 && idx[i - 1] == N - n + (i - 1)) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
}

struct SrsMoments {
  std::size_t samples = 0;
  double mean = 0.0;
  double variance = 0.0;  // over all equally likely samples
};

inline SrsMoments enumerate_expansion(const std::vector<std::int64_t>& population, std::size_t n) {
  const std::size_t N = population.size();
  std::vector<double> totals;
  for_each_combination(N, n, [&](const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for (auto i : idx) s += static_cast<double>(population[i]);
    totals.push_back(s * static_cast<double>(N) / static_cast<double>(n));
  });
  SrsMoments m;
  m.samples = totals.size();
  for (double t : totals) m.mean += t;
  m.mean /= static_cast<double>(totals.size());
  for (double t : totals) m.variance += (t - m.mean) * (t - m.mean);
  m.variance /= static_cast<double>(totals.size());
  return m;
}

}  // namespace oracle
