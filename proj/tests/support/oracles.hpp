#pragma once
// Test-side reference computations, written without the library's code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

inline double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// CDF of the sum of n i.i.d. Uniform[0,1] (Irwin-Hall).
inline double irwin_hall_cdf(int n, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= n) return 1.0;
  double acc = 0.0, fact = 1.0;
  for (int i = 2; i <= n; ++i) fact *= i;
  for (int k = 0; k <= static_cast<int>(std::floor(x)); ++k)
    acc += (k % 2 ? -1.0 : 1.0) * binom(n, k) * std::pow(x - k, n);
  return acc / fact;
}

/// P(K <= k) for K ~ Binomial(n, p).
inline double binomial_cdf(int n, double p, int k) {
  double acc = 0.0;
  for (int i = 0; i <= k && i <= n; ++i) acc += binom(n, i) * std::pow(p, i) * std::pow(1.0 - p, n - i);
  return acc;
}

/// Composite Simpson rule on [a, b] with an even number of panels.
template <typename F>
double simpson(F&& f, double a, double b, int panels = 4000) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double acc = f(a) + f(b);
  for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

/// Uniform aggregate law on [0, 1], for the threshold examples.
struct UniformAggregate {
  double cdf_left(double x) const { return x <= 0.0 ? 0.0 : (x >= 1.0 ? 1.0 : x); }
  double cdf(double x) const { return cdf_left(x); }
};

/// Upper Pareto frontier of 2-D points (maximize both coordinates).
inline std::vector<std::pair<double, double>> pareto_frontier(std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) {
    return a.first > b.first || (a.first == b.first && a.second > b.second);
  });
  std::vector<std::pair<double, double>> out;
  double best_y = -INFINITY;
  for (auto& p : pts)
    if (p.second > best_y) {
      out.push_back(p);
      best_y = p.second;
    }
  return out;
}

}  // namespace oracle
