#include "cdtrade/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace cdtrade {

void project_simplex_in_place(std::span<double> y) {
  const std::size_t n = y.size();
  if (n == 0) return;
  std::vector<double> u(y.begin(), y.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += u[k];
    double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) tau = t;
  }
  double s = 0.0;
  for (double& x : y) {
    x = std::max(x - tau, 0.0);
    s += x;
  }
  // clean up the last ulp so rows stay unit-sum
  if (s > 0.0 && s != 1.0)
    for (double& x : y) x /= s;
}

std::vector<double> project_simplex(std::span<const double> y) {
  std::vector<double> out(y.begin(), y.end());
  project_simplex_in_place(out);
  return out;
}

double ProximalSchedule::temperature(std::size_t iteration, double cost_range) const {
  double t = t0 * cost_range;
  if (kind == Kind::Decay) t /= static_cast<double>(iteration + 1);
  return t;
}

bool proximal_is_fixed(std::span<const double> row, std::span<const double> a) {
  double amin = a[0], amax = 0.0, dot = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    amin = std::min(amin, a[k]);
    amax = std::max(amax, std::abs(a[k]));
    dot += a[k] * row[k];
  }
  // a carries the joint mass of its row, which can be as small as the prior
  // floor; an absolute tolerance would freeze such rows for good
  return dot <= amin + kSkipTol * amax;
}

bool proximal_min_step(std::span<double> row, std::span<const double> a,
                       const ProximalSchedule& schedule, std::size_t iteration) {
  if (row.size() <= 1 || proximal_is_fixed(row, a)) return false;
  auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  double T = schedule.temperature(iteration, *hi - *lo);
  if (!(T > 0.0)) return false;
  for (std::size_t k = 0; k < row.size(); ++k) row[k] -= a[k] / T;
  project_simplex_in_place(row);
  return true;
}

bool softmax_in_place(std::span<double> e) {
  double mx = *std::max_element(e.begin(), e.end());
  if (!std::isfinite(mx)) {
    std::fill(e.begin(), e.end(), 1.0 / static_cast<double>(e.size()));
    return true;
  }
  double s = 0.0;
  for (double& x : e) {
    x = std::exp(x - mx);
    s += x;
  }
  for (double& x : e) x /= s;
  return false;
}

}  // namespace cdtrade
