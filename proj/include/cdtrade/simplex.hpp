#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cdtrade {

// Euclidean projection onto the probability simplex (sort and threshold).
std::vector<double> project_simplex(std::span<const double> y);
void project_simplex_in_place(std::span<double> y);

// Proximal constants for linearly-entering blocks. The step for a row with
// linear cost vector a at iteration i uses T = t0 * range(a) / (1 + i) (decay)
// or T = t0 * range(a) (constant), so the quadratic and linear terms start
// on the same scale.
struct ProximalSchedule {
  enum class Kind { Decay, Constant };
  Kind kind = Kind::Decay;
  double t0 = 1.0;

  double temperature(std::size_t iteration, double cost_range) const;
};

// One proximal step  min_p a.p + (T/2)|p - prev|^2  over the simplex, in place.
// Keeps the row when a.prev <= min(a) + kSkipTol * max|a| (already a minimizer).
// Returns true if the row was changed.
bool proximal_min_step(std::span<double> row, std::span<const double> a,
                       const ProximalSchedule& schedule, std::size_t iteration);

inline constexpr double kSkipTol = 1e-12;

// True when the skip rule holds for (row, a).
bool proximal_is_fixed(std::span<const double> row, std::span<const double> a);

// row <- exp(e - max e) / sum, in place. Returns true on the underflow fallback.
bool softmax_in_place(std::span<double> e);

}  // namespace cdtrade
