#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "fairsearch/nncore.hpp"

namespace fairsearch {

/// Which fairness confusion defect a perturbation direction targets.
enum class DirectionKind { FF, TB, FB, LossAscent };

std::string_view toString(DirectionKind kind);
DirectionKind directionFromString(std::string_view name);

struct DirectionVector {
  std::vector<double> values;
  DirectionKind kind = DirectionKind::FF;

  bool isZero() const;
};

/// -1, 0 or +1.
int signOf(double x);

// The three rules below read g (loss gradient at the instance) and g' (loss
// gradient at its most divergent counterpart) coordinate by coordinate and
// leave sensitive coordinates at exactly zero.

/// False-fair direction: |g_i| where sign(g_i) == sign(g'_i), else 0.
DirectionVector dirFF(std::span<const double> g, std::span<const double> g_prime,
                      const std::vector<bool>& sensitive);

/// True-biased direction: where the signs differ, -|g_i| if g_i != 0 and
/// |g'_i| otherwise; 0 where they agree.
DirectionVector dirTB(std::span<const double> g, std::span<const double> g_prime,
                      const std::vector<bool>& sensitive);

/// False-biased direction: the elementwise negation of dirTB.
DirectionVector dirFB(std::span<const double> g, std::span<const double> g_prime,
                      const std::vector<bool>& sensitive);

/// Ground truth of a perturbed input v_p recovered from the first-order Taylor
/// expansion of the MSE loss around (v, y):
///
///   L  = | (y - f(v))^2 + g . (v_p - v) |
///   y+ = f(v_p) + sqrt(L),  y- = f(v_p) - sqrt(L)
///
/// returns y- when it is strictly closer to y, otherwise y+.
double groundTruth(std::span<const double> v, double y, std::span<const double> g,
                   const DenseNetwork& net, std::span<const double> v_p);

/// Same, with f(v) and f(v_p) already known.
double groundTruthFromOutputs(double y, double f_v, double f_vp, std::span<const double> g,
                              std::span<const double> v, std::span<const double> v_p);

/// 1 iff y_p >= 0.5.
int binarizeGroundTruth(double y_p);

}  // namespace fairsearch
