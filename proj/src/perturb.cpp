#include "fairsearch/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fairsearch/error.hpp"

namespace fairsearch {

std::string_view toString(DirectionKind kind) {
  switch (kind) {
    case DirectionKind::FF:
      return "FF";
    case DirectionKind::TB:
      return "TB";
    case DirectionKind::FB:
      return "FB";
    case DirectionKind::LossAscent:
      return "loss_ascent";
  }
  return "FF";
}

DirectionKind directionFromString(std::string_view name) {
  if (name == "FF") return DirectionKind::FF;
  if (name == "TB") return DirectionKind::TB;
  if (name == "FB") return DirectionKind::FB;
  if (name == "loss_ascent") return DirectionKind::LossAscent;
  throw ConfigError("unknown direction kind '" + std::string(name) + "'");
}

bool DirectionVector::isZero() const {
  return std::all_of(values.begin(), values.end(), [](double x) { return x == 0.0; });
}

int signOf(double x) { return (x > 0.0) - (x < 0.0); }

namespace {

void checkShapes(std::span<const double> g, std::span<const double> g_prime,
                 const std::vector<bool>& sensitive) {
  if (g.size() != g_prime.size() || g.size() != sensitive.size()) {
    throw ShapeError("direction rule: gradient lengths " + std::to_string(g.size()) + "/" +
                     std::to_string(g_prime.size()) + " and mask length " +
                     std::to_string(sensitive.size()) + " must agree");
  }
}

// Shared body of dirTB/dirFB; `toward` is -1 for TB and +1 for FB.
DirectionVector splitSignDirection(std::span<const double> g, std::span<const double> g_prime,
                                   const std::vector<bool>& sensitive, double toward,
                                   DirectionKind kind) {
  checkShapes(g, g_prime, sensitive);
  DirectionVector dir{std::vector<double>(g.size(), 0.0), kind};
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (sensitive[i] || signOf(g[i]) == signOf(g_prime[i])) {
      continue;
    }
    dir.values[i] = signOf(g[i]) != 0 ? toward * std::abs(g[i]) : -toward * std::abs(g_prime[i]);
  }
  return dir;
}

}  // namespace

DirectionVector dirFF(std::span<const double> g, std::span<const double> g_prime,
                      const std::vector<bool>& sensitive) {
  checkShapes(g, g_prime, sensitive);
  DirectionVector dir{std::vector<double>(g.size(), 0.0), DirectionKind::FF};
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!sensitive[i] && signOf(g[i]) == signOf(g_prime[i])) {
      dir.values[i] = std::abs(g[i]);
    }
  }
  return dir;
}

DirectionVector dirTB(std::span<const double> g, std::span<const double> g_prime,
                      const std::vector<bool>& sensitive) {
  return splitSignDirection(g, g_prime, sensitive, -1.0, DirectionKind::TB);
}

DirectionVector dirFB(std::span<const double> g, std::span<const double> g_prime,
                      const std::vector<bool>& sensitive) {
  return splitSignDirection(g, g_prime, sensitive, 1.0, DirectionKind::FB);
}

double groundTruthFromOutputs(double y, double f_v, double f_vp, std::span<const double> g,
                              std::span<const double> v, std::span<const double> v_p) {
  if (g.size() != v.size() || v_p.size() != v.size()) {
    throw ShapeError("groundTruth: gradient and input lengths must agree");
  }
  double linear = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    linear += g[i] * (v_p[i] - v[i]);
  }
  if (!std::isfinite(linear)) {
    throw NumericError("groundTruth: first-order term g.(v_p - v) is not finite");
  }
  const double base_loss = lossMSE(y, f_v);
  if (!std::isfinite(base_loss)) {
    throw NumericError("groundTruth: loss at the source instance is not finite");
  }
  const double root = std::sqrt(std::abs(base_loss + linear));
  if (!std::isfinite(f_vp)) {
    throw NumericError("groundTruth: prediction at the perturbed instance is not finite");
  }
  const double y_plus = f_vp + root;
  const double y_minus = f_vp - root;
  return std::abs(y_minus - y) < std::abs(y_plus - y) ? y_minus : y_plus;
}

double groundTruth(std::span<const double> v, double y, std::span<const double> g,
                   const DenseNetwork& net, std::span<const double> v_p) {
  return groundTruthFromOutputs(y, net.forward(v), net.forward(v_p), g, v, v_p);
}

int binarizeGroundTruth(double y_p) { return y_p >= 0.5 ? 1 : 0; }

}  // namespace fairsearch
