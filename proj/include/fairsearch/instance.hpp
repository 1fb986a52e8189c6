#pragma once

#include <vector>

namespace fairsearch {

/// A normalized feature vector (every coordinate in [0,1]) with its binary
/// ground-truth label.
struct Instance {
  std::vector<double> features;
  double label = 0.0;
};

}  // namespace fairsearch
