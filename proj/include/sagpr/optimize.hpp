#pragma once

#include <functional>
#include <vector>

namespace sagpr {

struct SearchResult {
  std::vector<double> x;
  double value = 0.0;
  double initial_value = 0.0;
  std::vector<double> trace;
  int evaluations = 0;
};

// Derivative-free compass search maximizing f. Moves are accepted only when
// they strictly improve f, so the returned value is never below f(x0).
// Steps double after a success and halve after a failed +/- probe.
SearchResult coordinate_search(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                               std::vector<double> step, std::vector<double> lo, std::vector<double> hi,
                               double tolerance, int max_evaluations);

}  // namespace sagpr
