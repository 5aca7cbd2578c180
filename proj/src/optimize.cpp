#include "sagpr/optimize.hpp"

#include <algorithm>
#include <cmath>

namespace sagpr {

SearchResult coordinate_search(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                               std::vector<double> step, std::vector<double> lo, std::vector<double> hi,
                               double tolerance, int max_evaluations) {
  SearchResult r;
  const std::size_t d = x0.size();
  for (std::size_t i = 0; i < d; ++i) x0[i] = std::clamp(x0[i], lo[i], hi[i]);
  r.x = x0;
  r.value = f(r.x);
  r.initial_value = r.value;
  r.evaluations = 1;
  r.trace.push_back(r.value);
  if (!std::isfinite(r.value)) return r;

  auto largest = [&] { return *std::max_element(step.begin(), step.end()); };
  while (largest() >= tolerance && r.evaluations < max_evaluations) {
    for (std::size_t i = 0; i < d && r.evaluations < max_evaluations; ++i) {
      if (step[i] < tolerance) continue;
      bool moved = false;
      for (double sign : {1.0, -1.0}) {
        auto x = r.x;
        x[i] = std::clamp(x[i] + sign * step[i], lo[i], hi[i]);
        if (x[i] == r.x[i]) continue;
        double v = f(x);
        ++r.evaluations;
        if (std::isfinite(v) && v > r.value) {
          r.x = std::move(x);
          r.value = v;
          r.trace.push_back(v);
          moved = true;
          break;
        }
      }
      step[i] = moved ? std::min(step[i] * 2.0, 4.0) : step[i] * 0.5;
    }
  }
  return r;
}

}  // namespace sagpr
