#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sagpr/data_model.hpp"

namespace sagpr {

// Knobs of the synthetic examples on the domain [-1, 1]. Example 5 is the
// homogeneous-core set (several full-length noisy copies of one curve).
struct ToySpec {
  int example = 1;
  double interval = 0.2;          // Example 1 base-grid spacing
  double offset = 0.1;            // Example 1 grid origin shift
  double noise_sd = 0.0;          // <= 0: example default
  double outlier_fraction = 0.06;  // Example 2
  double outlier_sd = 5.0;        // Example 2, in noise sd
  std::size_t signals = 0;        // 0: example default
  std::size_t points = 0;         // 0: example default
  std::size_t held_out = 200;     // Example 3
  void validate() const;
};

struct ToyData {
  Interval domain{-1.0, 1.0};
  std::vector<Signal> signals;
  std::vector<std::vector<double>> true_ages;
  std::vector<std::vector<int>> planted_outlier;  // per signal and position
  std::function<double(double)> latent;
  std::function<double(double)> noise_sd;
  std::vector<double> held_out_ages, held_out_values;
};

double toy_latent(int example, double s);
ToyData make_toy(const ToySpec& spec, std::uint64_t seed);

}  // namespace sagpr
