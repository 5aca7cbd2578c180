#pragma once

#include <span>
#include <utility>
#include <vector>

namespace sagpr {

struct DtwResult {
  std::vector<std::pair<std::size_t, std::size_t>> path;  // (i in a, j in b), monotone
  double cost = 0.0;
};

// Textbook DTW: squared-error local cost, symmetric1 steps (diagonal,
// horizontal, vertical, unit weights).
DtwResult dtw(std::span<const double> a, std::span<const double> b);

// Ages implied for each b position by matching to a: mean of matched a ages.
std::vector<double> dtw_transfer_ages(const DtwResult& r, std::span<const double> a_ages, std::size_t nb);

}  // namespace sagpr
