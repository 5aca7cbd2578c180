#include "sagpr/dtw.hpp"

#include <algorithm>
#include <limits>

#include "sagpr/errors.hpp"

namespace sagpr {

DtwResult dtw(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidArgument, "dtw needs two nonempty series");
  const std::size_t n = a.size(), m = b.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> D((n + 1) * (m + 1), inf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return D[i * (m + 1) + j]; };
  at(0, 0) = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const double d = (a[i - 1] - b[j - 1]) * (a[i - 1] - b[j - 1]);
      at(i, j) = d + std::min({at(i - 1, j - 1), at(i - 1, j), at(i, j - 1)});
    }
  }
  DtwResult r;
  r.cost = at(n, m);
  std::size_t i = n, j = m;
  while (i > 0 && j > 0) {
    r.path.emplace_back(i - 1, j - 1);
    if (i == 1 && j == 1) break;
    const double diag = at(i - 1, j - 1), up = at(i - 1, j), left = at(i, j - 1);
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(r.path.begin(), r.path.end());
  return r;
}

std::vector<double> dtw_transfer_ages(const DtwResult& r, std::span<const double> a_ages, std::size_t nb) {
  std::vector<double> sum(nb, 0.0), cnt(nb, 0.0);
  for (auto [i, j] : r.path) {
    sum[j] += a_ages[i];
    cnt[j] += 1.0;
  }
  for (std::size_t j = 0; j < nb; ++j) sum[j] /= cnt[j];
  return sum;
}

}  // namespace sagpr
