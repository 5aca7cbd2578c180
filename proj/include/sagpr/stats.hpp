#pragma once

#include <span>
#include <vector>

namespace sagpr {

double log_sum_exp(std::span<const double> v);
double mean(std::span<const double> v);
double variance(std::span<const double> v);  // unbiased
// Linear-interpolation quantile (type 7).
double quantile(std::vector<double> v, double p);
double median(std::vector<double> v);
double spearman(std::span<const double> a, std::span<const double> b);

struct KsResult {
  double statistic;
  double p_value;
};
// One-sample Kolmogorov-Smirnov test against N(0,1).
KsResult ks_standard_normal(std::vector<double> v);
// Asymptotic Kolmogorov tail probability with the small-sample correction
// lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) * D.
double kolmogorov_pvalue(double d, std::size_t n);

}  // namespace sagpr
