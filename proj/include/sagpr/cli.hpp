#pragma once

#include <limits>
#include <string>
#include <vector>

#include "sagpr/config.hpp"
#include "sagpr/stack.hpp"
#include "sagpr/toy.hpp"

namespace sagpr {

// Full command line including the program name. Returns the process exit code.
int run_command(const std::vector<std::string>& args);

StackConfig stack_config_from(const RunConfig& cfg, Interval domain);
ModelContext context_from(const RunConfig& cfg, Interval domain);
SignalParams initial_params(const RunConfig& cfg, const Signal& signal, Interval domain);

struct SimulationReport {
  ToyData data;
  StackResult stack;
  std::vector<std::vector<double>> median_ages;
  std::vector<std::vector<double>> errors;  // median - truth
  double rms_error = 0.0;
  // Example 1: each signal's ages transferred from the other along the DTW
  // path, both signals merged in true-age order.
  std::vector<double> dtw_errors, dtw_true_ages;
  std::vector<std::size_t> dtw_signal;
  double dtw_max_abs = 0.0;
  double coverage95 = std::numeric_limits<double>::quiet_NaN();       // held-out points (Example 3)
  double noise_spearman = std::numeric_limits<double>::quiet_NaN();   // inferred vs true noise (Example 3)
  std::vector<Interval> aligned_span, true_span;
  double max_span_error = 0.0;
  std::vector<double> residuals;  // standardized residuals of clean data at median ages
  double residual_ks_p = std::numeric_limits<double>::quiet_NaN();
  double planted_flag_rate = std::numeric_limits<double>::quiet_NaN();
  double clean_flag_rate = std::numeric_limits<double>::quiet_NaN();
};

SimulationReport run_simulation(const RunConfig& cfg);

}  // namespace sagpr
