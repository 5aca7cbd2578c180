#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sagpr/alignment_model.hpp"
#include "sagpr/data_model.hpp"
#include "sagpr/gpr.hpp"

namespace sagpr {

enum class Mode { Align, Stack, Simulate };

struct RunConfig {
  Mode mode = Mode::Simulate;
  std::uint64_t seed = 1;
  std::size_t particles = 500;
  std::size_t samples = 100;
  std::size_t sweeps = 200;
  std::size_t max_em_iters = 20;
  std::size_t max_outer_iters = 10;
  double em_tolerance = 1e-4;
  double outer_tolerance = 1e-3;
  double bandwidth = 0.0;  // <= 0: 2% of the domain width
  int retries = 3;
  std::size_t pseudo_inputs = 64;
  std::size_t tune_samples = 8;
  std::size_t grid_points = 2001;
  KernelKind kernel = KernelKind::OrnsteinUhlenbeck;
  double kernel_variance = 0.0;     // <= 0: from the data
  double kernel_lengthscale = 0.0;  // <= 0: a tenth of the domain
  double noise_init = 0.0;
  int heteroscedastic = -1;  // -1: toy homoscedastic, C/A/E heteroscedastic
  TransitionKind transition = TransitionKind::Gamma;
  int learn_scale = -1;  // -1: on for C/A/E, off otherwise
  bool classify_outliers = true;
  std::size_t outlier_rounds = 3;
  bool learn_emission = true;
  bool learn_transition = true;
  bool learn_depth_scale = true;
  double alpha_init = 4.0, beta_init = 4.0;
  double r_init = 0.0;  // <= 0: domain width over depth span
  double domain_lo = 0.0, domain_hi = 0.0;  // equal: taken from the stack or [-1, 1]
  FixedHyperparams fixed;

  std::filesystem::path stack, calibration, out = "out";
  std::vector<std::filesystem::path> signals;
  int threads = 0;  // 0: all cores

  int example = 1;
  double toy_interval = 0.2, toy_offset = 0.1, toy_noise_sd = 0.0, toy_outlier_fraction = 0.06;
  std::size_t toy_signals = 0, toy_points = 0;

  bool use_heteroscedastic() const {
    return heteroscedastic < 0 ? transition == TransitionKind::Cae : heteroscedastic != 0;
  }
  bool use_learn_scale() const { return learn_scale < 0 ? transition == TransitionKind::Cae : learn_scale != 0; }
  void validate() const;
};

// Applies `key = value` lines (with `#` comments) on top of `base`. Unknown keys are ConfigError.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base = {});
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
// Every key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg);

}  // namespace sagpr
