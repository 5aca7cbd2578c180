#pragma once

#include <cstdint>
#include <vector>

#include "sagpr/em.hpp"

namespace sagpr {

// Posterior probability that y (already in stack units) is an outlier at z.
double outlier_posterior(double y, double z, const Profile& profile, double delta);
// Same for all d18O data at one position, treated as a single outlier event.
double position_outlier_posterior(std::span<const double> ys, double z, const Profile& profile, double delta);

// Stack-space value of a d18O observation under a signal's emission params.
inline double to_stack_units(double y, const EmissionParams& p, bool learn_scale) {
  return (y - p.shift) / (learn_scale ? p.scale : 1.0);
}

// Bernoulli draws written into each sample's outlier_flags. Returns the mean
// posterior probability per signal and position over the bank.
std::vector<std::vector<double>> classify_outliers(std::vector<std::vector<AlignmentSample>>& banks,
                                                   const std::vector<Signal>& signals,
                                                   const std::vector<SignalParams>& params, const Profile& profile,
                                                   const ModelContext& ctx, std::uint64_t seed, std::uint64_t tag);

struct ProfileConfig {
  KernelKind kernel = KernelKind::OrnsteinUhlenbeck;
  KernelParams kernel_init{0.0, 0.0};  // <= 0: chosen from the data
  double noise_init = 0.0;             // <= 0: a tenth of the output variance
  bool heteroscedastic = false;
  bool tune = true;
  std::size_t pseudo_inputs = 64;
  std::size_t tune_samples = 8;
  // Smaller per-sample training sets keep the initial hyperparameters: with a
  // handful of points the evidence cannot separate signal from noise.
  std::size_t min_tune_points = 8;
  std::size_t max_grid_points = 2001;
  TuneOptions tune_options;
};

struct ProfileState {
  KernelParams kernel{0.0, 0.0};
  double noise = 0.0;
};

struct TrainingSet {
  std::vector<double> inputs, outputs;
};

// Pooled clean (age, stack-unit value) pairs of every signal for sample l.
TrainingSet training_set(std::size_t l, const std::vector<std::vector<AlignmentSample>>& banks,
                         const std::vector<Signal>& signals, const std::vector<SignalParams>& params,
                         bool learn_scale);

// Profile construction: per-sample sparse GPR fits on the pooled training
// sets, shared hyperparameter tuning, then moment matching on a grid.
Profile build_profile(const std::vector<std::vector<AlignmentSample>>& banks, const std::vector<Signal>& signals,
                      const std::vector<SignalParams>& params, const ModelContext& ctx, const ProfileConfig& cfg,
                      ProfileState& state, std::uint64_t seed, std::uint64_t tag);

struct StackConfig {
  EmConfig em;
  ProfileConfig profile;
  std::size_t max_outer = 10;
  double tolerance = 1e-3;
  bool classify = true;
  std::size_t classify_rounds = 3;  // classify/refit alternations per outer iteration
};

struct StackResult {
  Profile profile;
  std::vector<SignalParams> params;
  std::vector<std::vector<AlignmentSample>> banks;
  std::vector<std::vector<double>> outlier_probability;  // [signal][position]
  std::vector<EmResult> em;                                // last outer iteration
  std::vector<double> metric_history;
  ProfileState state;
  std::size_t iterations = 0;
  bool converged = false;
};

StackResult build_stack(const std::vector<Signal>& signals, const Profile& init_profile,
                        const std::vector<SignalParams>& init_params, const ModelContext& ctx,
                        const StackConfig& cfg, std::uint64_t seed);

// Profile fitted to signals placed at given ages (one sample per signal).
Profile profile_from_ages(const std::vector<Signal>& signals, const std::vector<std::vector<double>>& ages,
                          const ModelContext& ctx, const ProfileConfig& cfg, ProfileState& state, std::uint64_t seed);

}  // namespace sagpr
