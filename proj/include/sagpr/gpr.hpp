#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sagpr/data_model.hpp"
#include "sagpr/rng.hpp"

namespace sagpr {

enum class KernelKind { OrnsteinUhlenbeck, SquaredExponential };

struct KernelParams {
  double variance = 1.0;
  double lengthscale = 1.0;
  void validate() const;
};

double ou_kernel(double z1, double z2, const KernelParams& p);
double se_kernel(double z1, double z2, const KernelParams& p);

struct Kernel {
  KernelKind kind = KernelKind::OrnsteinUhlenbeck;
  KernelParams params;

  double operator()(double a, double b) const {
    return kind == KernelKind::OrnsteinUhlenbeck ? ou_kernel(a, b, params) : se_kernel(a, b, params);
  }
  // d k / d log(variance), d k / d log(lengthscale)
  std::array<double, 2> log_gradient(double a, double b) const;
};

// Piecewise-linear function on an increasing grid, constant beyond the ends.
class Tabulated {
 public:
  Tabulated() = default;
  Tabulated(std::vector<double> grid, std::vector<double> values);
  double operator()(double z) const;
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> grid_, values_;
  bool uniform_ = false;
  double step_ = 1.0;
};

class PriorMean {
 public:
  static PriorMean constant(double c);
  static PriorMean tabulated(Tabulated f);
  double operator()(double z) const { return table_ ? (*table_)(z) : constant_; }
  bool is_constant() const { return !table_; }

 private:
  double constant_ = 0.0;
  std::shared_ptr<const Tabulated> table_;
};

// Query-time observation variance Lambda(z).
class NoiseFunction {
 public:
  static NoiseFunction constant(double v);
  // Nadaraya-Watson smoother of `terms` located at `inputs` with Gaussian kernel width h.
  static NoiseFunction nadaraya_watson(std::vector<double> inputs, std::vector<double> terms, double h);
  double operator()(double z) const;
  bool is_constant() const { return inputs_.empty(); }
  double bandwidth() const { return h_; }

 private:
  double constant_ = 1.0;
  std::vector<double> inputs_, terms_;  // sorted by input
  double h_ = 1.0;
};

double heteroscedastic_variance(std::span<const double> mu_at_inputs, std::span<const double> latent_var_at_inputs,
                                std::span<const double> inputs, std::span<const double> outputs, double h, double z);

// Mean distance to the k-th nearest other input, k = ceil(sqrt(N)).
double knn_bandwidth(std::span<const double> inputs);

struct Prediction {
  double mean;
  double latent_variance;
  double noise;
  double variance() const { return latent_variance + noise; }
};

class GprFit {
 public:
  GprFit(Kernel kernel, std::vector<double> pseudo_inputs, std::vector<double> inputs, std::vector<double> outputs,
         std::vector<double> noise_at_inputs, NoiseFunction noise, PriorMean prior);

  Prediction predict(double z) const;
  double objective() const { return objective_; }
  double trace_term() const { return trace_; }
  std::array<double, 2> objective_gradient() const;

  const Kernel& kernel() const { return kernel_; }
  const std::vector<double>& pseudo_inputs() const { return pseudo_; }
  const std::vector<double>& inputs() const { return inputs_; }
  const std::vector<double>& outputs() const { return outputs_; }
  const std::vector<double>& noise_at_inputs() const { return lambda_; }
  const NoiseFunction& noise() const { return noise_; }
  const PriorMean& prior() const { return prior_; }
  double jitter() const { return jitter_; }

 private:
  Kernel kernel_;
  std::vector<double> pseudo_, inputs_, outputs_, lambda_;
  NoiseFunction noise_;
  PriorMean prior_;
  double jitter_ = 0.0;
  Eigen::MatrixXd Kuu_, Lu_, V_, LB_;
  Eigen::VectorXd c_, resid_;
  double objective_ = 0.0, trace_ = 0.0;
};

inline Prediction vfe_predict(const GprFit& fit, double z) { return fit.predict(z); }
inline double vfe_objective(const GprFit& fit) { return fit.objective(); }

// One uniform draw per equal-width stratum of `domain`, increasing.
std::vector<double> stratified_pseudo_inputs(Interval domain, std::size_t count, Rng& rng);
inline std::size_t default_pseudo_count(std::size_t n) { return n < 64 ? n : 64; }

struct TuneDataset {
  std::vector<double> inputs, outputs, noise, pseudo_inputs;
  PriorMean prior = PriorMean::constant(0.0);
};

struct TuneOptions {
  int restarts = 3;
  double initial_step = 1.0;
  double tolerance = 1e-3;  // smallest log-step
  int max_evaluations = 400;
  double min_lengthscale = 1e-6;
  double max_lengthscale = 1e6;
};

struct TuneResult {
  KernelParams params;
  double noise = 0.0;  // only set by tune_with_noise
  double objective = 0.0;
  double initial_objective = 0.0;
  std::vector<double> trace;  // best objective after each accepted move
};

// Maximizes sum_l L_l over (variance, lengthscale) by coordinate search in log space.
TuneResult tune_hyperparameters(const std::vector<TuneDataset>& data, KernelParams init, KernelKind kind,
                                const TuneOptions& opts = {});
// Same, with one constant noise variance shared by all datasets as a third coordinate.
TuneResult tune_with_noise(const std::vector<TuneDataset>& data, KernelParams init, double noise_init,
                           KernelKind kind, const TuneOptions& opts = {});
double sum_objective(const std::vector<TuneDataset>& data, const Kernel& kernel);

struct HeteroscedasticOptions {
  int max_iterations = 50;
  double tolerance = 1e-4;
  double initial_noise = 0.0;  // <= 0: half the residual variance
};

struct HeteroscedasticFit {
  std::shared_ptr<const GprFit> fit;
  int iterations = 0;
  double bandwidth = 0.0;
};

HeteroscedasticFit fit_heteroscedastic(std::vector<double> inputs, std::vector<double> outputs,
                                       std::vector<double> pseudo_inputs, Kernel kernel, PriorMean prior,
                                       const HeteroscedasticOptions& opts = {});

class Profile {
 public:
  Profile() = default;
  Profile(std::vector<double> grid, std::vector<double> mean, std::vector<double> variance,
          std::vector<double> noise = {}, std::vector<std::shared_ptr<const GprFit>> fits = {});

  Interval domain() const { return {mean_.grid().front(), mean_.grid().back()}; }
  bool contains(double z) const { return domain().contains(z); }
  double mean(double z) const { return mean_(z); }
  double variance(double z) const { return var_(z); }
  // Average observation-noise term of the constituent fits (empty for imported stacks).
  double noise(double z) const { return noise_(z); }
  bool has_noise() const { return !noise_.grid().empty(); }

  const std::vector<double>& grid() const { return mean_.grid(); }
  const std::vector<double>& mean_values() const { return mean_.values(); }
  const std::vector<double>& variance_values() const { return var_.values(); }
  const std::vector<std::shared_ptr<const GprFit>>& fits() const { return fits_; }

 private:
  Tabulated mean_, var_, noise_;
  std::vector<std::shared_ptr<const GprFit>> fits_;
};

struct GridMoments {
  std::vector<double> mean, variance, noise;
};

// Moment-matched mixture of the fits' predictive distributions at each grid point.
GridMoments mixture_moments_serial(std::span<const std::shared_ptr<const GprFit>> fits, std::span<const double> grid);
GridMoments mixture_moments_parallel(std::span<const std::shared_ptr<const GprFit>> fits,
                                     std::span<const double> grid);

Profile combine_profile(std::vector<std::shared_ptr<const GprFit>> fits, std::vector<double> grid);

// Uniform grid over `domain` with spacing <= min(lengthscale/5, width/1000).
std::vector<double> tabulation_grid(Interval domain, double lengthscale, std::size_t max_points = 20001);

std::string profile_to_text(const Profile& profile);
Profile parse_profile_text(const std::string& text);
void write_profile(const Profile& profile, const std::filesystem::path& path);
Profile read_profile(const std::filesystem::path& path);

}  // namespace sagpr
