#pragma once

#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "sagpr/data_model.hpp"
#include "sagpr/emission.hpp"
#include "sagpr/gpr.hpp"
#include "sagpr/transition.hpp"

namespace sagpr {

enum class TransitionKind { Gamma, Cae, GaussianWalk };

struct TransitionParams {
  TransitionKind kind = TransitionKind::Gamma;
  GammaTransitionParams gamma;
  CaeTransitionParams cae;
  GaussianWalkParams walk;

  double depth_scale() const;
  void set_depth_scale(double r);
  void validate() const;
};

struct SignalParams {
  TransitionParams transition;
  EmissionParams emission;
};

// Shared, read-only inputs for every signal's model.
struct ModelContext {
  std::shared_ptr<const Profile> profile;
  std::shared_ptr<const CalibrationCurve> curve;
  FixedHyperparams fixed;
  Interval domain{0.0, 1.0};
  bool learn_scale = false;
};

// One signal's state-space model, seen as a chain c_0 < c_1 < ... < c_{T-1}.
// Gamma and Gaussian-walk models run in position order with c = z. The C/A/E
// model is defined from the deepest position upward, so its chain runs in
// reverse position order on negated ages (c = -z), which keeps every chain
// increasing and lets the sampler ignore orientation.
class AlignmentModel {
 public:
  AlignmentModel(const Signal& signal, const SignalParams& params, const ModelContext& ctx);

  std::size_t steps() const { return n_; }
  std::size_t regimes() const { return kind_ == TransitionKind::Cae ? 3 : 1; }
  int markov_order() const { return kind_ == TransitionKind::Cae ? 2 : 1; }
  bool reversed() const { return kind_ == TransitionKind::Cae; }
  Interval chain_domain() const { return chain_domain_; }
  Interval initial_support() const { return initial_support_; }

  double log_initial(double c, int w) const;
  double log_regime_transition(std::size_t /*t*/, int w_prev, int w) const {
    return kind_ == TransitionKind::Cae ? log_phi_[w_prev][w] : 0.0;
  }
  int regime_of(std::size_t t, double c_prev, double c) const;
  double log_increment(std::size_t t, double c_prev, double c, int w) const;
  double log_transition(std::size_t t, double c_prev, int w_prev, double c, int w) const {
    if (regime_of(t, c_prev, c) != w) return -INFINITY;
    return log_regime_transition(t, w_prev, w) + log_increment(t, c_prev, c, w);
  }
  double log_emission(std::size_t t, double c) const;
  // Increment bounds (chain units) covering all but ~1e-6 of each tail.
  std::pair<double, double> increment_range(std::size_t t) const;

  std::size_t position_of(std::size_t t) const { return reversed() ? n_ - 1 - t : t; }
  double to_age(double c) const { return reversed() ? -c : c; }
  double to_chain(double z) const { return reversed() ? -z : z; }

  AlignmentSample to_sample(std::span<const double> chain, std::span<const int> regimes) const;
  std::vector<double> chain_values(const AlignmentSample& s) const;
  std::vector<int> chain_regimes(const AlignmentSample& s) const;

  double log_prior(std::span<const double> chain, std::span<const int> regimes) const;
  double log_likelihood(std::span<const double> chain) const;
  double log_joint(std::span<const double> chain, std::span<const int> regimes) const {
    return log_prior(chain, regimes) + log_likelihood(chain);
  }

  std::size_t dropped_radiocarbon() const { return dropped_; }
  const Signal& signal() const { return *signal_; }

 private:
  const Signal* signal_;
  TransitionKind kind_;
  std::size_t n_;
  Interval chain_domain_, initial_support_;
  double log_initial_density_ = 0.0;
  std::vector<double> scale_;      // r * dx per chain step (index t >= 1)
  std::vector<double> log_scale_;
  double gshape_ = 1.0, grate_ = 1.0, gconst_ = 0.0;
  double log_region_[3] = {0, 0, 0};
  double log_phi_[3][3] = {};
  double cae_lower_ = 0.9220, cae_upper_ = 1.0850;
  GaussianWalkParams walk_;
  std::vector<double> dx_;

  // Per chain step: d18O values and radiocarbon data kept for the likelihood.
  std::vector<std::vector<double>> d18o_;
  std::vector<std::vector<ProxyDatum>> c14_;
  std::shared_ptr<const Profile> profile_;
  std::shared_ptr<const CalibrationCurve> curve_;
  Interval profile_domain_, curve_range_;
  EmissionParams emission_;
  double t2_norm_ = 0.0, t1_norm_ = 0.0, dof1_ = 6.0, dof2_ = 6.0, ratio1_ = 1.0, ratio2_ = 1.0;
  std::size_t dropped_ = 0;
};

// Reference depth scale: domain width over the signal's depth span.
double reference_depth_scale(const Signal& signal, Interval domain);

}  // namespace sagpr
