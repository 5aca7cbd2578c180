#pragma once

#include <cstdint>
#include <vector>

#include "sagpr/alignment_model.hpp"
#include "sagpr/sampler.hpp"

namespace sagpr {

struct MStepOptions {
  bool learn_transition = true;
  bool learn_emission = true;
  bool learn_depth_scale = true;
  double r_min = 0.0;  // <= 0: reference scale * 0.1
  double r_max = 0.0;  // <= 0: reference scale * 10
  double phi_pseudo_count = 1e-6;
};

// Monte-Carlo Q for one signal on a fixed bank, split into the separable
// blocks the M-step maximizes. Regimes after the first are re-derived from
// the increments at the candidate depth scale, since they are a function of
// (Z, r) under the C/A/E model.
class QEvaluator {
 public:
  QEvaluator(const std::vector<AlignmentSample>& bank, const Signal& signal, const ModelContext& ctx,
             const SignalParams& reference);

  double total(const SignalParams& p) const;
  double transition_part(const TransitionParams& p) const;  // prior + mean log transition
  double emission_part(const EmissionParams& p) const;      // prior + mean d18O log emission
  double constant_part() const { return constant_; }        // initial density + radiocarbon terms
  // Monte-Carlo standard error of the bank average, sd(log joint)/sqrt(L).
  double standard_error(const SignalParams& p) const;

  double sigma_derivative(double log_sigma, double h) const;  // d emission_part / d log sigma
  double irls_shift(double h, double sigma) const;             // one MM update of h
  std::vector<int> regimes_at(std::size_t l, double r) const;  // chain order
  GaussianWalkParams walk_estimate() const;                    // maximizer of the walk block

  const ModelContext& context() const { return ctx_; }
  std::size_t samples() const { return L_; }
  double reference_scale() const { return r_ref_; }

 private:
  double transition_sample(std::size_t l, const TransitionParams& p) const;
  double emission_sample(std::size_t l, const EmissionParams& p) const;

  ModelContext ctx_;
  std::size_t L_ = 0, T_ = 0;
  double r_ref_ = 1.0;
  bool reversed_ = false;
  std::vector<std::vector<double>> ratio_;  // [l][t] chain increment / dx, t >= 1
  std::vector<double> dx_;                  // [t]
  std::vector<int> first_regime_;           // [l]
  // d18O data: per sample, flattened (y, mu, nu)
  std::vector<std::vector<double>> y_, mu_, nu_;
  double constant_ = 0.0;
  std::vector<double> constant_per_sample_;
};

SignalParams m_step(const QEvaluator& q, const SignalParams& current, const MStepOptions& opts = {});

struct EmConfig {
  SamplerConfig sampler;
  std::size_t max_iterations = 20;
  double tolerance = 1e-4;
  MStepOptions mstep;
};

struct EmResult {
  SignalParams params;
  std::vector<AlignmentSample> bank;  // drawn at the final parameters
  std::vector<double> q_history;      // Q(new | bank_t) per iteration
  std::vector<double> q_start;        // Q(old | bank_t) per iteration
  std::vector<double> q_se;           // MC standard error per iteration
  std::size_t iterations = 0;
  SamplerDiagnostics last_sampler;
};

EmResult run_em(const Signal& signal, const ModelContext& ctx, const SignalParams& init, const EmConfig& cfg,
                std::uint64_t seed, std::uint64_t tag, const std::vector<AlignmentSample>& previous = {});

}  // namespace sagpr
