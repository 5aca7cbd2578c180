#include "sagpr/stack.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>

#include <spdlog/spdlog.h>

#include "sagpr/errors.hpp"
#include "sagpr/stats.hpp"

namespace sagpr {

namespace {

// log g~(y|z) - log p(y|z) at standardized residual s: -9/2 + log cosh(3s).
double log_density_ratio(double s) {
  const double a = std::abs(3.0 * s);
  return -4.5 + a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Profile whose variance is shrunk to the robust (MAD) scale of the pooled
// standardized residuals. Outliers that leaked into the fit inflate the
// variance, which in turn hides them from classification; this is only used
// to seed the first round of flags.
Profile robust_seed(const Profile& profile, const std::vector<std::vector<AlignmentSample>>& banks,
                    const std::vector<Signal>& signals, const std::vector<SignalParams>& params, bool learn_scale) {
  std::vector<double> abs_res;
  for (std::size_t m = 0; m < signals.size(); ++m) {
    for (const auto& s : banks[m]) {
      for (std::size_t n = 0; n < signals[m].size(); ++n) {
        if (!profile.contains(s.values[n])) continue;
        for (const auto& d : signals[m].observations()[n]) {
          if (d.kind != ProxyKind::D18O) continue;
          const double y = to_stack_units(d.value, params[m].emission, learn_scale);
          abs_res.push_back(std::abs(y - profile.mean(s.values[n])) / std::sqrt(profile.variance(s.values[n])));
        }
      }
    }
  }
  if (abs_res.empty()) return profile;
  const double c = 1.482602218505602 * median(abs_res);
  if (!(c < 1.0) || !(c > 0.0)) return profile;
  std::vector<double> var = profile.variance_values();
  for (auto& v : var) v *= c * c;
  return Profile(profile.grid(), profile.mean_values(), std::move(var));
}


}  // namespace

double outlier_posterior(double y, double z, const Profile& profile, double delta) {
  const double s = (y - profile.mean(z)) / std::sqrt(profile.variance(z));
  return logistic(std::log(delta) - std::log1p(-delta) + log_density_ratio(s));
}

double position_outlier_posterior(std::span<const double> ys, double z, const Profile& profile, double delta) {
  if (ys.empty() || delta <= 0.0) return 0.0;
  const double m = profile.mean(z), sd = std::sqrt(profile.variance(z));
  double x = std::log(delta) - std::log1p(-delta);
  for (double y : ys) x += log_density_ratio((y - m) / sd);
  return logistic(x);
}

std::vector<std::vector<double>> classify_outliers(std::vector<std::vector<AlignmentSample>>& banks,
                                                   const std::vector<Signal>& signals,
                                                   const std::vector<SignalParams>& params, const Profile& profile,
                                                   const ModelContext& ctx, std::uint64_t seed, std::uint64_t tag) {
  std::vector<std::vector<double>> mean_prob(signals.size());
  for (std::size_t m = 0; m < signals.size(); ++m) {
    const auto& sig = signals[m];
    auto& bank = banks[m];
    mean_prob[m].assign(sig.size(), 0.0);
    std::vector<std::vector<double>> ys(sig.size());
    for (std::size_t n = 0; n < sig.size(); ++n) {
      for (const auto& d : sig.observations()[n]) {
        if (d.kind == ProxyKind::D18O) ys[n].push_back(to_stack_units(d.value, params[m].emission, ctx.learn_scale));
      }
    }
    for (std::size_t l = 0; l < bank.size(); ++l) {
      Rng rng = make_stream(seed, {tag, m, l});
      auto& s = bank[l];
      s.outlier_flags.assign(sig.size(), 0);
      for (std::size_t n = 0; n < sig.size(); ++n) {
        if (ys[n].empty() || !profile.contains(s.values[n])) continue;
        const double p = position_outlier_posterior(ys[n], s.values[n], profile, ctx.fixed.delta);
        mean_prob[m][n] += p;
        s.outlier_flags[n] = uniform01(rng) < p ? 1 : 0;
      }
    }
    if (!bank.empty()) {
      for (auto& p : mean_prob[m]) p /= static_cast<double>(bank.size());
    }
  }
  return mean_prob;
}

TrainingSet training_set(std::size_t l, const std::vector<std::vector<AlignmentSample>>& banks,
                         const std::vector<Signal>& signals, const std::vector<SignalParams>& params,
                         bool learn_scale) {
  TrainingSet ts;
  for (std::size_t m = 0; m < signals.size(); ++m) {
    const auto& s = banks[m][l];
    for (std::size_t n = 0; n < signals[m].size(); ++n) {
      if (!s.outlier_flags.empty() && s.outlier_flags[n]) continue;
      for (const auto& d : signals[m].observations()[n]) {
        if (d.kind != ProxyKind::D18O) continue;
        ts.inputs.push_back(s.values[n]);
        ts.outputs.push_back(to_stack_units(d.value, params[m].emission, learn_scale));
      }
    }
  }
  return ts;
}

Profile build_profile(const std::vector<std::vector<AlignmentSample>>& banks, const std::vector<Signal>& signals,
                      const std::vector<SignalParams>& params, const ModelContext& ctx, const ProfileConfig& cfg,
                      ProfileState& state, std::uint64_t seed, std::uint64_t tag) {
  if (signals.empty() || banks.empty() || banks[0].empty()) throw Error(ErrorCode::NoSignals, "no aligned signals");
  const std::size_t L = banks[0].size();
  std::vector<TrainingSet> sets(L);
  for (std::size_t l = 0; l < L; ++l) {
    sets[l] = training_set(l, banks, signals, params, ctx.learn_scale);
    if (sets[l].inputs.size() < 2) throw Error(ErrorCode::NoSignals, "fewer than two clean d18O observations");
  }

  std::vector<double> pooled;
  for (const auto& s : sets) pooled.insert(pooled.end(), s.outputs.begin(), s.outputs.end());
  const double grand_mean = mean(pooled);
  const double out_var = std::max(variance(pooled), 1e-12);
  const PriorMean prior = PriorMean::constant(grand_mean);

  if (!(state.kernel.variance > 0)) state.kernel.variance = cfg.kernel_init.variance > 0 ? cfg.kernel_init.variance : out_var;
  if (!(state.kernel.lengthscale > 0)) {
    state.kernel.lengthscale = cfg.kernel_init.lengthscale > 0 ? cfg.kernel_init.lengthscale : 0.1 * ctx.domain.width();
  }
  if (!(state.noise > 0)) state.noise = cfg.noise_init > 0 ? cfg.noise_init : 0.1 * out_var;

  std::vector<std::vector<double>> pseudo(L);
  for (std::size_t l = 0; l < L; ++l) {
    Rng rng = make_stream(seed, {tag, l});
    pseudo[l] = stratified_pseudo_inputs(ctx.domain, cfg.pseudo_inputs, rng);
  }

  std::size_t smallest = sets[0].inputs.size();
  for (const auto& s : sets) smallest = std::min(smallest, s.inputs.size());
  if (cfg.tune && smallest >= cfg.min_tune_points) {
    std::vector<TuneDataset> data;
    const std::size_t S = std::min(std::max<std::size_t>(cfg.tune_samples, 1), L);
    for (std::size_t i = 0; i < S; ++i) {
      const std::size_t l = S == 1 ? 0 : i * (L - 1) / (S - 1);
      TuneDataset d;
      d.inputs = sets[l].inputs;
      d.outputs = sets[l].outputs;
      d.noise.assign(d.inputs.size(), state.noise);
      d.pseudo_inputs = pseudo[l];
      d.prior = prior;
      data.push_back(std::move(d));
    }
    auto res = tune_with_noise(data, state.kernel, state.noise, cfg.kernel, cfg.tune_options);
    state.kernel = res.params;
    state.noise = res.noise;
    spdlog::debug("tuned kernel variance {:.4g} lengthscale {:.4g} noise {:.4g} objective {:.6g}", state.kernel.variance,
                  state.kernel.lengthscale, state.noise, res.objective);
  }

  const Kernel kernel{cfg.kernel, state.kernel};
  std::vector<std::shared_ptr<const GprFit>> fits(L);
  std::exception_ptr failure;
  std::mutex mu;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t l = 0; l < L; ++l) {
    try {
      if (cfg.heteroscedastic) {
        HeteroscedasticOptions ho;
        ho.initial_noise = state.noise;
        fits[l] = fit_heteroscedastic(sets[l].inputs, sets[l].outputs, pseudo[l], kernel, prior, ho).fit;
      } else {
        std::vector<double> lam(sets[l].inputs.size(), state.noise);
        fits[l] = std::make_shared<GprFit>(kernel, pseudo[l], sets[l].inputs, sets[l].outputs, lam,
                                           NoiseFunction::constant(state.noise), prior);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return combine_profile(std::move(fits), tabulation_grid(ctx.domain, state.kernel.lengthscale, cfg.max_grid_points));
}

Profile profile_from_ages(const std::vector<Signal>& signals, const std::vector<std::vector<double>>& ages,
                          const ModelContext& ctx, const ProfileConfig& cfg, ProfileState& state, std::uint64_t seed) {
  std::vector<std::vector<AlignmentSample>> banks(signals.size());
  std::vector<SignalParams> params(signals.size());
  for (std::size_t m = 0; m < signals.size(); ++m) {
    AlignmentSample s;
    s.values = ages[m];
    s.outlier_flags.assign(ages[m].size(), 0);
    banks[m].push_back(std::move(s));
  }
  return build_profile(banks, signals, params, ctx, cfg, state, seed, 0x1417ULL);
}

StackResult build_stack(const std::vector<Signal>& signals, const Profile& init_profile,
                        const std::vector<SignalParams>& init_params, const ModelContext& ctx,
                        const StackConfig& cfg, std::uint64_t seed) {
  if (signals.empty()) throw Error(ErrorCode::NoSignals, "no signals to stack");
  if (init_params.size() != signals.size()) throw Error(ErrorCode::InvalidArgument, "one parameter set per signal");
  StackResult res;
  res.profile = init_profile;
  res.params = init_params;
  res.banks.assign(signals.size(), {});
  res.em.assign(signals.size(), {});
  ModelContext mc = ctx;
  for (std::size_t outer = 0; outer < cfg.max_outer; ++outer) {
    mc.profile = std::make_shared<Profile>(res.profile);
    for (std::size_t m = 0; m < signals.size(); ++m) {
      res.em[m] = run_em(signals[m], mc, res.params[m], cfg.em, seed, 1000 * (outer + 1) + m, res.banks[m]);
      res.params[m] = res.em[m].params;
      res.banks[m] = res.em[m].bank;
    }
    Profile next;
    if (cfg.classify) {
      // Flags and profile alternate so that outliers admitted by a noisy
      // profile are re-examined against one fitted without them.
      const Profile seed_profile = robust_seed(res.profile, res.banks, signals, res.params, mc.learn_scale);
      const Profile* against = &seed_profile;
      for (std::size_t round = 0; round < std::max<std::size_t>(cfg.classify_rounds, 1); ++round) {
        res.outlier_probability =
            classify_outliers(res.banks, signals, res.params, *against, mc, seed, 7000 + 100 * outer + round);
        next = build_profile(res.banks, signals, res.params, mc, cfg.profile, res.state, seed, 9000 + 100 * outer + round);
        against = &next;
      }
    } else {
      res.outlier_probability.assign(signals.size(), {});
      for (std::size_t m = 0; m < signals.size(); ++m) {
        res.outlier_probability[m].assign(signals[m].size(), 0.0);
        for (auto& s : res.banks[m]) s.outlier_flags.assign(signals[m].size(), 0);
      }
      next = build_profile(res.banks, signals, res.params, mc, cfg.profile, res.state, seed, 9000 + 100 * outer);
    }

    std::vector<double> pooled;
    for (std::size_t l = 0; l < res.banks[0].size(); ++l) {
      auto ts = training_set(l, res.banks, signals, res.params, mc.learn_scale);
      pooled.insert(pooled.end(), ts.outputs.begin(), ts.outputs.end());
    }
    const double sd = std::sqrt(std::max(variance(pooled), 1e-300));
    double change = 0.0;
    for (double z : next.grid()) {
      const double old = res.profile.contains(z) ? res.profile.mean(z) : res.profile.mean(std::clamp(z, res.profile.domain().lo, res.profile.domain().hi));
      change = std::max(change, std::abs(next.mean(z) - old));
    }
    res.profile = std::move(next);
    res.metric_history.push_back(change / sd);
    res.iterations = outer + 1;
    spdlog::info("outer iteration {}: profile change {:.4g} (sd units)", outer + 1, change / sd);
    if (change / sd < cfg.tolerance) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) spdlog::warn("stack did not converge in {} outer iterations", res.iterations);
  return res;
}

}  // namespace sagpr
