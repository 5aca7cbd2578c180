#include "sagpr/alignment_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>
#include <spdlog/spdlog.h>

#include "sagpr/errors.hpp"

namespace sagpr {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTail = 1e-6;
}  // namespace

double TransitionParams::depth_scale() const {
  switch (kind) {
    case TransitionKind::Gamma: return gamma.depth_scale;
    case TransitionKind::Cae: return cae.depth_scale;
    default: return 1.0;
  }
}

void TransitionParams::set_depth_scale(double r) {
  gamma.depth_scale = r;
  cae.depth_scale = r;
}

void TransitionParams::validate() const {
  switch (kind) {
    case TransitionKind::Gamma: gamma.validate(); break;
    case TransitionKind::Cae: cae.validate(); break;
    default: walk.validate(); break;
  }
}

double reference_depth_scale(const Signal& s, Interval domain) {
  return domain.width() / (s.positions().back() - s.positions().front());
}

AlignmentModel::AlignmentModel(const Signal& signal, const SignalParams& params, const ModelContext& ctx)
    : signal_(&signal), kind_(params.transition.kind), n_(signal.size()) {
  params.transition.validate();
  params.emission.validate();
  ctx.fixed.validate();
  const auto& x = signal.positions();
  chain_domain_ = reversed() ? Interval{-ctx.domain.hi, -ctx.domain.lo} : ctx.domain;

  dx_.assign(n_, 0.0);
  scale_.assign(n_, 1.0);
  log_scale_.assign(n_, 0.0);
  const double r = params.transition.depth_scale();
  for (std::size_t t = 1; t < n_; ++t) {
    const std::size_t n = position_of(t);
    dx_[t] = reversed() ? x[n + 1] - x[n] : x[n] - x[n - 1];
    scale_[t] = r * dx_[t];
    log_scale_[t] = std::log(scale_[t]);
  }

  if (kind_ == TransitionKind::Gamma) {
    gshape_ = params.transition.gamma.alpha;
    grate_ = params.transition.gamma.beta;
  } else if (kind_ == TransitionKind::Cae) {
    const auto& c = params.transition.cae;
    gshape_ = c.shape;
    grate_ = c.rate;
    for (int w = 0; w < 3; ++w) {
      log_region_[w] = cae_log_region_mass(w, c.shape, c.rate, ctx.fixed);
      for (int v = 0; v < 3; ++v) log_phi_[w][v] = std::log(c.phi[w][v]);
    }
    cae_lower_ = ctx.fixed.cae_lower;
    cae_upper_ = ctx.fixed.cae_upper;
  } else {
    walk_ = params.transition.walk;
  }
  gconst_ = gshape_ * std::log(grate_) - boost::math::lgamma(gshape_);

  profile_ = ctx.profile;
  curve_ = ctx.curve;
  emission_ = params.emission;
  if (!ctx.learn_scale) emission_.scale = 1.0;
  if (profile_) profile_domain_ = profile_->domain();
  if (curve_) curve_range_ = curve_->range();
  dof1_ = 2.0 * ctx.fixed.a1;
  dof2_ = 2.0 * ctx.fixed.a2;
  ratio1_ = ctx.fixed.b1 / ctx.fixed.a1;
  ratio2_ = ctx.fixed.b2 / ctx.fixed.a2;
  t1_norm_ = t_log_normalizer(dof1_);
  t2_norm_ = t_log_normalizer(dof2_);

  d18o_.assign(n_, {});
  c14_.assign(n_, {});
  double mu_lo = 0.0, mu_hi = 0.0;
  if (curve_) {
    auto [lo, hi] = std::minmax_element(curve_->mu().begin(), curve_->mu().end());
    mu_lo = *lo;
    mu_hi = *hi;
  }
  for (std::size_t t = 0; t < n_; ++t) {
    for (const auto& d : signal.observations()[position_of(t)]) {
      if (d.kind == ProxyKind::D18O) {
        if (!profile_) throw Error(ErrorCode::InvalidArgument, "signal " + signal.id() + " has d18O data but no profile");
        d18o_[t].push_back(d.value);
        continue;
      }
      if (!curve_) {
        throw Error(ErrorCode::InvalidArgument, "signal " + signal.id() + " has radiocarbon data but no calibration curve");
      }
      const double y = d.value - d.reservoir_offset;
      const double slack = 4.0 * std::sqrt(curve_->sigma().back() * curve_->sigma().back() + d.extra_variance);
      if (y > mu_hi + slack || y < mu_lo - slack) {
        ++dropped_;
        continue;
      }
      c14_[t].push_back(d);
    }
  }
  if (dropped_ > 0) {
    spdlog::warn("signal {}: {} radiocarbon datum(s) beyond the calibration curve dropped", signal.id(), dropped_);
  }

  initial_support_ = chain_domain_;
  if (kind_ == TransitionKind::Cae && !c14_[0].empty()) {
    // Window around the calibrated age of the boundary datum.
    CalibratedAge best{0.0, std::numeric_limits<double>::infinity()};
    for (const auto& d : c14_[0]) {
      auto a = calibrate_radiocarbon(d, *curve_, ctx.fixed);
      if (a.sd < best.sd) best = a;
    }
    const double lo = std::max(ctx.domain.lo, best.mean - 6.0 * best.sd);
    const double hi = std::min(ctx.domain.hi, best.mean + 6.0 * best.sd);
    if (hi > lo) initial_support_ = {-hi, -lo};
  }
  log_initial_density_ = -std::log(initial_support_.width()) - std::log(static_cast<double>(regimes()));
}

double AlignmentModel::log_initial(double c, int /*w*/) const {
  return initial_support_.contains(c) ? log_initial_density_ : kNegInf;
}

int AlignmentModel::regime_of(std::size_t t, double c_prev, double c) const {
  switch (kind_) {
    case TransitionKind::Gamma: return c > c_prev ? 0 : -1;
    case TransitionKind::Cae: {
      const double u = (c - c_prev) / scale_[t];
      if (!(u > 0.0)) return -1;
      if (u < cae_lower_) return Contraction;
      if (u < cae_upper_) return Average;
      return Expansion;
    }
    default: return 0;
  }
}

double AlignmentModel::log_increment(std::size_t t, double c_prev, double c, int w) const {
  if (kind_ == TransitionKind::GaussianWalk) {
    const double var = walk_.sd * walk_.sd * dx_[t];
    const double r = c - c_prev - walk_.drift * dx_[t];
    return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
  }
  const double u = (c - c_prev) / scale_[t];
  if (!(u > 0.0)) return kNegInf;
  double v = gconst_ + (gshape_ - 1.0) * std::log(u) - grate_ * u - log_scale_[t];
  if (kind_ == TransitionKind::Cae) v -= log_region_[w];
  return v;
}

double AlignmentModel::log_emission(std::size_t t, double c) const {
  if (!chain_domain_.contains(c)) return kNegInf;
  const double z = to_age(c);
  double lp = 0.0;
  if (!d18o_[t].empty()) {
    if (!profile_domain_.contains(z)) return kNegInf;
    const double loc = emission_.scale * profile_->mean(z) + emission_.shift;
    const double s2 = ratio2_ * emission_.scale * emission_.scale * profile_->variance(z);
    const double base = t2_norm_ - 0.5 * std::log(s2);
    for (double y : d18o_[t]) {
      const double r = y - loc;
      lp += base - 0.5 * (dof2_ + 1.0) * std::log1p(r * r / (dof2_ * s2));
    }
  }
  if (!c14_[t].empty()) {
    if (!curve_range_.contains(z)) return kNegInf;
    const auto cc = curve_->at(z);
    for (const auto& d : c14_[t]) {
      const double s2 = ratio1_ * (cc.sigma * cc.sigma + d.extra_variance);
      const double r = d.value - cc.mean - d.reservoir_offset;
      lp += t1_norm_ - 0.5 * std::log(s2) - 0.5 * (dof1_ + 1.0) * std::log1p(r * r / (dof1_ * s2));
    }
  }
  return lp;
}

std::pair<double, double> AlignmentModel::increment_range(std::size_t t) const {
  if (kind_ == TransitionKind::GaussianWalk) {
    const double m = walk_.drift * dx_[t], s = walk_.sd * std::sqrt(dx_[t]);
    return {m - 6.0 * s, m + 6.0 * s};
  }
  const double lo = boost::math::gamma_p_inv(gshape_, kTail) / grate_;
  const double hi = boost::math::gamma_q_inv(gshape_, kTail) / grate_;
  return {scale_[t] * lo, scale_[t] * hi};
}

AlignmentSample AlignmentModel::to_sample(std::span<const double> chain, std::span<const int> regimes) const {
  AlignmentSample s;
  s.values.resize(n_);
  s.outlier_flags.assign(n_, 0);
  for (std::size_t t = 0; t < n_; ++t) s.values[position_of(t)] = to_age(chain[t]);
  if (kind_ == TransitionKind::Cae) {
    s.regimes.resize(n_);
    for (std::size_t t = 0; t < n_; ++t) s.regimes[position_of(t)] = regimes[t];
  }
  s.log_posterior = log_joint(chain, regimes);
  return s;
}

std::vector<double> AlignmentModel::chain_values(const AlignmentSample& s) const {
  std::vector<double> c(n_);
  for (std::size_t t = 0; t < n_; ++t) c[t] = to_chain(s.values[position_of(t)]);
  return c;
}

std::vector<int> AlignmentModel::chain_regimes(const AlignmentSample& s) const {
  std::vector<int> w(n_, 0);
  if (kind_ != TransitionKind::Cae) return w;
  if (s.regimes.size() == n_) {
    for (std::size_t t = 0; t < n_; ++t) w[t] = s.regimes[position_of(t)];
    return w;
  }
  auto c = chain_values(s);
  w[0] = Average;
  for (std::size_t t = 1; t < n_; ++t) w[t] = std::max(regime_of(t, c[t - 1], c[t]), 0);
  return w;
}

double AlignmentModel::log_prior(std::span<const double> c, std::span<const int> w) const {
  double lp = log_initial(c[0], w[0]);
  for (std::size_t t = 1; t < n_ && std::isfinite(lp); ++t) lp += log_transition(t, c[t - 1], w[t - 1], c[t], w[t]);
  return lp;
}

double AlignmentModel::log_likelihood(std::span<const double> c) const {
  double ll = 0.0;
  for (std::size_t t = 0; t < n_ && std::isfinite(ll); ++t) ll += log_emission(t, c[t]);
  return ll;
}

}  // namespace sagpr
