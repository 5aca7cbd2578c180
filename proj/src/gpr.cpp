#include "sagpr/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "sagpr/errors.hpp"
#include "sagpr/optimize.hpp"

namespace sagpr {

void KernelParams::validate() const {
  if (!(std::isfinite(variance) && variance > 0.0 && std::isfinite(lengthscale) && lengthscale > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "kernel variance and lengthscale must be positive and finite");
  }
}

double ou_kernel(double z1, double z2, const KernelParams& p) {
  return p.variance * std::exp(-std::abs(z1 - z2) / p.lengthscale);
}

double se_kernel(double z1, double z2, const KernelParams& p) {
  double d = (z1 - z2) / p.lengthscale;
  return p.variance * std::exp(-0.5 * d * d);
}

std::array<double, 2> Kernel::log_gradient(double a, double b) const {
  double k = (*this)(a, b);
  double d = std::abs(a - b) / params.lengthscale;
  if (kind == KernelKind::OrnsteinUhlenbeck) return {k, k * d};
  return {k, k * d * d};
}

Tabulated::Tabulated(std::vector<double> grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (grid_.size() != values_.size() || grid_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "tabulation needs equal, nonempty grid and values");
  }
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i] > grid_[i - 1])) throw Error(ErrorCode::InvalidArgument, "tabulation grid not increasing");
  }
  if (grid_.size() >= 2) {
    step_ = (grid_.back() - grid_.front()) / static_cast<double>(grid_.size() - 1);
    uniform_ = true;
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      if (std::abs(grid_[i] - (grid_.front() + static_cast<double>(i) * step_)) > 1e-9 * step_) {
        uniform_ = false;
        break;
      }
    }
  }
}

double Tabulated::operator()(double z) const {
  const std::size_t n = grid_.size();
  if (n == 1 || z <= grid_.front()) return values_.front();
  if (z >= grid_.back()) return values_.back();
  std::size_t i;
  if (uniform_) {
    i = std::min(static_cast<std::size_t>((z - grid_.front()) / step_), n - 2);
    // Rounding can put z just outside the computed cell.
    if (z < grid_[i] && i > 0) --i;
    else if (z > grid_[i + 1] && i + 2 < n) ++i;
  } else {
    i = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), z) - grid_.begin()) - 1;
  }
  double t = (z - grid_[i]) / (grid_[i + 1] - grid_[i]);
  return values_[i] + t * (values_[i + 1] - values_[i]);
}

PriorMean PriorMean::constant(double c) {
  PriorMean m;
  m.constant_ = c;
  return m;
}

PriorMean PriorMean::tabulated(Tabulated f) {
  PriorMean m;
  m.table_ = std::make_shared<const Tabulated>(std::move(f));
  return m;
}

NoiseFunction NoiseFunction::constant(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "noise variance must be positive");
  NoiseFunction f;
  f.constant_ = v;
  return f;
}

NoiseFunction NoiseFunction::nadaraya_watson(std::vector<double> inputs, std::vector<double> terms, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
  if (inputs.empty() || inputs.size() != terms.size()) {
    throw Error(ErrorCode::InvalidArgument, "Nadaraya-Watson needs matching nonempty inputs and terms");
  }
  std::vector<std::size_t> idx(inputs.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return inputs[a] < inputs[b]; });
  NoiseFunction f;
  f.h_ = h;
  for (auto i : idx) {
    f.inputs_.push_back(inputs[i]);
    f.terms_.push_back(terms[i]);
  }
  return f;
}

double NoiseFunction::operator()(double z) const {
  if (inputs_.empty()) return constant_;
  // Gaussian weights beyond 8h are below 1e-14 of the peak; sum the window,
  // and fall back to the full sum when the window is empty.
  auto first = std::lower_bound(inputs_.begin(), inputs_.end(), z - 8.0 * h_) - inputs_.begin();
  auto last = std::upper_bound(inputs_.begin(), inputs_.end(), z + 8.0 * h_) - inputs_.begin();
  if (first == last) {
    first = 0;
    last = static_cast<std::ptrdiff_t>(inputs_.size());
  }
  double num = 0.0, den = 0.0;
  for (auto i = first; i < last; ++i) {
    double u = (z - inputs_[i]) / h_;
    double w = std::exp(-0.5 * u * u);
    num += w * terms_[i];
    den += w;
  }
  if (!(den > 0.0)) throw Error(ErrorCode::EmptyNeighborhood, "no kernel mass near query; widen the bandwidth");
  return num / den;
}

double heteroscedastic_variance(std::span<const double> mu, std::span<const double> latent,
                                std::span<const double> inputs, std::span<const double> outputs, double h, double z) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "bandwidth must be positive");
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    double u = (z - inputs[n]) / h;
    double w = std::exp(-0.5 * u * u);
    double r = outputs[n] - mu[n];
    num += w * (r * r + latent[n]);
    den += w;
  }
  if (!(den > 0.0)) throw Error(ErrorCode::EmptyNeighborhood, "no kernel mass near query; widen the bandwidth");
  return num / den;
}

double knn_bandwidth(std::span<const double> inputs) {
  const std::size_t n = inputs.size();
  if (n < 2) return 1.0;
  std::vector<double> z(inputs.begin(), inputs.end());
  std::sort(z.begin(), z.end());
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n)))), n - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Merge outward from i to find the k-th nearest other point.
    std::size_t l = i, r = i;
    double d = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double dl = l > 0 ? z[i] - z[l - 1] : std::numeric_limits<double>::infinity();
      double dr = r + 1 < n ? z[r + 1] - z[i] : std::numeric_limits<double>::infinity();
      if (dl <= dr) {
        d = dl;
        --l;
      } else {
        d = dr;
        ++r;
      }
    }
    total += d;
  }
  double h = total / static_cast<double>(n);
  if (!(h > 0.0)) h = (z.back() - z.front()) > 0.0 ? (z.back() - z.front()) / static_cast<double>(n) : 1.0;
  return h;
}

GprFit::GprFit(Kernel kernel, std::vector<double> pseudo_inputs, std::vector<double> inputs,
               std::vector<double> outputs, std::vector<double> noise_at_inputs, NoiseFunction noise, PriorMean prior)
    : kernel_(kernel),
      pseudo_(std::move(pseudo_inputs)),
      inputs_(std::move(inputs)),
      outputs_(std::move(outputs)),
      lambda_(std::move(noise_at_inputs)),
      noise_(std::move(noise)),
      prior_(std::move(prior)) {
  kernel_.params.validate();
  const auto M = static_cast<Eigen::Index>(pseudo_.size());
  const auto N = static_cast<Eigen::Index>(inputs_.size());
  if (outputs_.size() != inputs_.size() || lambda_.size() != inputs_.size()) {
    throw Error(ErrorCode::InvalidArgument, "inputs, outputs and noise differ in length");
  }
  for (double l : lambda_) {
    if (!(l > 0.0) || !std::isfinite(l)) throw Error(ErrorCode::InvalidArgument, "noise must be positive");
  }

  Kuu_.resize(M, M);
  for (Eigen::Index i = 0; i < M; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) Kuu_(i, j) = Kuu_(j, i) = kernel_(pseudo_[i], pseudo_[j]);
  }
  Lu_.resize(M, M);
  if (M > 0) {
    bool ok = false;
    double j = 0.0;
    const double var = kernel_.params.variance;
    while (true) {
      Eigen::MatrixXd A = Kuu_;
      A.diagonal().array() += j;
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      if (llt.info() == Eigen::Success) {
        Eigen::MatrixXd L = llt.matrixL();
        if (L.allFinite() && L.diagonal().minCoeff() > 0.0) {
          Lu_ = std::move(L);
          jitter_ = j;
          ok = true;
          break;
        }
      }
      j = j == 0.0 ? 1e-8 * var : j * 10.0;
      if (j > 1e-2 * var * (1.0 + 1e-12)) break;
    }
    if (!ok) throw Error(ErrorCode::SingularSystem, "pseudo-input Gram matrix not positive definite");
  }

  Eigen::MatrixXd Kuf(M, N);
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index m = 0; m < M; ++m) Kuf(m, n) = kernel_(pseudo_[m], inputs_[n]);
  }
  V_ = M > 0 ? Eigen::MatrixXd(Lu_.triangularView<Eigen::Lower>().solve(Kuf)) : Eigen::MatrixXd(0, N);

  Eigen::VectorXd lam_inv(N);
  resid_.resize(N);
  for (Eigen::Index n = 0; n < N; ++n) {
    lam_inv(n) = 1.0 / lambda_[n];
    resid_(n) = outputs_[n] - prior_(inputs_[n]);
  }
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(M, M);
  if (N > 0) B.noalias() += V_ * lam_inv.asDiagonal() * V_.transpose();
  LB_.resize(M, M);
  if (M > 0) {
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "VFE inner system not positive definite");
    LB_ = llt.matrixL();
    c_ = LB_.triangularView<Eigen::Lower>().solve(V_ * resid_.cwiseProduct(lam_inv));
  } else {
    c_.resize(0);
  }

  double log_det = 0.0, quad = 0.0, trace = 0.0;
  for (Eigen::Index n = 0; n < N; ++n) {
    log_det += std::log(lambda_[n]);
    quad += resid_(n) * resid_(n) * lam_inv(n);
    double q = M > 0 ? V_.col(n).squaredNorm() : 0.0;
    trace += (kernel_(inputs_[n], inputs_[n]) - q) * lam_inv(n);
  }
  for (Eigen::Index m = 0; m < M; ++m) log_det += 2.0 * std::log(LB_(m, m));
  quad -= c_.squaredNorm();
  trace_ = trace;
  objective_ = -0.5 * static_cast<double>(N) * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * quad -
               0.5 * trace;
  if (!std::isfinite(objective_)) throw Error(ErrorCode::SingularSystem, "non-finite VFE objective");
}

Prediction GprFit::predict(double z) const {
  const auto M = static_cast<Eigen::Index>(pseudo_.size());
  double latent = kernel_(z, z);
  double mean = prior_(z);
  if (M > 0) {
    Eigen::VectorXd k(M);
    for (Eigen::Index m = 0; m < M; ++m) k(m) = kernel_(pseudo_[m], z);
    Eigen::VectorXd a = Lu_.triangularView<Eigen::Lower>().solve(k);
    Eigen::VectorXd b = LB_.triangularView<Eigen::Lower>().solve(a);
    mean += b.dot(c_);
    latent += b.squaredNorm() - a.squaredNorm();
  }
  return {mean, std::max(latent, 0.0), noise_(z)};
}

std::array<double, 2> GprFit::objective_gradient() const {
  const auto M = static_cast<Eigen::Index>(pseudo_.size());
  const auto N = static_cast<Eigen::Index>(inputs_.size());
  std::array<double, 2> grad{0.0, 0.0};
  if (N == 0) return grad;
  Eigen::VectorXd lam_inv(N);
  for (Eigen::Index n = 0; n < N; ++n) lam_inv(n) = 1.0 / lambda_[n];
  // d k_nn / d log var = var; OU/SE diagonal does not depend on the lengthscale.
  const double var = kernel_.params.variance;
  if (M == 0) {
    grad[0] = -0.5 * var * lam_inv.sum();
    return grad;
  }
  Eigen::MatrixXd W = Lu_.transpose().triangularView<Eigen::Upper>().solve(V_);  // Kuu^-1 Kuf
  Eigen::VectorXd tmp = LB_.transpose().triangularView<Eigen::Upper>().solve(c_);
  Eigen::VectorXd alpha = (resid_ - V_.transpose() * tmp).cwiseProduct(lam_inv);  // Sigma_y^-1 r
  Eigen::MatrixXd WL = W * lam_inv.asDiagonal();
  Eigen::MatrixXd VL = V_ * lam_inv.asDiagonal();
  Eigen::MatrixXd G = LB_.triangularView<Eigen::Lower>().solve(VL);
  G = LB_.transpose().triangularView<Eigen::Upper>().solve(G);  // B^-1 V Lambda^-1
  Eigen::MatrixXd P = WL - (WL * V_.transpose()) * G;              // W Sigma_y^-1
  Eigen::MatrixXd PW = P * W.transpose();
  Eigen::VectorXd Wa = W * alpha;

  for (int p = 0; p < 2; ++p) {
    Eigen::MatrixXd dKuu(M, M), D(M, N);
    for (Eigen::Index i = 0; i < M; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) dKuu(i, j) = dKuu(j, i) = kernel_.log_gradient(pseudo_[i], pseudo_[j])[p];
    }
    for (Eigen::Index n = 0; n < N; ++n) {
      for (Eigen::Index m = 0; m < M; ++m) D(m, n) = kernel_.log_gradient(pseudo_[m], inputs_[n])[p];
    }
    double term1 = (D * alpha).dot(Wa) - 0.5 * Wa.dot(dKuu * Wa);
    double term2 = P.cwiseProduct(D).sum() - 0.5 * dKuu.cwiseProduct(PW).sum();
    Eigen::MatrixXd dKW = dKuu * W;
    double term3 = 0.0;
    const double dknn = p == 0 ? var : 0.0;
    for (Eigen::Index n = 0; n < N; ++n) {
      double dq = 2.0 * D.col(n).dot(W.col(n)) - dKW.col(n).dot(W.col(n));
      term3 += (dknn - dq) * lam_inv(n);
    }
    grad[p] = term1 - term2 - 0.5 * term3;
  }
  return grad;
}

std::vector<double> stratified_pseudo_inputs(Interval domain, std::size_t count, Rng& rng) {
  std::vector<double> z(count);
  const double w = domain.width() / static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) z[i] = domain.lo + w * (static_cast<double>(i) + uniform01(rng));
  return z;
}

namespace {

double dataset_objective(const TuneDataset& d, const Kernel& kernel, const std::vector<double>* noise_override) {
  try {
    std::vector<double> noise = noise_override ? *noise_override : d.noise;
    NoiseFunction nf = NoiseFunction::constant(noise.empty() ? 1.0 : noise.front());
    GprFit fit(kernel, d.pseudo_inputs, d.inputs, d.outputs, std::move(noise), nf, d.prior);
    return fit.objective();
  } catch (const Error&) {
    return -std::numeric_limits<double>::infinity();
  }
}

double summed(const std::vector<TuneDataset>& data, const Kernel& kernel, double shared_noise) {
  std::vector<double> parts(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t l = 0; l < data.size(); ++l) {
    if (shared_noise > 0.0) {
      std::vector<double> noise(data[l].inputs.size(), shared_noise);
      parts[l] = dataset_objective(data[l], kernel, &noise);
    } else {
      parts[l] = dataset_objective(data[l], kernel, nullptr);
    }
  }
  double s = 0.0;
  for (double p : parts) s += p;  // fixed order
  return s;
}

TuneResult tune_impl(const std::vector<TuneDataset>& data, KernelParams init, double noise_init, KernelKind kind,
                     const TuneOptions& opts) {
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "tuning needs at least one dataset");
  init.validate();
  const bool with_noise = noise_init > 0.0;
  auto f = [&](const std::vector<double>& x) {
    Kernel k{kind, {std::exp(x[0]), std::exp(x[1])}};
    return summed(data, k, with_noise ? std::exp(x[2]) : 0.0);
  };
  std::vector<double> x0{std::log(init.variance), std::log(init.lengthscale)};
  std::vector<double> lo{std::log(init.variance) - 25.0, std::log(opts.min_lengthscale)};
  std::vector<double> hi{std::log(init.variance) + 25.0, std::log(opts.max_lengthscale)};
  if (with_noise) {
    x0.push_back(std::log(noise_init));
    lo.push_back(std::log(noise_init) - 25.0);
    hi.push_back(std::log(noise_init) + 25.0);
  }
  const double f0 = f(x0);
  if (!std::isfinite(f0)) throw Error(ErrorCode::OptimFailed, "objective not finite at initial hyperparameters");

  TuneResult best;
  best.initial_objective = f0;
  best.objective = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opts.restarts); ++r) {
    auto start = x0;
    if (r == 1) start[1] += std::log(4.0);
    if (r == 2) start[1] -= std::log(4.0);
    if (r >= 3) start[1] += std::log(4.0) * (r % 2 ? 1.0 : -1.0) * (r / 2);
    std::vector<double> step(start.size(), opts.initial_step);
    auto res = coordinate_search(f, start, step, lo, hi, opts.tolerance, opts.max_evaluations);
    if (r == 0) best.trace = res.trace;
    if (res.value > best.objective) {
      best.objective = res.value;
      best.params = {std::exp(res.x[0]), std::exp(res.x[1])};
      best.noise = with_noise ? std::exp(res.x[2]) : 0.0;
    }
  }
  if (!(best.objective >= f0)) {
    best.objective = f0;
    best.params = init;
    best.noise = with_noise ? noise_init : 0.0;
  }
  return best;
}

}  // namespace

double sum_objective(const std::vector<TuneDataset>& data, const Kernel& kernel) { return summed(data, kernel, 0.0); }

TuneResult tune_hyperparameters(const std::vector<TuneDataset>& data, KernelParams init, KernelKind kind,
                                const TuneOptions& opts) {
  return tune_impl(data, init, 0.0, kind, opts);
}

TuneResult tune_with_noise(const std::vector<TuneDataset>& data, KernelParams init, double noise_init,
                           KernelKind kind, const TuneOptions& opts) {
  if (!(noise_init > 0.0)) throw Error(ErrorCode::InvalidArgument, "initial noise must be positive");
  return tune_impl(data, init, noise_init, kind, opts);
}

HeteroscedasticFit fit_heteroscedastic(std::vector<double> inputs, std::vector<double> outputs,
                                       std::vector<double> pseudo_inputs, Kernel kernel, PriorMean prior,
                                       const HeteroscedasticOptions& opts) {
  const std::size_t N = inputs.size();
  if (outputs.size() != N) throw Error(ErrorCode::InvalidArgument, "inputs and outputs differ in length");
  double resid_var = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    double r = outputs[n] - prior(inputs[n]);
    resid_var += r * r;
  }
  resid_var = N > 0 ? resid_var / static_cast<double>(N) : kernel.params.variance;
  const double floor = 1e-10 * std::max(resid_var, kernel.params.variance);
  double init = opts.initial_noise > 0.0 ? opts.initial_noise : std::max(0.5 * resid_var, floor);
  if (!(init > 0.0)) init = kernel.params.variance;

  HeteroscedasticFit out;
  out.bandwidth = knn_bandwidth(inputs);
  std::vector<double> lambda(N, init);
  if (N == 0) {
    out.fit = std::make_shared<const GprFit>(kernel, pseudo_inputs, inputs, outputs, lambda,
                                             NoiseFunction::constant(init), prior);
    return out;
  }
  std::vector<double> terms(N);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    GprFit fit(kernel, pseudo_inputs, inputs, outputs, lambda, NoiseFunction::constant(init), prior);
    std::vector<double> mu(N), latent(N);
    for (std::size_t n = 0; n < N; ++n) {
      auto p = fit.predict(inputs[n]);
      mu[n] = p.mean;
      latent[n] = p.latent_variance;
      double r = outputs[n] - mu[n];
      terms[n] = r * r + latent[n];
    }
    auto nw = NoiseFunction::nadaraya_watson(inputs, terms, out.bandwidth);
    double change = 0.0;
    std::vector<double> next(N);
    for (std::size_t n = 0; n < N; ++n) {
      next[n] = std::max(nw(inputs[n]), floor);
      change = std::max(change, std::abs(next[n] - lambda[n]) / lambda[n]);
    }
    lambda = std::move(next);
    out.iterations = it;
    // A single point yields a constant noise function; nothing left to iterate.
    if (change < opts.tolerance || N == 1 || it == opts.max_iterations) {
      out.fit = std::make_shared<const GprFit>(kernel, pseudo_inputs, inputs, outputs, lambda, nw, prior);
      break;
    }
  }
  return out;
}

Profile::Profile(std::vector<double> grid, std::vector<double> mean, std::vector<double> variance,
                 std::vector<double> noise, std::vector<std::shared_ptr<const GprFit>> fits)
    : fits_(std::move(fits)) {
  if (grid.size() < 2) throw Error(ErrorCode::InvalidArgument, "profile grid needs >= 2 points");
  for (double v : variance) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "profile variance must be positive");
  }
  if (!noise.empty()) noise_ = Tabulated(grid, std::move(noise));
  var_ = Tabulated(grid, std::move(variance));
  mean_ = Tabulated(std::move(grid), std::move(mean));
}

namespace {

void moments_at(std::span<const std::shared_ptr<const GprFit>> fits, double z, double& m, double& v, double& lam) {
  const std::size_t L = fits.size();
  double mus[256];
  std::vector<double> big;
  double* mu = mus;
  if (L > 256) {
    big.resize(L);
    mu = big.data();
  }
  double s = 0.0, vs = 0.0, ns = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    auto p = fits[l]->predict(z);
    mu[l] = p.mean;
    s += p.mean;
    vs += p.latent_variance + p.noise;
    ns += p.noise;
  }
  m = s / static_cast<double>(L);
  double spread = 0.0;
  for (std::size_t l = 0; l < L; ++l) spread += (mu[l] - m) * (mu[l] - m);
  v = (vs + spread) / static_cast<double>(L);
  lam = ns / static_cast<double>(L);
}

}  // namespace

GridMoments mixture_moments_serial(std::span<const std::shared_ptr<const GprFit>> fits,
                                   std::span<const double> grid) {
  GridMoments g{std::vector<double>(grid.size()), std::vector<double>(grid.size()), std::vector<double>(grid.size())};
  for (std::size_t i = 0; i < grid.size(); ++i) moments_at(fits, grid[i], g.mean[i], g.variance[i], g.noise[i]);
  return g;
}

GridMoments mixture_moments_parallel(std::span<const std::shared_ptr<const GprFit>> fits,
                                     std::span<const double> grid) {
  GridMoments g{std::vector<double>(grid.size()), std::vector<double>(grid.size()), std::vector<double>(grid.size())};
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) moments_at(fits, grid[i], g.mean[i], g.variance[i], g.noise[i]);
  return g;
}

Profile combine_profile(std::vector<std::shared_ptr<const GprFit>> fits, std::vector<double> grid) {
  if (fits.empty()) throw Error(ErrorCode::InvalidArgument, "combine_profile needs at least one fit");
  auto g = mixture_moments_parallel(fits, grid);
  return Profile(std::move(grid), std::move(g.mean), std::move(g.variance), std::move(g.noise), std::move(fits));
}

std::vector<double> tabulation_grid(Interval domain, double lengthscale, std::size_t max_points) {
  const double width = domain.width();
  if (!(width > 0.0)) throw Error(ErrorCode::InvalidArgument, "profile domain must have positive width");
  double spacing = std::min(lengthscale / 5.0, width / 1000.0);
  auto n = static_cast<std::size_t>(std::ceil(width / spacing)) + 1;
  n = std::clamp<std::size_t>(n, 2, max_points);
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = domain.lo + width * static_cast<double>(i) / static_cast<double>(n - 1);
  g.back() = domain.hi;
  return g;
}

std::string profile_to_text(const Profile& p) {
  std::string out = "age,mean,sigma\n";
  const auto& g = p.grid();
  for (std::size_t i = 0; i < g.size(); ++i) {
    out += format_number(g[i]) + "," + format_number(p.mean_values()[i]) + "," +
           format_number(std::sqrt(p.variance_values()[i])) + "\n";
  }
  return out;
}

Profile parse_profile_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  char delim = ',';
  std::vector<double> g, m, v;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    if (header.empty()) {
      delim = detect_delimiter(line);
      header = split_fields(line, delim);
      if (header.size() < 3 || header[0] != "age" || header[1] != "mean" || header[2] != "sigma") {
        throw Error(ErrorCode::MissingColumn, "profile file needs age,mean,sigma");
      }
      continue;
    }
    auto f = split_fields(line, delim);
    if (f.size() < 3) throw Error(ErrorCode::MalformedRow, "profile line " + std::to_string(line_no));
    try {
      std::size_t pos = 0;
      double vals[3];
      for (int k = 0; k < 3; ++k) {
        vals[k] = std::stod(f[k], &pos);
        if (pos != f[k].size()) throw std::invalid_argument("trailing");
      }
      g.push_back(vals[0]);
      m.push_back(vals[1]);
      if (!(vals[2] > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "profile sigma must be > 0");
      v.push_back(vals[2] * vals[2]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::MalformedRow, "profile line " + std::to_string(line_no));
    }
  }
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (!(g[i] > g[i - 1])) throw Error(ErrorCode::NonMonotoneAges, "profile ages not increasing");
  }
  return Profile(std::move(g), std::move(m), std::move(v));
}

void write_profile(const Profile& profile, const std::filesystem::path& path) {
  write_file(path, profile_to_text(profile));
}

Profile read_profile(const std::filesystem::path& path) { return parse_profile_text(read_file(path)); }

}  // namespace sagpr
