#include "sagpr/sampler.hpp"

#include <exception>
#include <mutex>

#include <spdlog/spdlog.h>

namespace sagpr {

CorridorProposal::CorridorProposal(const AlignmentModel& m) {
  const std::size_t T = m.steps();
  const Interval dom = m.chain_domain();
  auto build = [&](bool use_ranges) {
    lo_.assign(T, dom.lo);
    hi_.assign(T, dom.hi);
    const Interval s0 = m.initial_support();
    lo_[0] = std::max(dom.lo, s0.lo);
    hi_[0] = std::min(dom.hi, s0.hi);
    if (!use_ranges) return true;
    for (std::size_t t = 1; t < T; ++t) {
      auto [a, b] = m.increment_range(t);
      lo_[t] = std::max(dom.lo, lo_[t - 1] + a);
      hi_[t] = std::min(dom.hi, hi_[t - 1] + b);
    }
    for (std::size_t t = T - 1; t >= 1; --t) {
      auto [a, b] = m.increment_range(t);
      hi_[t - 1] = std::min(hi_[t - 1], hi_[t] - a);
      lo_[t - 1] = std::max(lo_[t - 1], lo_[t] - b);
    }
    for (std::size_t t = 0; t < T; ++t) {
      if (!(hi_[t] > lo_[t])) return false;
    }
    return true;
  };
  if (!build(true)) {
    spdlog::warn("signal {}: increments cannot span the domain; proposing over the whole domain", m.signal().id());
    build(false);
  }
}

std::vector<double> CorridorProposal::sample(std::size_t t, std::size_t K, Rng& rng) const {
  std::vector<double> c(K);
  const double w = hi_[t] - lo_[t];
  for (std::size_t k = 0; k < K; ++k) {
    c[k] = lo_[t] + w * (static_cast<double>(k) + uniform01(rng)) / static_cast<double>(K);
  }
  return c;
}

double CorridorProposal::log_density(std::size_t t, double c) const {
  if (c < lo_[t] || c > hi_[t]) return -std::numeric_limits<double>::infinity();
  return -std::log(hi_[t] - lo_[t]);
}

BankProposal::BankProposal(std::vector<std::vector<double>> centres, double half_width)
    : centres_(std::move(centres)), d_(half_width) {
  if (!(d_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "proposal bandwidth must be positive");
  for (auto& c : centres_) {
    if (c.empty()) throw Error(ErrorCode::InvalidArgument, "proposal bank is empty");
    std::sort(c.begin(), c.end());
  }
}

namespace {
std::vector<std::vector<double>> bank_centres(const AlignmentModel& m, const std::vector<AlignmentSample>& bank) {
  std::vector<std::vector<double>> c(m.steps());
  for (const auto& s : bank) {
    auto v = m.chain_values(s);
    for (std::size_t t = 0; t < v.size(); ++t) c[t].push_back(v[t]);
  }
  return c;
}
}  // namespace

BankProposal::BankProposal(const AlignmentModel& m, const std::vector<AlignmentSample>& bank, double half_width)
    : BankProposal(bank_centres(m, bank), half_width) {}

std::vector<double> BankProposal::sample(std::size_t t, std::size_t K, Rng& rng) const {
  const auto& c = centres_[t];
  std::uniform_int_distribution<std::size_t> pick(0, c.size() - 1);
  std::vector<double> out(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double centre = c[pick(rng)];
    out[k] = centre + d_ * (2.0 * uniform01(rng) - 1.0);
  }
  return out;
}

double BankProposal::log_density(std::size_t t, double v) const {
  const auto& c = centres_[t];
  auto lo = std::upper_bound(c.begin(), c.end(), v - d_);
  auto hi = std::lower_bound(c.begin(), c.end(), v + d_);
  const auto count = hi > lo ? hi - lo : 0;
  if (count == 0) return -std::numeric_limits<double>::infinity();
  return std::log(static_cast<double>(count) / (2.0 * d_ * static_cast<double>(c.size())));
}

std::vector<AlignmentSample> sample_alignments(const AlignmentModel& m, const SamplerConfig& cfg,
                                               const std::vector<AlignmentSample>& previous, std::uint64_t seed,
                                               std::uint64_t tag, SamplerDiagnostics* diag) {
  if (cfg.samples < 1 || cfg.particles < 1) throw Error(ErrorCode::InvalidArgument, "K and L must be >= 1");
  std::size_t K = cfg.particles;
  ParticleSet ps;
  bool fallback = false;
  for (int attempt = 0;; ++attempt) {
    Rng rng = make_stream(seed, {tag, 0, static_cast<std::uint64_t>(attempt)});
    // The last retry falls back to the corridor in case the bank missed the support.
    const bool use_bank = !previous.empty() && attempt < cfg.retries;
    try {
      if (use_bank) {
        BankProposal q(m, previous, cfg.bandwidth);
        ps = smoother_forward(m, q, K, rng, cfg.parallel);
      } else {
        CorridorProposal q(m);
        ps = smoother_forward(m, q, K, rng, cfg.parallel);
        fallback = !previous.empty();
      }
      break;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateWeights || attempt >= cfg.retries) throw;
      spdlog::debug("signal {}: {} with K={}, doubling", m.signal().id(), e.what(), K);
      K *= 2;
    }
  }

  std::vector<AlignmentSample> out(cfg.samples);
  std::vector<MhStats> stats(cfg.samples);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto L = static_cast<std::ptrdiff_t>(cfg.samples);
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
  for (std::ptrdiff_t l = 0; l < L; ++l) {
    try {
      Rng rng = make_stream(seed, {tag, static_cast<std::uint64_t>(l) + 1});
      auto s = smoother_backward(ps, m, rng);
      s = mh_refine(m, std::move(s), cfg.sweeps, rng, &stats[l]);
      out[l] = m.to_sample(s.c, s.w);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  MhStats total;
  for (const auto& s : stats) {
    total.proposed += s.proposed;
    total.accepted += s.accepted;
  }
  if (diag) {
    diag->particles_used = K;
    diag->min_ess = *std::min_element(ps.ess.begin(), ps.ess.end());
    diag->acceptance_rate = total.rate();
    diag->corridor_fallback = fallback;
  }
  spdlog::debug("signal {}: K={} min ESS {:.1f} MH acceptance {:.3f}", m.signal().id(), K,
                *std::min_element(ps.ess.begin(), ps.ess.end()), total.rate());
  return out;
}

}  // namespace sagpr
