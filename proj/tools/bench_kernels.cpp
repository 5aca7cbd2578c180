// Serial vs OpenMP timings for the two hot kernels: one particle-smoother
// forward step and the moment-matched mixture over a profile grid.
#include <chrono>
#include <cstdio>
#include <memory>
#include <vector>

#include <omp.h>

#include "sagpr/sampler.hpp"
#include "sagpr/stack.hpp"
#include "sagpr/toy.hpp"

using namespace sagpr;

namespace {

template <class F>
double seconds(F&& f, int reps) {
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t K = argc > 1 ? std::stoul(argv[1]) : 1000;
  const std::size_t L = argc > 2 ? std::stoul(argv[2]) : 100;
  std::printf("threads: %d\n", omp_get_max_threads());

  ToySpec spec;
  spec.example = 5;
  auto toy = make_toy(spec, 7);
  ModelContext ctx;
  ctx.domain = toy.domain;
  ProfileConfig pc;
  ProfileState state;
  auto profile = std::make_shared<Profile>(profile_from_ages({toy.signals[0]}, {toy.true_ages[0]}, ctx, pc, state, 7));
  ctx.profile = profile;
  SignalParams params;
  params.transition.set_depth_scale(reference_depth_scale(toy.signals[1], ctx.domain));
  AlignmentModel model(toy.signals[1], params, ctx);

  CorridorProposal prop(model);
  Rng rng = make_stream(1, {1});
  const std::size_t t = model.steps() / 2;
  auto prev = prop.sample(t - 1, K, rng);
  auto cur = prop.sample(t, K, rng);
  std::vector<double> prev_logw(K, 0.0), logq(K);
  for (std::size_t k = 0; k < K; ++k) logq[k] = prop.log_density(t, cur[k]);
  std::vector<double> out_s, out_p;
  const double ts = seconds([&] { forward_step_serial(model, t, prev, prev_logw, cur, logq, out_s); }, 3);
  const double tp = seconds([&] { forward_step_parallel(model, t, prev, prev_logw, cur, logq, out_p); }, 3);
  std::printf("forward step   K=%zu  serial %.4fs  parallel %.4fs  speedup %.2fx  identical=%s\n", K, ts, tp, ts / tp,
              out_s == out_p ? "yes" : "no");

  std::vector<std::shared_ptr<const GprFit>> fits;
  for (std::size_t l = 0; l < L; ++l) fits.push_back(profile->fits()[0]);
  auto grid = tabulation_grid(ctx.domain, 1e-3, 4001);
  GridMoments ms, mp;
  const double ms_t = seconds([&] { ms = mixture_moments_serial(fits, grid); }, 3);
  const double mp_t = seconds([&] { mp = mixture_moments_parallel(fits, grid); }, 3);
  std::printf("mixture grid   L=%zu G=%zu  serial %.4fs  parallel %.4fs  speedup %.2fx  identical=%s\n", L,
              grid.size(), ms_t, mp_t, ms_t / mp_t, ms.mean == mp.mean && ms.variance == mp.variance ? "yes" : "no");
  return 0;
}
