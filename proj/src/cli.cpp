#include "sagpr/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <tuple>

#include <omp.h>
#include <spdlog/cfg/env.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "sagpr/dtw.hpp"
#include "sagpr/errors.hpp"
#include "sagpr/report.hpp"
#include "sagpr/stats.hpp"

namespace fs = std::filesystem;

namespace sagpr {

StackConfig stack_config_from(const RunConfig& cfg, Interval domain) {
  StackConfig sc;
  auto& s = sc.em.sampler;
  s.particles = cfg.particles;
  s.samples = cfg.samples;
  s.sweeps = cfg.sweeps;
  s.bandwidth = cfg.bandwidth > 0 ? cfg.bandwidth : 0.02 * domain.width();
  s.retries = cfg.retries;
  sc.em.max_iterations = cfg.max_em_iters;
  sc.em.tolerance = cfg.em_tolerance;
  sc.em.mstep.learn_emission = cfg.learn_emission;
  sc.em.mstep.learn_transition = cfg.learn_transition;
  sc.em.mstep.learn_depth_scale = cfg.learn_depth_scale;
  auto& p = sc.profile;
  p.kernel = cfg.kernel;
  p.kernel_init = {cfg.kernel_variance, cfg.kernel_lengthscale};
  p.noise_init = cfg.noise_init;
  p.heteroscedastic = cfg.use_heteroscedastic();
  p.pseudo_inputs = cfg.pseudo_inputs;
  p.tune_samples = cfg.tune_samples;
  p.max_grid_points = cfg.grid_points;
  sc.max_outer = cfg.max_outer_iters;
  sc.tolerance = cfg.outer_tolerance;
  sc.classify = cfg.classify_outliers;
  sc.classify_rounds = cfg.outlier_rounds;
  return sc;
}

ModelContext context_from(const RunConfig& cfg, Interval domain) {
  ModelContext ctx;
  ctx.fixed = cfg.fixed;
  ctx.domain = domain;
  ctx.learn_scale = cfg.use_learn_scale();
  if (!cfg.calibration.empty()) {
    ctx.curve = std::make_shared<CalibrationCurve>(parse_calibration_curve(cfg.calibration));
  }
  return ctx;
}

SignalParams initial_params(const RunConfig& cfg, const Signal& signal, Interval domain) {
  SignalParams p;
  p.transition.kind = cfg.transition;
  p.transition.gamma.alpha = cfg.alpha_init;
  p.transition.gamma.beta = cfg.beta_init;
  const double r = cfg.r_init > 0 ? cfg.r_init : reference_depth_scale(signal, domain);
  p.transition.set_depth_scale(r);
  if (cfg.transition == TransitionKind::GaussianWalk) {
    p.transition.walk.drift = r;
    p.transition.walk.sd = 0.5 * r;
  }
  p.emission.shift = cfg.fixed.h_bar;
  p.emission.scale = 1.0;
  return p;
}

namespace {

Interval configured_domain(const RunConfig& cfg, Interval fallback) {
  return cfg.domain_hi > cfg.domain_lo ? Interval{cfg.domain_lo, cfg.domain_hi} : fallback;
}

std::vector<double> median_ages(const std::vector<AlignmentSample>& bank, std::size_t n) {
  std::vector<double> out(n), v(bank.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < bank.size(); ++l) v[l] = bank[l].values[i];
    out[i] = median(v);
  }
  return out;
}

std::vector<PlotPoints> plot_points(const std::vector<Signal>& signals, const std::vector<SignalParams>& params,
                                    const std::vector<std::vector<AlignmentSample>>& banks,
                                    const std::vector<std::vector<double>>& outlier_prob, bool learn_scale) {
  std::vector<PlotPoints> pts;
  for (std::size_t m = 0; m < signals.size(); ++m) {
    PlotPoints p;
    auto med = median_ages(banks[m], signals[m].size());
    for (std::size_t n = 0; n < signals[m].size(); ++n) {
      for (const auto& d : signals[m].observations()[n]) {
        if (d.kind != ProxyKind::D18O) continue;
        p.age.push_back(med[n]);
        p.value.push_back(to_stack_units(d.value, params[m].emission, learn_scale));
        p.outlier.push_back(m < outlier_prob.size() && n < outlier_prob[m].size() && outlier_prob[m][n] > 0.5);
      }
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

nlohmann::json config_json(const RunConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : config_entries(cfg)) j[k] = v;
  return j;
}

nlohmann::json params_json(const SignalParams& p) {
  const auto& t = p.transition;
  nlohmann::json j = {{"h", p.emission.shift}, {"sigma", p.emission.scale}};
  if (t.kind == TransitionKind::Gamma) {
    j["r"] = t.gamma.depth_scale;
    j["alpha"] = t.gamma.alpha;
    j["beta"] = t.gamma.beta;
  } else if (t.kind == TransitionKind::Cae) {
    j["r"] = t.cae.depth_scale;
    j["phi"] = t.cae.phi;
  } else {
    j["drift"] = t.walk.drift;
    j["sd"] = t.walk.sd;
  }
  return j;
}

nlohmann::json em_json(const EmResult& e) {
  return {{"iterations", e.iterations},
          {"q_history", e.q_history},
          {"q_start", e.q_start},
          {"q_se", e.q_se},
          {"particles_used", e.last_sampler.particles_used},
          {"min_ess", e.last_sampler.min_ess},
          {"acceptance_rate", e.last_sampler.acceptance_rate},
          {"corridor_fallback", e.last_sampler.corridor_fallback}};
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

// Per-signal files shared by align, stack and simulate.
void write_signal_outputs(const fs::path& out, const std::vector<Signal>& signals,
                          const std::vector<SignalParams>& params, const std::vector<EmResult>& em,
                          const std::vector<std::vector<AlignmentSample>>& banks,
                          const std::vector<std::vector<double>>& outlier_prob) {
  std::string report = params_header();
  for (std::size_t m = 0; m < signals.size(); ++m) {
    const auto& id = signals[m].id();
    write_file(out / ("samples_" + id + ".csv"), samples_to_text(signals[m], banks[m]));
    std::vector<double> prob = m < outlier_prob.size() ? outlier_prob[m] : std::vector<double>{};
    write_file(out / ("summary_" + id + ".csv"), summary_to_text(summarize(signals[m], banks[m], prob)));
    const double q = em[m].q_history.empty() ? std::nan("") : em[m].q_history.back();
    report += params_row(id, params[m], q);
  }
  write_file(out / "params.txt", report);
}

std::vector<Signal> load_signals(const RunConfig& cfg) {
  if (cfg.signals.empty()) throw Error(ErrorCode::NoSignals, "no signal files given");
  std::vector<Signal> signals;
  for (const auto& p : cfg.signals) {
    if (!fs::exists(p)) throw Error(ErrorCode::IoError, "signal file not found: " + p.string());
    signals.push_back(parse_signal(p));
  }
  return signals;
}

void cmd_align(const RunConfig& cfg) {
  if (cfg.stack.empty() || !fs::exists(cfg.stack)) {
    throw Error(ErrorCode::NoStack, "stack file not found: " + (cfg.stack.empty() ? "<none>" : cfg.stack.string()));
  }
  auto profile = std::make_shared<Profile>(read_profile(cfg.stack));
  const auto signals = load_signals(cfg);
  const Interval domain = configured_domain(cfg, profile->domain());
  ModelContext ctx = context_from(cfg, domain);
  ctx.profile = profile;
  const StackConfig sc = stack_config_from(cfg, domain);
  fs::create_directories(cfg.out);

  std::vector<SignalParams> params;
  std::vector<EmResult> em;
  std::vector<std::vector<AlignmentSample>> banks;
  for (std::size_t m = 0; m < signals.size(); ++m) {
    em.push_back(run_em(signals[m], ctx, initial_params(cfg, signals[m], domain), sc.em, cfg.seed, m + 1));
    params.push_back(em.back().params);
    banks.push_back(em.back().bank);
  }
  auto prob = classify_outliers(banks, signals, params, *profile, ctx, cfg.seed, 7777);
  write_signal_outputs(cfg.out, signals, params, em, banks, prob);
  write_file(cfg.out / "alignment.svg",
             profile_svg(*profile, plot_points(signals, params, banks, prob, ctx.learn_scale), "aligned signals"));

  nlohmann::json meta = {{"command", "align"}, {"config", config_json(cfg)}, {"domain", {domain.lo, domain.hi}}};
  for (std::size_t m = 0; m < signals.size(); ++m) {
    meta["signals"][signals[m].id()] = {{"params", params_json(params[m])}, {"em", em_json(em[m])}};
  }
  write_json(cfg.out / "run_metadata.json", meta);
}

nlohmann::json stack_metadata(const RunConfig& cfg, const std::string& command, Interval domain,
                              const std::vector<Signal>& signals, const StackResult& res) {
  nlohmann::json meta = {{"command", command},
                         {"config", config_json(cfg)},
                         {"domain", {domain.lo, domain.hi}},
                         {"outer_iterations", res.iterations},
                         {"converged", res.converged},
                         {"metric_history", res.metric_history},
                         {"kernel", {{"variance", res.state.kernel.variance}, {"lengthscale", res.state.kernel.lengthscale}}},
                         {"noise", res.state.noise}};
  for (std::size_t m = 0; m < signals.size(); ++m) {
    meta["signals"][signals[m].id()] = {{"params", params_json(res.params[m])}, {"em", em_json(res.em[m])}};
  }
  return meta;
}

void write_stack_outputs(const RunConfig& cfg, const std::vector<Signal>& signals, const StackResult& res,
                         bool learn_scale) {
  write_profile(res.profile, cfg.out / "stack.csv");
  write_signal_outputs(cfg.out, signals, res.params, res.em, res.banks, res.outlier_probability);
  write_file(cfg.out / "stack.svg",
             profile_svg(res.profile, plot_points(signals, res.params, res.banks, res.outlier_probability, learn_scale),
                         "stack"));
}

std::vector<double> initial_ages(const Signal& s, Interval domain) {
  const auto& x = s.positions();
  if (domain.contains(x.front()) && domain.contains(x.back())) return x;
  std::vector<double> z(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    z[n] = domain.lo + domain.width() * (x[n] - x.front()) / (x.back() - x.front());
  }
  return z;
}

void cmd_stack(const RunConfig& cfg) {
  const auto signals = load_signals(cfg);
  Profile init;
  Interval domain;
  const StackConfig probe = stack_config_from(cfg, {-1.0, 1.0});
  ProfileState state;
  if (!cfg.stack.empty()) {
    if (!fs::exists(cfg.stack)) throw Error(ErrorCode::NoStack, "stack file not found: " + cfg.stack.string());
    init = read_profile(cfg.stack);
    domain = configured_domain(cfg, init.domain());
  } else {
    domain = configured_domain(cfg, {-1.0, 1.0});
    ModelContext ctx = context_from(cfg, domain);
    init = profile_from_ages({signals[0]}, {initial_ages(signals[0], domain)}, ctx, probe.profile, state, cfg.seed);
  }
  ModelContext ctx = context_from(cfg, domain);
  const StackConfig sc = stack_config_from(cfg, domain);
  std::vector<SignalParams> params;
  for (const auto& s : signals) params.push_back(initial_params(cfg, s, domain));
  fs::create_directories(cfg.out);
  auto res = build_stack(signals, init, params, ctx, sc, cfg.seed);
  write_stack_outputs(cfg, signals, res, ctx.learn_scale);
  write_json(cfg.out / "run_metadata.json", stack_metadata(cfg, "stack", domain, signals, res));
}

}  // namespace

SimulationReport run_simulation(const RunConfig& cfg) {
  ToySpec spec;
  spec.example = cfg.example;
  spec.interval = cfg.toy_interval;
  spec.offset = cfg.toy_offset;
  spec.noise_sd = cfg.toy_noise_sd;
  spec.outlier_fraction = cfg.toy_outlier_fraction;
  spec.signals = cfg.toy_signals;
  spec.points = cfg.toy_points;
  SimulationReport rep;
  rep.data = make_toy(spec, cfg.seed);
  const auto& d = rep.data;
  const Interval domain = d.domain;
  RunConfig run = cfg;
  // The heteroscedastic example is fitted with input-dependent noise unless told otherwise.
  if (run.heteroscedastic < 0 && run.example == 3) run.heteroscedastic = 1;
  ModelContext ctx = context_from(run, domain);
  const StackConfig sc = stack_config_from(run, domain);
  ProfileState state;
  // The initial profile stands in for an imported stack and must span the domain: the
  // first signal does, except in Example 4 where only the union of the segments does.
  const std::size_t ref = run.example == 4 ? d.signals.size() : 1;
  std::vector<Signal> ref_signals(d.signals.begin(), d.signals.begin() + ref);
  std::vector<std::vector<double>> ref_ages(d.true_ages.begin(), d.true_ages.begin() + ref);
  Profile init = profile_from_ages(ref_signals, ref_ages, ctx, sc.profile, state, cfg.seed);
  std::vector<SignalParams> params;
  for (const auto& s : d.signals) params.push_back(initial_params(run, s, domain));
  rep.stack = build_stack(d.signals, init, params, ctx, sc, cfg.seed);
  const auto& res = rep.stack;

  double ss = 0.0, cnt = 0.0;
  for (std::size_t m = 0; m < d.signals.size(); ++m) {
    rep.median_ages.push_back(median_ages(res.banks[m], d.signals[m].size()));
    std::vector<double> err;
    for (std::size_t n = 0; n < d.signals[m].size(); ++n) {
      err.push_back(rep.median_ages[m][n] - d.true_ages[m][n]);
      ss += err.back() * err.back();
      cnt += 1.0;
    }
    rep.errors.push_back(std::move(err));
    rep.aligned_span.push_back({rep.median_ages[m].front(), rep.median_ages[m].back()});
    rep.true_span.push_back({d.true_ages[m].front(), d.true_ages[m].back()});
    rep.max_span_error = std::max({rep.max_span_error, std::abs(rep.aligned_span[m].lo - rep.true_span[m].lo),
                                   std::abs(rep.aligned_span[m].hi - rep.true_span[m].hi)});
  }
  rep.rms_error = std::sqrt(ss / cnt);

  if (d.signals.size() >= 2) {
    std::vector<double> a, b;
    for (const auto& o : d.signals[0].observations()) a.push_back(o[0].value);
    for (const auto& o : d.signals[1].observations()) b.push_back(o[0].value);
    auto path = dtw(a, b);
    auto flipped = path;
    for (auto& [i, j] : flipped.path) std::swap(i, j);
    const std::vector<double> transferred[2] = {dtw_transfer_ages(flipped, d.true_ages[1], a.size()),
                                                dtw_transfer_ages(path, d.true_ages[0], b.size())};
    std::vector<std::tuple<double, std::size_t, double>> rows;
    for (std::size_t m = 0; m < 2; ++m) {
      for (std::size_t n = 0; n < transferred[m].size(); ++n) {
        rows.emplace_back(d.true_ages[m][n], m, transferred[m][n] - d.true_ages[m][n]);
      }
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& x, const auto& y) { return std::get<0>(x) < std::get<0>(y); });
    for (const auto& [age, m, e] : rows) {
      rep.dtw_true_ages.push_back(age);
      rep.dtw_signal.push_back(m);
      rep.dtw_errors.push_back(e);
      rep.dtw_max_abs = std::max(rep.dtw_max_abs, std::abs(e));
    }
  }

  // Standardized residuals of clean data and outlier flag rates.
  double planted = 0, planted_flags = 0, clean = 0, clean_flags = 0;
  for (std::size_t m = 0; m < d.signals.size(); ++m) {
    for (std::size_t n = 0; n < d.signals[m].size(); ++n) {
      const bool is_planted = d.planted_outlier[m][n] != 0;
      double flags = 0.0;
      for (const auto& s : res.banks[m]) flags += s.outlier_flags.empty() ? 0.0 : s.outlier_flags[n];
      flags /= static_cast<double>(res.banks[m].size());
      (is_planted ? planted : clean) += 1.0;
      (is_planted ? planted_flags : clean_flags) += flags;
      if (is_planted) continue;
      const double z = rep.median_ages[m][n];
      const double y = to_stack_units(d.signals[m].observations()[n][0].value, res.params[m].emission, ctx.learn_scale);
      rep.residuals.push_back((y - res.profile.mean(z)) / std::sqrt(res.profile.variance(z)));
    }
  }
  if (planted > 0) rep.planted_flag_rate = planted_flags / planted;
  if (clean > 0) rep.clean_flag_rate = clean_flags / clean;
  if (rep.residuals.size() >= 2) rep.residual_ks_p = ks_standard_normal(rep.residuals).p_value;

  if (!d.held_out_ages.empty()) {
    double inside = 0.0;
    for (std::size_t i = 0; i < d.held_out_ages.size(); ++i) {
      const double z = d.held_out_ages[i];
      const double sd = std::sqrt(res.profile.variance(z));
      if (std::abs(d.held_out_values[i] - res.profile.mean(z)) <= 1.959963984540054 * sd) inside += 1.0;
    }
    rep.coverage95 = inside / static_cast<double>(d.held_out_ages.size());
    if (res.profile.has_noise()) {
      std::vector<double> inferred, truth;
      for (double z : res.profile.grid()) {
        inferred.push_back(res.profile.noise(z));
        truth.push_back(d.noise_sd(z) * d.noise_sd(z));
      }
      rep.noise_spearman = spearman(inferred, truth);
    }
  }
  return rep;
}

namespace {

void cmd_simulate(const RunConfig& cfg) {
  fs::create_directories(cfg.out / "signals");
  auto rep = run_simulation(cfg);
  const auto& d = rep.data;
  for (const auto& s : d.signals) write_signal(s, cfg.out / "signals" / (s.id() + ".csv"));
  ModelContext ctx = context_from(cfg, d.domain);
  write_stack_outputs(cfg, d.signals, rep.stack, ctx.learn_scale);

  std::string errs = "signal_id,depth,true_age,median_age,error\n";
  std::vector<std::vector<double>> ex, ey;
  std::vector<std::string> labels;
  for (std::size_t m = 0; m < d.signals.size(); ++m) {
    for (std::size_t n = 0; n < d.signals[m].size(); ++n) {
      errs += d.signals[m].id() + "," + format_number(d.signals[m].positions()[n]) + "," +
              format_number(d.true_ages[m][n]) + "," + format_number(rep.median_ages[m][n]) + "," +
              format_number(rep.errors[m][n]) + "\n";
    }
    ex.push_back(d.true_ages[m]);
    ey.push_back(rep.errors[m]);
    labels.push_back("SA-GPR " + d.signals[m].id());
  }
  write_file(cfg.out / "alignment_errors.csv", errs);
  if (!rep.dtw_errors.empty()) {
    std::string t = "signal_id,true_age,dtw_error\n";
    for (std::size_t j = 0; j < rep.dtw_errors.size(); ++j) {
      t += d.signals[rep.dtw_signal[j]].id() + "," + format_number(rep.dtw_true_ages[j]) + "," +
           format_number(rep.dtw_errors[j]) + "\n";
    }
    write_file(cfg.out / "dtw_errors.csv", t);
    ex.push_back(rep.dtw_true_ages);
    ey.push_back(rep.dtw_errors);
    labels.push_back("DTW (symmetric1)");
  }
  write_file(cfg.out / "errors.svg", series_svg(ex, ey, labels, "alignment error vs true age"));

  auto finite = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json metrics = {{"example", cfg.example},
                            {"rms_error", rep.rms_error},
                            {"dtw_max_abs_error", rep.dtw_errors.empty() ? nlohmann::json(nullptr) : nlohmann::json(rep.dtw_max_abs)},
                            {"coverage95", finite(rep.coverage95)},
                            {"noise_spearman", finite(rep.noise_spearman)},
                            {"max_span_error", rep.max_span_error},
                            {"residual_ks_p", finite(rep.residual_ks_p)},
                            {"planted_flag_rate", finite(rep.planted_flag_rate)},
                            {"clean_flag_rate", finite(rep.clean_flag_rate)}};
  write_json(cfg.out / "metrics.json", metrics);
  auto meta = stack_metadata(cfg, "simulate", d.domain, d.signals, rep.stack);
  meta["metrics"] = metrics;
  write_json(cfg.out / "run_metadata.json", meta);
}

int exit_with(const fs::path& out, const std::string& code, std::string message, int status) {
  if (message.starts_with(code + ": ")) message.erase(0, code.size() + 2);
  std::cerr << "error: " << code << ": " << message << "\n";
  try {
    fs::create_directories(out);
    write_file(out / "error.json", error_record(code, message).dump(2) + "\n");
  } catch (...) {
  }
  return status;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
  spdlog::cfg::load_env_levels();
  CLI::App app{"Profile-based probabilistic alignment and stacking of signals"};
  app.require_subcommand(1);
  std::string config_path, stack_path, out_dir, calibration;
  std::vector<std::string> signal_paths;
  std::uint64_t seed = 0;
  int threads = -1, example = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads (0 = all cores)");
  };
  auto* align = app.add_subcommand("align", "align signals to a fixed stack");
  add_common(align);
  align->add_option("--stack", stack_path, "stack file (age,mean,sigma)");
  align->add_option("--signals", signal_paths, "signal files");
  align->add_option("--calibration", calibration, "radiocarbon calibration curve");
  auto* stack = app.add_subcommand("stack", "build a stack from signals");
  add_common(stack);
  stack->add_option("--stack", stack_path, "initial stack");
  stack->add_option("--signals", signal_paths, "signal files");
  stack->add_option("--calibration", calibration, "radiocarbon calibration curve");
  auto* sim = app.add_subcommand("simulate", "run a synthetic example");
  add_common(sim);
  sim->add_option("--example", example, "example id (1-5)")->check(CLI::Range(1, 5));

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  fs::path out = "out";
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;
    return exit_with(out, "E_USAGE", e.what(), 2);
  }

  if (!out_dir.empty()) out = out_dir;
  try {
    RunConfig cfg;
    cfg.mode = align->parsed() ? Mode::Align : stack->parsed() ? Mode::Stack : Mode::Simulate;
    if (!config_path.empty()) cfg = parse_config_file(config_path, cfg);
    cfg.mode = align->parsed() ? Mode::Align : stack->parsed() ? Mode::Stack : Mode::Simulate;
    if (seed != 0) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    out = cfg.out;
    if (threads >= 0) cfg.threads = threads;
    if (!stack_path.empty()) cfg.stack = stack_path;
    if (!calibration.empty()) cfg.calibration = calibration;
    if (!signal_paths.empty()) cfg.signals.assign(signal_paths.begin(), signal_paths.end());
    if (example != 0) cfg.example = example;
    cfg.validate();
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
    switch (cfg.mode) {
      case Mode::Align: cmd_align(cfg); break;
      case Mode::Stack: cmd_stack(cfg); break;
      case Mode::Simulate: cmd_simulate(cfg); break;
    }
  } catch (const Error& e) {
    return exit_with(out, std::string(error_code_name(e.code())), e.what(), is_numeric_failure(e.code()) ? 3 : 2);
  } catch (const std::exception& e) {
    return exit_with(out, "E_INTERNAL", e.what(), 3);
  }
  return 0;
}

}  // namespace sagpr
