#include "sagpr/config.hpp"

#include <charconv>
#include <functional>
#include <map>

#include "sagpr/errors.hpp"

namespace sagpr {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (...) {
  }
  throw Error(ErrorCode::ConfigError, "key '" + key + "': not a number: " + v);
}

std::uint64_t to_count(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(ErrorCode::ConfigError, "key '" + key + "': not a nonnegative integer: " + v);
  }
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::ConfigError, "key '" + key + "': not a boolean: " + v);
}

int to_tristate(const std::string& key, const std::string& v) {
  if (v == "auto") return -1;
  return to_bool(key, v) ? 1 : 0;
}

std::string tristate(int v) { return v < 0 ? "auto" : (v ? "true" : "false"); }

std::string num(double v) { return format_number(v); }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SAGPR_DOUBLE(name, member)                                                                   \
  {name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
          [](const RunConfig& c) { return num(c.member); }}}
#define SAGPR_COUNT(name, member)                                                                   \
  {name, {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_count(k, v); }, \
          [](const RunConfig& c) { return std::to_string(c.member); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"mode",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "align") c.mode = Mode::Align;
          else if (v == "stack") c.mode = Mode::Stack;
          else if (v == "simulate") c.mode = Mode::Simulate;
          else throw Error(ErrorCode::ConfigError, "key '" + k + "': unknown mode " + v);
        },
        [](const RunConfig& c) {
          return std::string(c.mode == Mode::Align ? "align" : c.mode == Mode::Stack ? "stack" : "simulate");
        }}},
      SAGPR_COUNT("seed", seed),
      SAGPR_COUNT("particles", particles),
      SAGPR_COUNT("samples", samples),
      SAGPR_COUNT("mh_sweeps", sweeps),
      SAGPR_COUNT("max_em_iters", max_em_iters),
      SAGPR_COUNT("max_outer_iters", max_outer_iters),
      SAGPR_DOUBLE("em_tolerance", em_tolerance),
      SAGPR_DOUBLE("outer_tolerance", outer_tolerance),
      SAGPR_DOUBLE("bandwidth", bandwidth),
      {"retries",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.retries = static_cast<int>(to_count(k, v)); },
        [](const RunConfig& c) { return std::to_string(c.retries); }}},
      SAGPR_COUNT("pseudo_inputs", pseudo_inputs),
      SAGPR_COUNT("tune_samples", tune_samples),
      SAGPR_COUNT("outlier_rounds", outlier_rounds),
      SAGPR_COUNT("grid_points", grid_points),
      {"kernel",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "ou") c.kernel = KernelKind::OrnsteinUhlenbeck;
          else if (v == "se") c.kernel = KernelKind::SquaredExponential;
          else throw Error(ErrorCode::ConfigError, "key '" + k + "': expected ou or se");
        },
        [](const RunConfig& c) { return std::string(c.kernel == KernelKind::OrnsteinUhlenbeck ? "ou" : "se"); }}},
      SAGPR_DOUBLE("kernel_variance", kernel_variance),
      SAGPR_DOUBLE("kernel_lengthscale", kernel_lengthscale),
      SAGPR_DOUBLE("noise_init", noise_init),
      {"heteroscedastic",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.heteroscedastic = to_tristate(k, v); },
        [](const RunConfig& c) { return tristate(c.heteroscedastic); }}},
      {"transition",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "gamma") c.transition = TransitionKind::Gamma;
          else if (v == "cae") c.transition = TransitionKind::Cae;
          else if (v == "walk") c.transition = TransitionKind::GaussianWalk;
          else throw Error(ErrorCode::ConfigError, "key '" + k + "': expected gamma, cae or walk");
        },
        [](const RunConfig& c) {
          return std::string(c.transition == TransitionKind::Gamma ? "gamma"
                             : c.transition == TransitionKind::Cae ? "cae"
                                                                   : "walk");
        }}},
      {"learn_scale",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.learn_scale = to_tristate(k, v); },
        [](const RunConfig& c) { return tristate(c.learn_scale); }}},
      {"classify_outliers",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.classify_outliers = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.classify_outliers ? "true" : "false"); }}},
      {"learn_emission",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.learn_emission = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.learn_emission ? "true" : "false"); }}},
      {"learn_transition",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.learn_transition = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.learn_transition ? "true" : "false"); }}},
      {"learn_depth_scale",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.learn_depth_scale = to_bool(k, v); },
        [](const RunConfig& c) { return std::string(c.learn_depth_scale ? "true" : "false"); }}},
      SAGPR_DOUBLE("alpha_init", alpha_init),
      SAGPR_DOUBLE("beta_init", beta_init),
      SAGPR_DOUBLE("r_init", r_init),
      SAGPR_DOUBLE("domain_lo", domain_lo),
      SAGPR_DOUBLE("domain_hi", domain_hi),
      SAGPR_DOUBLE("a1", fixed.a1),
      SAGPR_DOUBLE("b1", fixed.b1),
      SAGPR_DOUBLE("a2", fixed.a2),
      SAGPR_DOUBLE("b2", fixed.b2),
      SAGPR_DOUBLE("h_bar", fixed.h_bar),
      SAGPR_DOUBLE("sigma_bar", fixed.sigma_bar),
      SAGPR_DOUBLE("alpha_bar", fixed.alpha_bar),
      SAGPR_DOUBLE("beta_bar", fixed.beta_bar),
      SAGPR_DOUBLE("p_bar", fixed.p_bar),
      SAGPR_DOUBLE("q_bar", fixed.q_bar),
      SAGPR_DOUBLE("r_bar", fixed.r_bar),
      SAGPR_DOUBLE("s_bar", fixed.s_bar),
      SAGPR_DOUBLE("delta", fixed.delta),
      SAGPR_DOUBLE("cae_lower", fixed.cae_lower),
      SAGPR_DOUBLE("cae_upper", fixed.cae_upper),
      {"stack",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.stack = v; },
        [](const RunConfig& c) { return c.stack.string(); }}},
      {"calibration",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.calibration = v; },
        [](const RunConfig& c) { return c.calibration.string(); }}},
      {"out",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
        [](const RunConfig& c) { return c.out.string(); }}},
      {"signals",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.signals.clear();
          std::size_t a = 0;
          while (a <= v.size()) {
            auto b = v.find(',', a);
            if (b == std::string::npos) b = v.size();
            auto item = trim(v.substr(a, b - a));
            if (!item.empty()) c.signals.emplace_back(item);
            a = b + 1;
          }
        },
        [](const RunConfig& c) {
          std::string s;
          for (const auto& p : c.signals) s += (s.empty() ? "" : ",") + p.string();
          return s;
        }}},
      {"threads",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.threads = static_cast<int>(to_count(k, v)); },
        [](const RunConfig& c) { return std::to_string(c.threads); }}},
      {"example",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.example = static_cast<int>(to_count(k, v)); },
        [](const RunConfig& c) { return std::to_string(c.example); }}},
      SAGPR_DOUBLE("toy_interval", toy_interval),
      SAGPR_DOUBLE("toy_offset", toy_offset),
      SAGPR_DOUBLE("toy_noise_sd", toy_noise_sd),
      SAGPR_DOUBLE("toy_outlier_fraction", toy_outlier_fraction),
      SAGPR_COUNT("toy_signals", toy_signals),
      SAGPR_COUNT("toy_points", toy_points),
  };
  return table;
}

#undef SAGPR_DOUBLE
#undef SAGPR_COUNT

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, f] : fields()) {
    if (name == key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, f] : fields()) out.emplace_back(name, f.get(cfg));
  return out;
}

RunConfig parse_config_text(const std::string& text, RunConfig cfg) {
  std::size_t start = 0, line_no = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string line = text.substr(start, end - start);
    start = end + 1;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path, RunConfig base) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::ConfigError, "config file not found: " + path.string());
  return parse_config_text(read_file(path), std::move(base));
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  if (particles < 1 || samples < 1 || sweeps < 1 || pseudo_inputs < 1 || tune_samples < 1) {
    fail("particles, samples, mh_sweeps, pseudo_inputs and tune_samples must be >= 1");
  }
  if (max_outer_iters < 1) fail("max_outer_iters must be >= 1");
  if (bandwidth < 0.0) fail("bandwidth must be positive");
  if (grid_points < 2) fail("grid_points must be >= 2");
  if (!(alpha_init > 0) || !(beta_init > 0)) fail("alpha_init and beta_init must be positive");
  if (domain_hi < domain_lo) fail("domain_hi must not be below domain_lo");
  fixed.validate();
}

}  // namespace sagpr
