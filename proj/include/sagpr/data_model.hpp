#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sagpr {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  bool contains(double z) const { return z >= lo && z <= hi; }
};

enum class ProxyKind { D18O, Radiocarbon };

struct ProxyDatum {
  ProxyKind kind = ProxyKind::D18O;
  double value = 0.0;
  double reservoir_offset = 0.0;  // 14C yr, radiocarbon only
  double extra_variance = 0.0;    // 14C yr^2, radiocarbon only

  static ProxyDatum d18o(double value);
  static ProxyDatum radiocarbon(double age, double reservoir_offset, double extra_variance);

  bool operator==(const ProxyDatum&) const = default;
};

class Signal {
 public:
  Signal() = default;
  // Validates: positions strictly increasing, N >= 2, every position has data.
  Signal(std::string id, std::vector<double> positions, std::vector<std::vector<ProxyDatum>> data);

  const std::string& id() const { return id_; }
  const std::vector<double>& positions() const { return positions_; }
  const std::vector<std::vector<ProxyDatum>>& observations() const { return data_; }
  std::size_t size() const { return positions_.size(); }

  std::size_t count(ProxyKind kind) const;

  bool operator==(const Signal&) const = default;

 private:
  std::string id_;
  std::vector<double> positions_;
  std::vector<std::vector<ProxyDatum>> data_;
};

struct AlignmentSample {
  std::vector<double> values;
  std::vector<std::uint8_t> outlier_flags;
  // Per-position C/A/E regime (0,1,2); empty for models without regimes.
  std::vector<int> regimes;
  double log_posterior = 0.0;
};

struct FixedHyperparams {
  double a1 = 3.0, b1 = 4.0;
  double a2 = 3.0, b2 = 4.0;
  double h_bar = 0.0, sigma_bar = 1.0;
  double alpha_bar = 1.0, beta_bar = 1.0;
  double p_bar = 1.0, q_bar = 5.0, r_bar = 5.0, s_bar = 5.0;
  double delta = 0.05;
  // I_C = (0, cae_lower), I_A = [cae_lower, cae_upper), I_E = [cae_upper, inf)
  double cae_lower = 0.9220;
  double cae_upper = 1.0850;

  void validate() const;
};

class CalibrationCurve {
 public:
  struct Point {
    double mean;
    double sigma;
  };

  CalibrationCurve() = default;
  CalibrationCurve(std::vector<double> calendar_ages, std::vector<double> mu, std::vector<double> sigma);

  Interval range() const { return {ages_.front(), ages_.back()}; }
  // Piecewise-linear interpolation; DomainError outside range().
  Point at(double calendar_age) const;

  const std::vector<double>& calendar_ages() const { return ages_; }
  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& sigma() const { return sigma_; }

 private:
  std::vector<double> ages_, mu_, sigma_;
};

enum class Violation { NonIncreasing, OutOfDomain };

struct AlignmentViolation {
  std::size_t index;  // 1-based position index
  Violation kind;
};

std::vector<AlignmentViolation> validate_alignment(const AlignmentSample& sample, Interval domain);

// Delimiter is autodetected (tab if the header contains one, else comma).
Signal parse_signal(const std::filesystem::path& path);
Signal parse_signal_text(const std::string& text, const std::string& id);
std::string signal_to_text(const Signal& signal);
void write_signal(const Signal& signal, const std::filesystem::path& path);

// Header `cal_age` is read as cal yr BP and converted to kyr; `cal_age_kyr` is taken as is.
CalibrationCurve parse_calibration_curve(const std::filesystem::path& path);
CalibrationCurve parse_calibration_text(const std::string& text);

// Shared plumbing for the delimited formats.
std::string format_number(double v);
std::vector<std::string> split_fields(const std::string& line, char delim);
char detect_delimiter(const std::string& header);
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace sagpr
