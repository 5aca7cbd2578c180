#include "sagpr/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "sagpr/errors.hpp"

namespace sagpr {

ProxyDatum ProxyDatum::d18o(double value) {
  return ProxyDatum{ProxyKind::D18O, value, 0.0, 0.0};
}

ProxyDatum ProxyDatum::radiocarbon(double age, double reservoir_offset, double extra_variance) {
  if (!(extra_variance >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "radiocarbon extra variance must be >= 0");
  }
  return ProxyDatum{ProxyKind::Radiocarbon, age, reservoir_offset, extra_variance};
}

Signal::Signal(std::string id, std::vector<double> positions, std::vector<std::vector<ProxyDatum>> data)
    : id_(std::move(id)), positions_(std::move(positions)), data_(std::move(data)) {
  if (positions_.size() != data_.size()) {
    throw Error(ErrorCode::InvalidArgument, "signal " + id_ + ": positions and data differ in length");
  }
  if (positions_.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "signal " + id_ + ": needs at least 2 positions");
  }
  for (std::size_t n = 0; n < positions_.size(); ++n) {
    if (!std::isfinite(positions_[n])) {
      throw Error(ErrorCode::InvalidArgument, "signal " + id_ + ": non-finite position");
    }
    if (n > 0 && !(positions_[n] > positions_[n - 1])) {
      throw Error(ErrorCode::NonMonotoneDepth, "signal " + id_ + ": positions not strictly increasing");
    }
    if (data_[n].empty()) {
      throw Error(ErrorCode::InvalidArgument, "signal " + id_ + ": position without data");
    }
    for (const auto& d : data_[n]) {
      if (!std::isfinite(d.value) || !(d.extra_variance >= 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "signal " + id_ + ": invalid datum");
      }
    }
  }
}

std::size_t Signal::count(ProxyKind kind) const {
  std::size_t c = 0;
  for (const auto& row : data_) {
    for (const auto& d : row) c += d.kind == kind;
  }
  return c;
}

void FixedHyperparams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(a1) || !positive(b1) || !positive(a2) || !positive(b2) || !positive(sigma_bar) ||
      !positive(alpha_bar) || !positive(beta_bar) || !positive(p_bar) || !positive(q_bar) ||
      !positive(r_bar) || !positive(s_bar)) {
    throw Error(ErrorCode::InvalidArgument, "fixed hyperparameters must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "delta must lie in (0,1)");
  }
  if (!(cae_lower > 0.0 && cae_upper > cae_lower && std::isfinite(cae_upper))) {
    throw Error(ErrorCode::InvalidArgument, "C/A/E boundaries must satisfy 0 < lower < upper");
  }
}

CalibrationCurve::CalibrationCurve(std::vector<double> calendar_ages, std::vector<double> mu,
                                   std::vector<double> sigma)
    : ages_(std::move(calendar_ages)), mu_(std::move(mu)), sigma_(std::move(sigma)) {
  if (ages_.size() != mu_.size() || ages_.size() != sigma_.size() || ages_.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "calibration curve needs >= 2 rows of equal length");
  }
  for (std::size_t i = 1; i < ages_.size(); ++i) {
    if (!(ages_[i] > ages_[i - 1])) {
      throw Error(ErrorCode::NonMonotoneAges, "calibration ages not strictly increasing");
    }
  }
  for (double s : sigma_) {
    if (!(s > 0.0)) throw Error(ErrorCode::NonPositiveSigma, "calibration sigma must be > 0");
  }
}

CalibrationCurve::Point CalibrationCurve::at(double z) const {
  if (!(z >= ages_.front() && z <= ages_.back())) {
    throw Error(ErrorCode::DomainError, "calendar age outside calibration curve");
  }
  auto it = std::upper_bound(ages_.begin(), ages_.end(), z);
  std::size_t i = it == ages_.end() ? ages_.size() - 2 : static_cast<std::size_t>(it - ages_.begin()) - 1;
  double t = (z - ages_[i]) / (ages_[i + 1] - ages_[i]);
  return {mu_[i] + t * (mu_[i + 1] - mu_[i]), sigma_[i] + t * (sigma_[i + 1] - sigma_[i])};
}

std::vector<AlignmentViolation> validate_alignment(const AlignmentSample& sample, Interval domain) {
  std::vector<AlignmentViolation> out;
  const auto& z = sample.values;
  for (std::size_t n = 0; n < z.size(); ++n) {
    if (n > 0 && !(z[n] > z[n - 1])) out.push_back({n + 1, Violation::NonIncreasing});
    if (!domain.contains(z[n])) out.push_back({n + 1, Violation::OutOfDomain});
  }
  return out;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    auto b = f.find_first_not_of(" \t");
    auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return out;
}

char detect_delimiter(const std::string& header) {
  return header.find('\t') != std::string::npos ? '\t' : ',';
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_missing(const std::string& cell) {
  auto l = lower(cell);
  return l.empty() || l == "na" || l == "nan" || l == "null";
}

double parse_number(const std::string& cell, std::size_t line_no) {
  double v = 0.0;
  const char* b = cell.data();
  const char* e = b + cell.size();
  if (!cell.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e || !std::isfinite(v)) {
    throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": not a number: '" + cell + "'");
  }
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

Table read_table(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  char delim = ',';
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[line.find_first_not_of(" \t")] == '#') continue;
    if (t.header.empty()) {
      delim = detect_delimiter(line);
      for (auto& h : split_fields(line, delim)) t.header.push_back(lower(h));
      continue;
    }
    auto fields = split_fields(line, delim);
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": expected " +
                                               std::to_string(t.header.size()) + " fields");
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw Error(ErrorCode::MissingColumn, "empty file, no header");
  return t;
}

std::optional<std::size_t> column(const Table& t, const std::string& name) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - t.header.begin());
}

}  // namespace

Signal parse_signal_text(const std::string& text, const std::string& id) {
  Table t = read_table(text);
  auto depth_col = column(t, "depth");
  if (!depth_col) throw Error(ErrorCode::MissingColumn, "signal " + id + ": no depth column");
  auto d18o_col = column(t, "d18o");
  auto c14_col = column(t, "c14_age");
  auto c14_err_col = column(t, "c14_error");
  auto res_col = column(t, "reservoir_offset");
  auto res_err_col = column(t, "reservoir_error");

  struct Row {
    double depth;
    std::vector<ProxyDatum> data;
    std::size_t order;
  };
  std::vector<Row> rows;
  std::map<std::vector<std::string>, std::size_t> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    const std::size_t ln = t.line_numbers[r];
    auto [it, fresh] = seen.emplace(f, ln);
    if (!fresh) {
      throw Error(ErrorCode::NonMonotoneDepth, "signal " + id + ": line " + std::to_string(ln) +
                                                   " duplicates line " + std::to_string(it->second));
    }
    auto opt = [&](std::optional<std::size_t> c) -> std::optional<double> {
      if (!c || is_missing(f[*c])) return std::nullopt;
      return parse_number(f[*c], ln);
    };
    if (is_missing(f[*depth_col])) throw Error(ErrorCode::MalformedRow, "line " + std::to_string(ln) + ": missing depth");
    Row row{parse_number(f[*depth_col], ln), {}, r};
    if (auto v = opt(d18o_col)) row.data.push_back(ProxyDatum::d18o(*v));
    if (auto v = opt(c14_col)) {
      double err = opt(c14_err_col).value_or(0.0);
      double res = opt(res_col).value_or(0.0);
      double res_err = opt(res_err_col).value_or(0.0);
      row.data.push_back(ProxyDatum::radiocarbon(*v, res, err * err + res_err * res_err));
    }
    if (!row.data.empty()) rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.depth < b.depth; });

  std::vector<double> positions;
  std::vector<std::vector<ProxyDatum>> data;
  for (auto& row : rows) {
    if (!positions.empty() && positions.back() == row.depth) {
      data.back().insert(data.back().end(), row.data.begin(), row.data.end());
    } else {
      positions.push_back(row.depth);
      data.push_back(std::move(row.data));
    }
  }
  return Signal(id, std::move(positions), std::move(data));
}

Signal parse_signal(const std::filesystem::path& path) {
  return parse_signal_text(read_file(path), path.stem().string());
}

std::string signal_to_text(const Signal& s) {
  std::string out = "depth,d18o,c14_age,c14_error,reservoir_offset,reservoir_error\n";
  for (std::size_t n = 0; n < s.size(); ++n) {
    const std::string depth = format_number(s.positions()[n]);
    for (const auto& d : s.observations()[n]) {
      if (d.kind == ProxyKind::D18O) {
        out += depth + "," + format_number(d.value) + ",,,,\n";
      } else {
        out += depth + ",," + format_number(d.value) + "," + format_number(std::sqrt(d.extra_variance)) + "," +
               format_number(d.reservoir_offset) + ",0\n";
      }
    }
  }
  return out;
}

void write_signal(const Signal& signal, const std::filesystem::path& path) {
  write_file(path, signal_to_text(signal));
}

CalibrationCurve parse_calibration_text(const std::string& text) {
  Table t = read_table(text);
  auto age_col = column(t, "cal_age");
  double scale = 1e-3;
  if (!age_col) {
    age_col = column(t, "cal_age_kyr");
    scale = 1.0;
  }
  auto mu_col = column(t, "c14_mean");
  auto sd_col = column(t, "c14_sigma");
  if (!age_col || !mu_col || !sd_col) {
    throw Error(ErrorCode::MissingColumn, "calibration curve needs cal_age,c14_mean,c14_sigma");
  }
  std::vector<double> ages, mu, sd;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& f = t.rows[r];
    ages.push_back(parse_number(f[*age_col], t.line_numbers[r]) * scale);
    mu.push_back(parse_number(f[*mu_col], t.line_numbers[r]));
    sd.push_back(parse_number(f[*sd_col], t.line_numbers[r]));
  }
  // Published curves are often listed oldest first.
  if (ages.size() >= 2 && ages.front() > ages.back()) {
    std::reverse(ages.begin(), ages.end());
    std::reverse(mu.begin(), mu.end());
    std::reverse(sd.begin(), sd.end());
  }
  return CalibrationCurve(std::move(ages), std::move(mu), std::move(sd));
}

CalibrationCurve parse_calibration_curve(const std::filesystem::path& path) {
  return parse_calibration_text(read_file(path));
}

}  // namespace sagpr
