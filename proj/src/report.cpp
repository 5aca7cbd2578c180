#include "sagpr/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "sagpr/stats.hpp"

namespace sagpr {

std::string samples_to_text(const Signal& signal, const std::vector<AlignmentSample>& bank) {
  std::string out = "signal_id,l,depth,age,outlier_flag,log_post\n";
  for (std::size_t l = 0; l < bank.size(); ++l) {
    const auto& s = bank[l];
    for (std::size_t n = 0; n < signal.size(); ++n) {
      const int flag = n < s.outlier_flags.size() ? s.outlier_flags[n] : 0;
      out += fmt::format("{},{},{},{},{},{}\n", signal.id(), l + 1, format_number(signal.positions()[n]),
                         format_number(s.values[n]), flag, format_number(s.log_posterior));
    }
  }
  return out;
}

std::vector<PositionSummary> summarize(const Signal& signal, const std::vector<AlignmentSample>& bank,
                                       const std::vector<double>& outlier_probability) {
  std::vector<PositionSummary> rows;
  std::vector<double> v(bank.size());
  for (std::size_t n = 0; n < signal.size(); ++n) {
    for (std::size_t l = 0; l < bank.size(); ++l) v[l] = bank[l].values[n];
    const double p = n < outlier_probability.size() ? outlier_probability[n] : 0.0;
    rows.push_back({signal.positions()[n], median(v), quantile(v, 0.025), quantile(v, 0.975), p});
  }
  return rows;
}

std::string summary_to_text(const std::vector<PositionSummary>& rows) {
  std::string out = "depth,median,q025,q975,outlier_prob\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{}\n", format_number(r.depth), format_number(r.median), format_number(r.lower),
                       format_number(r.upper), format_number(r.outlier_probability));
  }
  return out;
}

std::string params_header() {
  return "signal_id,h,sigma,r,alpha,beta,phi_CC,phi_CA,phi_CE,phi_AC,phi_AA,phi_AE,phi_EC,phi_EA,phi_EE,"
         "drift,walk_sd,q_final\n";
}

std::string params_row(const std::string& id, const SignalParams& p, double q_final) {
  const auto& t = p.transition;
  std::string out = fmt::format("{},{},{},{}", id, format_number(p.emission.shift), format_number(p.emission.scale),
                                t.kind == TransitionKind::GaussianWalk ? "" : format_number(t.depth_scale()));
  if (t.kind == TransitionKind::Gamma) {
    out += "," + format_number(t.gamma.alpha) + "," + format_number(t.gamma.beta);
  } else if (t.kind == TransitionKind::Cae) {
    out += "," + format_number(t.cae.shape) + "," + format_number(t.cae.rate);
  } else {
    out += ",,";
  }
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) out += "," + (t.kind == TransitionKind::Cae ? format_number(t.cae.phi[a][b]) : "");
  }
  if (t.kind == TransitionKind::GaussianWalk) {
    out += "," + format_number(t.walk.drift) + "," + format_number(t.walk.sd);
  } else {
    out += ",,";
  }
  out += "," + format_number(q_final) + "\n";
  return out;
}

namespace {

struct Frame {
  double x0, x1, y0, y1;
  double W = 800, H = 400, margin = 50;
  double px(double x) const { return margin + (x - x0) / (x1 - x0) * (W - 2 * margin); }
  double py(double y) const { return H - margin - (y - y0) / (y1 - y0) * (H - 2 * margin); }
};

std::string header(const Frame& f, const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n"
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n"
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n"
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{}</text>\n"
      "<text x=\"5\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n"
      "<text x=\"5\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
      f.W, f.H, f.W, f.H, f.margin, title, f.margin, f.margin, f.W - 2 * f.margin, f.H - 2 * f.margin, f.margin,
      f.H - f.margin + 15, format_number(f.x0), f.W - f.margin, f.H - f.margin + 15, format_number(f.x1),
      f.H - f.margin, format_number(f.y0), f.margin + 5, format_number(f.y1));
}

std::string polygon(const Frame& f, const std::vector<double>& x, const std::vector<double>& lo,
                    const std::vector<double>& hi, const std::string& fill) {
  std::string pts;
  for (std::size_t i = 0; i < x.size(); ++i) pts += fmt::format("{:.2f},{:.2f} ", f.px(x[i]), f.py(hi[i]));
  for (std::size_t i = x.size(); i-- > 0;) pts += fmt::format("{:.2f},{:.2f} ", f.px(x[i]), f.py(lo[i]));
  return fmt::format("<polygon points=\"{}\" fill=\"{}\" stroke=\"none\"/>\n", pts, fill);
}

std::string polyline(const Frame& f, const std::vector<double>& x, const std::vector<double>& y,
                     const std::string& colour) {
  std::string pts;
  for (std::size_t i = 0; i < x.size(); ++i) pts += fmt::format("{:.2f},{:.2f} ", f.px(x[i]), f.py(y[i]));
  return fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", pts, colour);
}

// Thinned copy of a dense series for drawing; the comment keeps every value.
std::vector<std::size_t> thin(std::size_t n, std::size_t max_points = 600) {
  std::vector<std::size_t> idx;
  const std::size_t step = std::max<std::size_t>(1, n / max_points);
  for (std::size_t i = 0; i < n; i += step) idx.push_back(i);
  if (!idx.empty() && idx.back() != n - 1) idx.push_back(n - 1);
  return idx;
}

const char* kColours[] = {"#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22"};

}  // namespace

std::string profile_svg(const Profile& profile, const std::vector<PlotPoints>& points, const std::string& title) {
  const auto& g = profile.grid();
  const auto idx = thin(g.size());
  std::vector<double> x, m, s1l, s1h, s2l, s2h;
  double ylo = INFINITY, yhi = -INFINITY;
  for (auto i : idx) {
    const double mu = profile.mean_values()[i], sd = std::sqrt(profile.variance_values()[i]);
    x.push_back(g[i]);
    m.push_back(mu);
    s1l.push_back(mu - sd);
    s1h.push_back(mu + sd);
    s2l.push_back(mu - 2 * sd);
    s2h.push_back(mu + 2 * sd);
    ylo = std::min(ylo, mu - 2 * sd);
    yhi = std::max(yhi, mu + 2 * sd);
  }
  bool any_outlier = false;
  for (const auto& p : points) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      ylo = std::min(ylo, p.value[i]);
      yhi = std::max(yhi, p.value[i]);
      if (i < p.outlier.size() && p.outlier[i]) any_outlier = true;
    }
  }
  Frame f{g.front(), g.back(), ylo, yhi};
  if (!(f.y1 > f.y0)) {
    f.y0 -= 1.0;
    f.y1 += 1.0;
  }
  std::string out = header(f, title);
  out += "<!-- series stack: age,mean,sigma\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    out += format_number(g[i]) + "," + format_number(profile.mean_values()[i]) + "," +
           format_number(std::sqrt(profile.variance_values()[i])) + "\n";
  }
  out += "-->\n";
  out += "<g id=\"band\">\n" + polygon(f, x, s2l, s2h, "#cfe2f3") + polygon(f, x, s1l, s1h, "#9fc5e8") +
         polyline(f, x, m, "#0b5394") + "</g>\n";
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    out += fmt::format("<!-- series points{}: age,value,outlier\n", k + 1);
    for (std::size_t i = 0; i < p.age.size(); ++i) {
      out += format_number(p.age[i]) + "," + format_number(p.value[i]) + "," +
             std::to_string(i < p.outlier.size() ? p.outlier[i] : 0) + "\n";
    }
    out += "-->\n";
    out += fmt::format("<g id=\"points{}\" fill=\"{}\">\n", k + 1, kColours[k % 8]);
    for (std::size_t i = 0; i < p.age.size(); ++i) {
      if (i < p.outlier.size() && p.outlier[i]) continue;
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\"/>\n", f.px(p.age[i]), f.py(p.value[i]));
    }
    out += "</g>\n";
  }
  if (any_outlier) {
    out += "<g id=\"outliers\" fill=\"none\" stroke=\"red\">\n";
    for (const auto& p : points) {
      for (std::size_t i = 0; i < p.age.size(); ++i) {
        if (i < p.outlier.size() && p.outlier[i]) {
          out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\"/>\n", f.px(p.age[i]), f.py(p.value[i]));
        }
      }
    }
    out += "</g>\n";
  }
  double ly = f.margin + 15;
  out += "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"10\">\n";
  out += fmt::format("<text x=\"{}\" y=\"{}\">stack mean, 1 and 2 sd band</text>\n", f.W - 220, ly);
  for (std::size_t k = 0; k < points.size(); ++k) {
    ly += 14;
    out += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"{}\">signal {}</text>\n", f.W - 220, ly, kColours[k % 8], k + 1);
  }
  if (any_outlier) out += fmt::format("<text x=\"{}\" y=\"{}\" fill=\"red\">outliers</text>\n", f.W - 220, ly + 14);
  out += "</g>\n</svg>\n";
  return out;
}

std::string series_svg(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y,
                       const std::vector<std::string>& labels, const std::string& title) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (std::size_t k = 0; k < x.size(); ++k) {
    for (std::size_t i = 0; i < x[k].size(); ++i) {
      x0 = std::min(x0, x[k][i]);
      x1 = std::max(x1, x[k][i]);
      y0 = std::min(y0, y[k][i]);
      y1 = std::max(y1, y[k][i]);
    }
  }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) {
    y0 -= 1.0;
    y1 += 1.0;
  }
  Frame f{x0, x1, y0, y1};
  std::string out = header(f, title);
  for (std::size_t k = 0; k < x.size(); ++k) {
    out += "<!-- series " + labels[k] + ": x,y\n";
    for (std::size_t i = 0; i < x[k].size(); ++i) out += format_number(x[k][i]) + "," + format_number(y[k][i]) + "\n";
    out += "-->\n" + polyline(f, x[k], y[k], kColours[k % 8]);
    out += fmt::format("<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" fill=\"{}\">{}</text>\n",
                       f.W - 220, f.margin + 15 + 14.0 * k, kColours[k % 8], labels[k]);
  }
  out += "</svg>\n";
  return out;
}

nlohmann::json error_record(const std::string& code, const std::string& message) {
  return {{"error", code}, {"message", message}};
}

}  // namespace sagpr
