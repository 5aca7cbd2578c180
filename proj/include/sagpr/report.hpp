#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "sagpr/alignment_model.hpp"
#include "sagpr/data_model.hpp"
#include "sagpr/gpr.hpp"

namespace sagpr {

// signal_id,l,depth,age,outlier_flag,log_post
std::string samples_to_text(const Signal& signal, const std::vector<AlignmentSample>& bank);

struct PositionSummary {
  double depth, median, lower, upper, outlier_probability;
};
std::vector<PositionSummary> summarize(const Signal& signal, const std::vector<AlignmentSample>& bank,
                                       const std::vector<double>& outlier_probability);
// depth,median,q025,q975,outlier_prob
std::string summary_to_text(const std::vector<PositionSummary>& rows);

std::string params_header();
std::string params_row(const std::string& id, const SignalParams& p, double q_final);

struct PlotPoints {
  std::vector<double> age, value;
  std::vector<int> outlier;
};

// Band = mean +/- 1 and 2 sd, points = median-aligned data; numeric series are
// repeated in a comment so files can be compared as text.
std::string profile_svg(const Profile& profile, const std::vector<PlotPoints>& points, const std::string& title);
std::string series_svg(const std::vector<std::vector<double>>& x, const std::vector<std::vector<double>>& y,
                       const std::vector<std::string>& labels, const std::string& title);

nlohmann::json error_record(const std::string& code, const std::string& message);

}  // namespace sagpr
