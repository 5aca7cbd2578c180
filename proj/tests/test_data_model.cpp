#include <functional>

#include "doctest.h"
#include "sagpr/data_model.hpp"
#include "sagpr/errors.hpp"

using namespace sagpr;

namespace {
ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::InvalidArgument;
}
}  // namespace

TEST_CASE("signal parsing") {
  auto s = parse_signal_text("depth,d18o,c14_age,c14_error\n0.3,3.5,,\n0.1,3.1,1200,40\n0.2,NA,900,30\n", "core");
  REQUIRE(s.size() == 3);
  CHECK(s.positions() == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(s.observations()[0].size() == 2);
  CHECK(s.observations()[0][1].kind == ProxyKind::Radiocarbon);
  CHECK(s.observations()[0][1].extra_variance == doctest::Approx(1600.0));
  CHECK(s.count(ProxyKind::D18O) == 2);
  CHECK(s.count(ProxyKind::Radiocarbon) == 2);

  auto tab = parse_signal_text("depth\td18o\n1\t2\n2\t3\n", "t");
  CHECK(tab.size() == 2);

  auto merged = parse_signal_text("depth,d18o\n1,2\n1,2.5\n2,3\n", "m");
  CHECK(merged.size() == 2);
  CHECK(merged.observations()[0].size() == 2);
}

TEST_CASE("signal parsing errors") {
  CHECK(code_of([] { parse_signal_text("d18o\n1\n2\n", "x"); }) == ErrorCode::MissingColumn);
  CHECK(code_of([] { parse_signal_text("depth,d18o\n1,abc\n2,3\n", "x"); }) == ErrorCode::MalformedRow);
  CHECK(code_of([] { parse_signal_text("depth,d18o\n1,2\n1,2\n2,3\n", "x"); }) == ErrorCode::NonMonotoneDepth);
  CHECK_THROWS_AS(Signal("x", {1.0}, {{ProxyDatum::d18o(1)}}), Error);
  CHECK_THROWS_AS(Signal("x", {1.0, 1.0}, {{ProxyDatum::d18o(1)}, {ProxyDatum::d18o(2)}}), Error);
}

TEST_CASE("signal text round trip") {
  Signal s("a", {0.125, 0.5, 0.75},
           {{ProxyDatum::d18o(3.25)}, {ProxyDatum::radiocarbon(1500, 400, 2500)}, {ProxyDatum::d18o(-1.5)}});
  auto back = parse_signal_text(signal_to_text(s), "a");
  CHECK(back == s);
}

TEST_CASE("alignment validation") {
  AlignmentSample a;
  a.values = {0.1, 0.3, 0.3, 1.2};
  auto v = validate_alignment(a, {0.0, 1.0});
  REQUIRE(v.size() == 2);
  CHECK(v[0].index == 3);
  CHECK(v[0].kind == Violation::NonIncreasing);
  CHECK(v[1].index == 4);
  CHECK(v[1].kind == Violation::OutOfDomain);
  a.values = {0.1, 0.2};
  CHECK(validate_alignment(a, {0.0, 1.0}).empty());
}

TEST_CASE("calibration curve") {
  CalibrationCurve c({0.0, 1.0, 2.0}, {0.0, 1000.0, 3000.0}, {10.0, 20.0, 40.0});
  auto p = c.at(1.5);
  CHECK(p.mean == doctest::Approx(2000.0));
  CHECK(p.sigma == doctest::Approx(30.0));
  CHECK(code_of([&] { c.at(2.5); }) == ErrorCode::DomainError);
  auto yr = parse_calibration_text("cal_age,c14_mean,c14_sigma\n0,0,10\n1000,900,12\n");
  CHECK(yr.range().hi == doctest::Approx(1.0));
  auto kyr = parse_calibration_text("cal_age_kyr,c14_mean,c14_sigma\n0,0,10\n1,900,12\n");
  CHECK(kyr.at(0.5).mean == doctest::Approx(450.0));
  CHECK(code_of([] { parse_calibration_text("age,mu\n0,1\n"); }) == ErrorCode::MissingColumn);
}

TEST_CASE("hyperparameter validation") {
  FixedHyperparams f;
  CHECK_NOTHROW(f.validate());
  f.delta = 1.5;
  CHECK_THROWS_AS(f.validate(), Error);
}
