#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>

#include "doctest.h"
#include "error.hpp"
#include "limits.hpp"
#include "model.hpp"
#include "ssa.hpp"

using namespace hemo;

namespace {

bool throws_code(Errc want, const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code() == want;
  }
  return false;
}

}  // namespace

TEST_CASE("mean curve, small instance") {
  const ModelParams p = validate_params(1, 1, 1, 0.5, 0.75, 4);
  const MeanCurve mean = make_mean_curve(p, {4, 0, 0});
  CHECK(mean.betaK == doctest::Approx(-3.6213203435596426).epsilon(1e-13));

  const auto at0 = mean(0.0);
  CHECK(at0[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(std::fabs(at0[1]) < 1e-12);
  CHECK(std::fabs(at0[2]) < 1e-12);

  const auto at1 = mean(1.0);
  CHECK(at1[0] == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(at1[1] == doctest::Approx(3.1477547222989326).epsilon(1e-13));
  CHECK(at1[2] == doctest::Approx(2.2697462464567740).epsilon(1e-13));

  const auto at5 = mean(5.0);
  CHECK(at5[2] == doctest::Approx(20.884566101618836).epsilon(1e-12));
}

TEST_CASE("mean curve, production design beta") {
  const ModelParams p = validate_params(1, 1, 1, 0.55, 0.8, 2000);
  const MeanCurve mean = make_mean_curve(p, {2000, 0, 0});
  CHECK(mean.betaK == doctest::Approx(-0.1785157315405574).epsilon(1e-12));
}

TEST_CASE("mean_system delegates to the curve") {
  const ModelParams p = validate_params(1.2, 0.9, 1.7, 0.5, 0.75, 16);
  const MeanCurve mean = make_mean_curve(p, {16, 5, 3});
  for (double t : {0.0, 0.3, 1.0, 4.0}) {
    const auto a = mean(t);
    const auto b = mean_system(p, {16, 5, 3}, t);
    for (int c = 0; c < 3; ++c) CHECK(a[c] == doctest::Approx(b[c]).epsilon(1e-15));
  }
}

TEST_CASE("compartment 2 started at its fixed point stays flat") {
  const ModelParams p = validate_params(1, 1, 1, 0.5, 0.75, 16);
  const DerivedRates r = derive_rates(p);
  const double m2Star = 16.0 * r.kGamma2;  // tau1 m1 / tau2 * K^gamma2
  const MeanCurve mean = make_mean_curve(p, {16, m2Star, 0});
  for (double t : {0.5, 2.0, 10.0})
    CHECK(mean(t)[1] == doctest::Approx(m2Star).epsilon(1e-12));
}

TEST_CASE("resonant rate pairs are rejected") {
  // tau2 K^(gamma3-gamma2) = 1 * 16^0.25 = 2 = tau3
  const ModelParams p = validate_params(1, 1, 2, 0.5, 0.75, 16);
  CHECK(throws_code(Errc::ResonantParameters, [&] { make_mean_curve(p, {16, 0, 0}); }));
  // nearby but off resonance passes
  const ModelParams ok = validate_params(1, 1, 2.001, 0.5, 0.75, 16);
  CHECK(make_mean_curve(ok, {16, 0, 0}).betaK != 0.0);
}

TEST_CASE("y limit closed form") {
  const auto yv = limit_y(1.5, 0.25, 1.0, 2.0, 0.8);
  CHECK(yv[0] == 1.5);
  CHECK(yv[1] == doctest::Approx(0.6490517410026723).epsilon(1e-14));

  CHECK(limit_y(1.5, 0.25, 1.0, 2.0, 0.0)[1] == doctest::Approx(0.25).epsilon(1e-14));
  // relaxes to tau1 x1 / tau2
  CHECK(limit_y(1.5, 0.25, 1.0, 2.0, 60.0)[1] == doctest::Approx(0.75).epsilon(1e-12));

  const LimitCurveY curve = make_limit_y(1.5, 0.25, 1.0, 2.0);
  const auto cv = curve(0.8);
  CHECK(cv[0] == yv[0]);
  CHECK(cv[1] == yv[1]);
}

TEST_CASE("z limit closed form") {
  const auto zv = limit_z(1.0, 0.0, 1.0, 1.0, 1.0, 1.0);
  CHECK(zv[0] == 1.0);
  CHECK(zv[1] == doctest::Approx(0.6321205588285577).epsilon(1e-14));

  const LimitCurveZ curve = make_limit_z(1.0, 0.0, 1.0, 1.0, 1.0);
  CHECK(curve.z2Star == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(curve(1.0)[1] == doctest::Approx(zv[1]).epsilon(1e-15));

  // started at the stationary level, z3 is constant
  const LimitCurveZ flat = make_limit_z(1.5, 3.0, 1.0, 1.0, 0.5);
  for (double t : {0.1, 1.0, 7.0})
    CHECK(flat(t)[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("order-K transient curves") {
  const ModelParams p = validate_params(0.8, 1.1, 1.0, 0.5, 0.75, 64);
  const auto i = limit_x(p, 1.0, 0.5, XVariant::I);
  CHECK(i[0] == 1.0);
  CHECK(i[1] == 0.0);
  CHECK(i[2] == 0.0);

  const auto printed = limit_x(p, 1.0, 0.5, XVariant::II, false);
  CHECK(printed[0] == 1.0);
  CHECK(printed[1] == doctest::Approx(0.8 * 0.5).epsilon(1e-14));
  CHECK(printed[2] == doctest::Approx(0.1375).epsilon(1e-13));

  const auto ode = limit_x(p, 1.0, 0.5, XVariant::II, true);
  CHECK(ode[2] == doctest::Approx(0.11).epsilon(1e-13));
}

TEST_CASE("rescale divides by the compartment scales") {
  const ModelParams p = validate_params(1, 1, 1, 0.5, 0.75, 4);
  const DerivedRates r = derive_rates(p);
  SimulationConfig cfg;
  cfg.horizon = 1.0;
  cfg.sampleGrid = {0.0, 0.5, 1.0};
  cfg.seed = 21;
  const Trajectory traj = simulate_exact(p, {4, 2, 1}, cfg);

  const RescaledPath x = rescale(traj, ScaleKind::X);
  CHECK(x.kind == ScaleKind::X);
  REQUIRE(x.comps.size() == traj.states.size());
  for (std::size_t i = 0; i < x.comps.size(); ++i) {
    CHECK(x.comps[i][0] ==
          doctest::Approx(double(traj.states[i].n1) / 4.0).epsilon(1e-15));
    CHECK(x.comps[i][1] ==
          doctest::Approx(double(traj.states[i].n2) / r.n2Scale).epsilon(1e-15));
    CHECK(x.comps[i][2] ==
          doctest::Approx(double(traj.states[i].n3) / r.n3Scale).epsilon(1e-15));
  }
  CHECK(x.initialRescaled[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(x.initialRescaled[1] == doctest::Approx(2.0 / r.n2Scale).epsilon(1e-15));

  const RescaledPath over = rescale(traj, ScaleKind::XOverK);
  for (std::size_t i = 0; i < over.comps.size(); ++i) {
    CHECK(over.comps[i][1] ==
          doctest::Approx(double(traj.states[i].n2) / 4.0).epsilon(1e-15));
    CHECK(over.comps[i][2] ==
          doctest::Approx(double(traj.states[i].n3) / 4.0).epsilon(1e-15));
  }
}

TEST_CASE("rescale demands the matching simulation clock") {
  const ModelParams p = validate_params(1, 1, 1, 0.5, 0.75, 4);
  SimulationConfig cfg;
  cfg.horizon = 1.0;
  cfg.sampleGrid = {1.0};
  const Trajectory unitTraj = simulate_exact(p, {4, 0, 0}, cfg);
  CHECK(throws_code(Errc::ScaleMismatch, [&] { rescale(unitTraj, ScaleKind::Y); }));
  CHECK(throws_code(Errc::ScaleMismatch, [&] { rescale(unitTraj, ScaleKind::Z); }));

  cfg.timeScale = TimeScale::Gamma2;
  const Trajectory yTraj = simulate_exact(p, {4, 0, 0}, cfg);
  CHECK(rescale(yTraj, ScaleKind::Y).kind == ScaleKind::Y);
  CHECK(throws_code(Errc::ScaleMismatch, [&] { rescale(yTraj, ScaleKind::X); }));
}
