#include "limits.hpp"

#include <cmath>

namespace hemo {

std::array<double, 3> MeanCurve::operator()(double t) const {
  const double m1t = m1 / static_cast<double>(params.K);
  const double m2t = m2 / rates.n2Scale;
  const double m3t = m3 / rates.n3Scale;
  const double eFast = std::exp(-params.tau2 * rates.kInvGamma2 * t);
  const double eSlow = std::exp(-rates.d3 * t);
  const double y2Inf = params.tau1 * m1t / params.tau2;
  const double n2t = y2Inf + (m2t - y2Inf) * eFast;
  const double z3Inf = 2.0 * rates.p2D * params.tau1 * m1t / params.tau3;
  const double n3t = z3Inf - betaK * eFast + (m3t - z3Inf + betaK) * eSlow;
  return {m1, n2t * rates.n2Scale, n3t * rates.n3Scale};
}

MeanCurve make_mean_curve(const ModelParams& p, const std::array<double, 3>& m) {
  if (m[0] < 0 || m[1] < 0 || m[2] < 0)
    fail(Errc::InvalidArgument, "initial means must be non-negative");
  const DerivedRates r = derive_rates(p);
  const double denom = p.tau2 * r.kGamma3 / r.kGamma2 - p.tau3;
  if (std::fabs(denom) < 1e-9 * p.tau3)
    fail(Errc::ResonantParameters,
         "tau2 K^(gamma3-gamma2) too close to tau3: beta_K singular");
  const double m1t = m[0] / static_cast<double>(p.K);
  const double m2t = m[1] / r.n2Scale;
  MeanCurve c;
  c.params = p;
  c.rates = r;
  c.m1 = m[0];
  c.m2 = m[1];
  c.m3 = m[2];
  c.betaK = 2.0 * r.p2D * p.tau2 * (m2t - p.tau1 * m1t / p.tau2) / denom;
  return c;
}

std::array<double, 3> mean_system(const ModelParams& p,
                                  const std::array<double, 3>& initialMeans, double t) {
  if (!(t >= 0)) fail(Errc::InvalidArgument, "t must be non-negative");
  return make_mean_curve(p, initialMeans)(t);
}

std::array<double, 3> limit_x(const ModelParams& p, double x1, double t, XVariant v,
                              bool odeThird) {
  if (!(t >= 0)) fail(Errc::InvalidArgument, "t must be non-negative");
  if (v == XVariant::I) return {x1, 0.0, 0.0};
  const double third = odeThird ? x1 * p.tau1 * p.tau2 * 0.5 * t * t : p.tau2 * 0.5 * t * t;
  return {x1, x1 * p.tau1 * t, third};
}

std::array<double, 2> LimitCurveY::operator()(double t) const {
  const double yInf = tau1 * x1 / tau2;
  return {x1, yInf + (x2 - yInf) * std::exp(-tau2 * t)};
}

std::array<double, 2> LimitCurveZ::operator()(double t) const {
  const double zInf = tau2 * z2Star / tau3;  // = tau1 x1 / tau3
  return {x1, zInf + (x3 - zInf) * std::exp(-tau3 * t)};
}

LimitCurveY make_limit_y(double x1, double x2, double tau1, double tau2) {
  if (!(tau1 > 0) || !(tau2 > 0)) fail(Errc::NonPositiveRate, "tau must be positive");
  return LimitCurveY{x1, x2, tau1, tau2};
}

LimitCurveZ make_limit_z(double x1, double x3, double tau1, double tau2, double tau3) {
  if (!(tau1 > 0) || !(tau2 > 0) || !(tau3 > 0))
    fail(Errc::NonPositiveRate, "tau must be positive");
  return LimitCurveZ{x1, x3, tau1, tau2, tau3, tau1 * x1 / tau2};
}

std::array<double, 2> limit_y(double x1, double x2, double tau1, double tau2, double t) {
  if (!(t >= 0)) fail(Errc::InvalidArgument, "t must be non-negative");
  return make_limit_y(x1, x2, tau1, tau2)(t);
}

std::array<double, 2> limit_z(double x1, double x3, double tau1, double tau2, double tau3,
                              double t) {
  if (!(t >= 0)) fail(Errc::InvalidArgument, "t must be non-negative");
  return make_limit_z(x1, x3, tau1, tau2, tau3)(t);
}

RescaledPath rescale(const Trajectory& t, ScaleKind kind) {
  const TimeScale expected = kind == ScaleKind::Y   ? TimeScale::Gamma2
                             : kind == ScaleKind::Z ? TimeScale::Gamma3
                                                    : TimeScale::Unit;
  if (t.timeScale != expected)
    fail(Errc::ScaleMismatch, "trajectory time scale does not match requested rescaling");
  const double kd = static_cast<double>(t.params.K);
  const bool allOverK = kind == ScaleKind::XOverK;
  const double s1 = kd;
  const double s2 = allOverK ? kd : t.rates.n2Scale;
  const double s3 = allOverK ? kd : t.rates.n3Scale;

  RescaledPath out;
  out.kind = kind;
  out.params = t.params;
  out.rates = t.rates;
  out.grid = t.gridRescaled;
  out.comps.reserve(t.states.size());
  for (const auto& s : t.states)
    out.comps.push_back({static_cast<double>(s.n1) / s1, static_cast<double>(s.n2) / s2,
                         static_cast<double>(s.n3) / s3});
  out.initialRescaled = {static_cast<double>(t.initial.n1) / s1,
                         static_cast<double>(t.initial.n2) / s2,
                         static_cast<double>(t.initial.n3) / s3};
  return out;
}

}  // namespace hemo
