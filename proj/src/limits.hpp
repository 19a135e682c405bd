#pragma once
#include <array>
#include <vector>

#include "model.hpp"
#include "ssa.hpp"

namespace hemo {

// Closed-form expectation curve of the chain; t in absolute time, values in
// absolute counts. betaK is singular at tau2 K^(gamma3-gamma2) = tau3.
struct MeanCurve {
  ModelParams params;
  DerivedRates rates;
  double m1 = 0, m2 = 0, m3 = 0;  // initial means, absolute counts
  double betaK = 0;

  std::array<double, 3> operator()(double t) const;
};

MeanCurve make_mean_curve(const ModelParams& p, const std::array<double, 3>& initialMeans);

std::array<double, 3> mean_system(const ModelParams& p,
                                  const std::array<double, 3>& initialMeans, double t);

enum class XVariant : int { I = 0, II = 1 };

// Prop thX order-K curve. The printed third component omits a tau1 factor
// relative to the mean ODE; odeThird=false reproduces the printed form.
std::array<double, 3> limit_x(const ModelParams& p, double x1, double t, XVariant v,
                              bool odeThird = true);

struct LimitCurveY {
  double x1 = 0, x2 = 0;
  double tau1 = 1, tau2 = 1;

  std::array<double, 2> operator()(double t) const;  // (y1, y2)
};

struct LimitCurveZ {
  double x1 = 0, x3 = 0;
  double tau1 = 1, tau2 = 1, tau3 = 1;
  double z2Star = 0;  // tau1 x1 / tau2

  std::array<double, 2> operator()(double t) const;  // (z1, z3)
};

LimitCurveY make_limit_y(double x1, double x2, double tau1, double tau2);
LimitCurveZ make_limit_z(double x1, double x3, double tau1, double tau2, double tau3);

std::array<double, 2> limit_y(double x1, double x2, double tau1, double tau2, double t);
std::array<double, 2> limit_z(double x1, double x3, double tau1, double tau2, double tau3,
                              double t);

enum class ScaleKind : int { X = 0, Y = 1, Z = 2, XOverK = 3 };

// Size-rescaled grid path: components over (K, K^(1+g2), K^(1+g2+g3)), or all
// over K for the XOverK mode of Prop thX(ii); time axis in rescaled units.
struct RescaledPath {
  ScaleKind kind = ScaleKind::X;
  ModelParams params;
  DerivedRates rates;
  std::vector<double> grid;
  std::vector<std::array<double, 3>> comps;
  std::array<double, 3> initialRescaled{};
};

RescaledPath rescale(const Trajectory& t, ScaleKind kind);

}  // namespace hemo
