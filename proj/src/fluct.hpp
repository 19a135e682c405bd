#pragma once
#include <array>
#include <cstdint>
#include <vector>

#include "limits.hpp"
#include "model.hpp"

namespace hemo {

enum class SdeSampler : int { ExactGaussian = 0, EulerMaruyama = 1 };
enum class W2Mode : int { Literal = 0, TimeChanged = 1 };

struct SdeConfig {
  double dt = 1e-3;  // Euler-Maruyama substep; ExactGaussian steps grid-to-grid
  SdeSampler sampler = SdeSampler::ExactGaussian;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

// Discretized limit process. dB holds the driving Brownian increments per grid
// interval so expansions can couple to the same noise. U and V keep stream
// salt 1, W2 salt 2: linked seeds give independent B1 and B2 as required.
struct SdePath {
  std::vector<double> grid;
  int ncomp = 2;
  std::vector<std::array<double, 2>> comps;
  std::vector<double> dB;
  const char* process = "";
  SdeSampler sampler = SdeSampler::ExactGaussian;
  W2Mode mode = W2Mode::Literal;
};

// dU1 = sqrt(tau1 x1) dB1 ; dU2 = (tau1 U1 - tau2 U2) dt
SdePath simulate_U(double tau1, double tau2, double x1, std::array<double, 2> u0,
                   const std::vector<double>& grid, const SdeConfig& cfg);

// Literal: sqrt(tau2 y2(t)) B2(t). TimeChanged: continuous martingale with
// quadratic variation int_0^t tau2 y2(s) ds. Same B2 stream in both modes.
SdePath simulate_W2(double tau1, double tau2, double x1, double x2,
                    const std::vector<double>& grid, const SdeConfig& cfg,
                    W2Mode mode = W2Mode::Literal);

// dV1 = sqrt(tau1 x1) dW1 ; dV3 = (tau1 V1 - tau3 V3) dt
SdePath simulate_V(double tau1, double tau3, double x1, std::array<double, 2> v0,
                   const std::vector<double>& grid, const SdeConfig& cfg);

struct Cov2 {
  double s11 = 0, s12 = 0, s22 = 0;
};

// Solves Sigma' = A Sigma + Sigma A^T + b b^T, Sigma(0) = 0, for the
// triangular systems A = [[0,0],[a21,a22]] with a22 <= 0 (single Brownian).
Cov2 analytic_linear_covariance(const std::array<std::array<double, 2>, 2>& A,
                                const std::array<double, 2>& b, double t);

struct ExpansionTerms {
  double total = 0;
  double deterministic = 0;  // K^(1+g2) y2 resp. K^(1+g2+g3) z3
  double gaussian = 0;       // U2 resp. V3 term
  double martingale = 0;     // W2 term (N2 only)
};

// N2 expansion at absolute time t; U and W2 paths live on the Y time grid.
ExpansionTerms expansion_N2(const ModelParams& p, const LimitCurveY& y,
                            const SdePath& uPath, const SdePath& w2Path, double tAbs);

// N3 expansion at absolute time t; V path lives on the Z time grid.
ExpansionTerms expansion_N3(const ModelParams& p, const LimitCurveZ& z,
                            const SdePath& vPath, double tAbs);

}  // namespace hemo
