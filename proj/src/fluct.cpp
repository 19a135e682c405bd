#include "fluct.hpp"

#include <cmath>

#include "rng.hpp"

namespace hemo {

namespace {

constexpr std::uint64_t kSaltB1 = 1;  // U and V processes
constexpr std::uint64_t kSaltB2 = 2;  // W2 process

std::uint64_t salted(std::uint64_t stream, std::uint64_t salt) {
  return (stream << 2) | salt;
}

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) fail(Errc::InvalidArgument, "SDE grid must be non-empty");
  if (!(grid.front() >= 0.0)) fail(Errc::InvalidArgument, "SDE grid must start at t >= 0");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      fail(Errc::InvalidArgument, "SDE grid must be strictly increasing");
}

// integral deficits of the damped exponential; series below x = beta*t = 1e-3,
// where the direct g2 form loses ~x^-2 digits to cancellation
// g1 = t - (1-e^-x)/beta            ~ t(x/2 - x^2/6 + x^3/24)
// g2 = t - 2(1-e^-x)/beta + (1-e^-2x)/(2 beta)   ~ t(x^2/3 - x^3/4 + 7x^4/60)
// g3 = (1-e^-x)/beta - (1-e^-2x)/(2 beta)        ~ t(x/2 - x^2/2 + 7x^3/24)
struct Deficits {
  double g1, g2, g3;
};

Deficits deficits(double beta, double t) {
  const double x = beta * t;
  if (x < 1e-3) {
    const double x2 = x * x;
    return {t * (x / 2 - x2 / 6 + x2 * x / 24),
            t * (x2 / 3 - x2 * x / 4 + 7 * x2 * x2 / 60),
            t * (x / 2 - x2 / 2 + 7 * x2 * x / 24)};
  }
  const double e1 = -std::expm1(-x) / beta;        // (1-e^-x)/beta
  const double e2 = -std::expm1(-2 * x) / (2 * beta);
  return {t - e1, t - 2 * e1 + e2, e1 - e2};
}

}  // namespace

Cov2 analytic_linear_covariance(const std::array<std::array<double, 2>, 2>& A,
                                const std::array<double, 2>& b, double t) {
  if (!(t >= 0)) fail(Errc::InvalidArgument, "t must be non-negative");
  if (A[0][0] != 0.0 || A[0][1] != 0.0)
    fail(Errc::InvalidArgument, "drift must have the triangular form [[0,0],[a21,a22]]");
  const double alpha = A[1][0];
  const double beta = -A[1][1];
  if (beta < 0) fail(Errc::InvalidArgument, "a22 must be non-positive");
  const double b1 = b[0], b2 = b[1];
  Cov2 c;
  c.s11 = b1 * b1 * t;
  if (beta == 0.0) {
    c.s12 = alpha * b1 * b1 * t * t / 2 + b1 * b2 * t;
    c.s22 = alpha * alpha * b1 * b1 * t * t * t / 3 + alpha * b1 * b2 * t * t + b2 * b2 * t;
    return c;
  }
  const auto [g1, g2, g3] = deficits(beta, t);
  const double e1 = t - g1;  // (1-e^-beta t)/beta
  c.s12 = alpha * b1 * b1 * g1 / beta + b1 * b2 * e1;
  c.s22 = alpha * alpha * b1 * b1 * g2 / (beta * beta) + 2 * alpha * b1 * b2 * g3 / beta +
          b2 * b2 * (e1 - g3);  // int e^2 = e1 - g3
  return c;
}

namespace {

// shared implementation for the U (tau2) and V (tau3) systems
SdePath simulate_linear(double tau1, double tauDamp, double x1, std::array<double, 2> y0,
                        const std::vector<double>& grid, const SdeConfig& cfg,
                        const char* name) {
  if (!(x1 >= 0)) fail(Errc::InvalidArgument, "x1 must be non-negative");
  if (!(tau1 > 0) || !(tauDamp > 0)) fail(Errc::NonPositiveRate, "tau must be positive");
  check_grid(grid);
  SdePath path;
  path.grid = grid;
  path.ncomp = 2;
  path.process = name;
  path.sampler = cfg.sampler;
  path.comps.resize(grid.size());
  path.dB.assign(grid.size() - 1, 0.0);

  rng::Xoshiro256pp gen(cfg.seed, salted(cfg.stream, kSaltB1));
  const double sigma = std::sqrt(tau1 * x1);
  double u1 = y0[0], u2 = y0[1];
  path.comps[0] = {u1, u2};
  const std::array<std::array<double, 2>, 2> A{{{0.0, 0.0}, {tau1, -tauDamp}}};

  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double h = grid[i] - grid[i - 1];
    if (cfg.sampler == SdeSampler::ExactGaussian) {
      const Cov2 q = analytic_linear_covariance(A, {sigma, 0.0}, h);
      const double eD = std::exp(-tauDamp * h);
      const double flow21 = tau1 / tauDamp * -std::expm1(-tauDamp * h);
      const double m1 = u1;
      const double m2 = flow21 * u1 + eD * u2;
      const double z1 = gen.normal();
      const double z2 = gen.normal();
      const double l11 = std::sqrt(q.s11);
      const double l21 = l11 > 0 ? q.s12 / l11 : 0.0;
      const double l22 = std::sqrt(std::max(0.0, q.s22 - l21 * l21));
      u1 = m1 + l11 * z1;
      u2 = m2 + l21 * z1 + l22 * z2;
      path.dB[i - 1] = std::sqrt(h) * z1;
    } else {
      const int nsub = std::max(1, static_cast<int>(std::ceil(h / cfg.dt)));
      const double hs = h / nsub;
      const double sq = std::sqrt(hs);
      double dBsum = 0.0;
      for (int k = 0; k < nsub; ++k) {
        const double z = gen.normal();
        u2 += (tau1 * u1 - tauDamp * u2) * hs;
        u1 += sigma * sq * z;
        dBsum += sq * z;
      }
      path.dB[i - 1] = dBsum;
    }
    path.comps[i] = {u1, u2};
  }
  return path;
}

}  // namespace

SdePath simulate_U(double tau1, double tau2, double x1, std::array<double, 2> u0,
                   const std::vector<double>& grid, const SdeConfig& cfg) {
  return simulate_linear(tau1, tau2, x1, u0, grid, cfg, "U");
}

SdePath simulate_V(double tau1, double tau3, double x1, std::array<double, 2> v0,
                   const std::vector<double>& grid, const SdeConfig& cfg) {
  return simulate_linear(tau1, tau3, x1, v0, grid, cfg, "V");
}

SdePath simulate_W2(double tau1, double tau2, double x1, double x2,
                    const std::vector<double>& grid, const SdeConfig& cfg, W2Mode mode) {
  if (!(x1 >= 0) || !(x2 >= 0)) fail(Errc::InvalidArgument, "x1, x2 must be non-negative");
  check_grid(grid);
  const LimitCurveY y = make_limit_y(x1, x2, tau1, tau2);
  SdePath path;
  path.grid = grid;
  path.ncomp = 1;
  path.process = "W2";
  path.sampler = cfg.sampler;
  path.mode = mode;
  path.comps.resize(grid.size());
  path.dB.assign(grid.size() - 1, 0.0);

  rng::Xoshiro256pp gen(cfg.seed, salted(cfg.stream, kSaltB2));
  double b2 = 0.0;   // running B2(t), Literal mode
  double w = 0.0;    // running martingale, TimeChanged mode
  const double yInf = tau1 * x1 / tau2;
  path.comps[0] = {0.0, 0.0};
  if (grid.front() != 0.0)
    fail(Errc::InvalidArgument, "W2 grid must start at 0 (W2(0) = 0)");

  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double h = grid[i] - grid[i - 1];
    const double z = gen.normal();
    path.dB[i - 1] = std::sqrt(h) * z;
    if (mode == W2Mode::Literal) {
      b2 += std::sqrt(h) * z;
      const double yt = y(grid[i])[1];
      path.comps[i] = {std::sqrt(tau2 * std::max(0.0, yt)) * b2, 0.0};
    } else {
      const double yPrev = y(grid[i - 1])[1];
      double qv;  // int_{t_i-1}^{t_i} tau2 y2(s) ds
      if (cfg.sampler == SdeSampler::ExactGaussian)
        qv = tau2 * (yInf * h + (yPrev - yInf) * -std::expm1(-tau2 * h) / tau2);
      else
        qv = tau2 * yPrev * h;
      w += std::sqrt(std::max(0.0, qv)) * z;
      path.comps[i] = {w, 0.0};
    }
  }
  return path;
}

namespace {

double interp(const SdePath& p, int comp, double t) {
  const auto& g = p.grid;
  if (t < g.front() - 1e-12 || t > g.back() + 1e-12)
    fail(Errc::InvalidArgument, "expansion time outside SDE path span");
  if (t <= g.front()) return p.comps.front()[comp];
  if (t >= g.back()) return p.comps.back()[comp];
  std::size_t lo = 0, hi = g.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (g[mid] <= t ? lo : hi) = mid;
  }
  const double w = (t - g[lo]) / (g[hi] - g[lo]);
  return (1 - w) * p.comps[lo][comp] + w * p.comps[hi][comp];
}

void require_zero_start(const SdePath& p, const char* what) {
  if (!p.grid.empty() && p.grid.front() == 0.0 &&
      (p.comps.front()[0] != 0.0 || p.comps.front()[1] != 0.0))
    fail(Errc::InvalidArgument, std::string(what) + " path must start from 0");
}

}  // namespace

ExpansionTerms expansion_N2(const ModelParams& p, const LimitCurveY& y,
                            const SdePath& uPath, const SdePath& w2Path, double tAbs) {
  if (!(tAbs >= 0)) fail(Errc::InvalidArgument, "t must be non-negative");
  require_zero_start(uPath, "U");
  const DerivedRates r = derive_rates(p);
  const double s = tAbs / r.kGamma2;  // Y time
  const double lnK = std::log(static_cast<double>(p.K));
  ExpansionTerms out;
  out.deterministic = r.n2Scale * y(s)[1];
  out.gaussian = std::exp(0.5 * (1 + 3 * p.gamma2) * lnK) * interp(uPath, 1, s);
  out.martingale = std::exp(0.5 * (1 + 2 * p.gamma2) * lnK) * interp(w2Path, 0, s);
  out.total = out.deterministic + out.gaussian + out.martingale;
  return out;
}

ExpansionTerms expansion_N3(const ModelParams& p, const LimitCurveZ& z,
                            const SdePath& vPath, double tAbs) {
  if (!(tAbs >= 0)) fail(Errc::InvalidArgument, "t must be non-negative");
  require_zero_start(vPath, "V");
  const DerivedRates r = derive_rates(p);
  const double s = tAbs / r.kGamma3;  // Z time
  const double lnK = std::log(static_cast<double>(p.K));
  ExpansionTerms out;
  out.deterministic = r.n3Scale * z(s)[1];
  out.gaussian =
      std::exp(0.5 * (1 + 2 * p.gamma2 + 3 * p.gamma3) * lnK) * interp(vPath, 1, s);
  out.martingale = 0.0;
  out.total = out.deterministic + out.gaussian;
  return out;
}

}  // namespace hemo
