#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "error.hpp"
#include "fluct.hpp"
#include "model.hpp"

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

constexpr std::array<std::array<double, 2>, 2> unitA{{{0.0, 0.0}, {1.0, -1.0}}};

SdeConfig exact_cfg(std::uint64_t seed, std::uint64_t stream) {
  SdeConfig cfg;
  cfg.sampler = SdeSampler::ExactGaussian;
  cfg.seed = seed;
  cfg.stream = stream;
  return cfg;
}

}  // namespace

TEST_CASE("linear covariance closed form, unit system") {
  const Cov2 c = analytic_linear_covariance(unitA, {1.0, 0.0}, 1.0);
  CHECK(c.s11 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.s12 == doctest::Approx(0.36787944117144233).epsilon(1e-13));
  CHECK(c.s22 == doctest::Approx(0.1680912407245783).epsilon(1e-13));
}

TEST_CASE("linear covariance closed form, generic coefficients") {
  const std::array<std::array<double, 2>, 2> A{{{0.0, 0.0}, {0.9, -1.3}}};
  const double b1 = std::sqrt(0.9 * 2.0);
  const Cov2 c = analytic_linear_covariance(A, {b1, 0.0}, 0.7);
  CHECK(c.s11 == doctest::Approx(1.26).epsilon(1e-14));
  CHECK(c.s12 == doctest::Approx(0.2995794336890475).epsilon(1e-13));
  CHECK(c.s22 == doctest::Approx(0.08895032537609623).epsilon(1e-13));
}

TEST_CASE("linear covariance without damping reduces to polynomials") {
  const std::array<std::array<double, 2>, 2> A{{{0.0, 0.0}, {0.7, 0.0}}};
  const Cov2 c = analytic_linear_covariance(A, {1.1, 0.4}, 2.0);
  const double b1 = 1.1, b2 = 0.4, a = 0.7, t = 2.0;
  CHECK(c.s11 == doctest::Approx(b1 * b1 * t).epsilon(1e-14));
  CHECK(c.s12 == doctest::Approx(a * b1 * b1 * t * t / 2 + b1 * b2 * t).epsilon(1e-14));
  CHECK(c.s22 == doctest::Approx(a * a * b1 * b1 * t * t * t / 3 + a * b1 * b2 * t * t +
                                 b2 * b2 * t)
                     .epsilon(1e-14));
}

TEST_CASE("linear covariance series branch joins the direct branch") {
  // beta*t straddles the series switch at 1e-3; each branch must match an
  // extended-precision evaluation of the same closed form at its own beta
  for (const double beta : {0.99e-3, 1.01e-3}) {
    const std::array<std::array<double, 2>, 2> A{{{0.0, 0.0}, {1.0, -beta}}};
    const Cov2 c = analytic_linear_covariance(A, {1.0, 0.0}, 1.0);
    const long double x = static_cast<long double>(beta);
    const long double e1 = -std::expm1l(-x) / x;
    const long double e2 = -std::expm1l(-2 * x) / (2 * x);
    const long double g1 = 1.0L - e1;
    const long double g2 = 1.0L - 2 * e1 + e2;
    CHECK(c.s12 == doctest::Approx(static_cast<double>(g1 / x)).epsilon(5e-9));
    CHECK(c.s22 == doctest::Approx(static_cast<double>(g2 / (x * x))).epsilon(5e-9));
  }
}

TEST_CASE("linear covariance argument guards") {
  CHECK(throws_code(Errc::InvalidArgument, [] {
    analytic_linear_covariance({{{0.0, 1.0}, {1.0, -1.0}}}, {1.0, 0.0}, 1.0);
  }));
  CHECK(throws_code(Errc::InvalidArgument, [] {
    analytic_linear_covariance({{{0.0, 0.0}, {1.0, 0.5}}}, {1.0, 0.0}, 1.0);
  }));
  CHECK(throws_code(Errc::InvalidArgument,
                    [] { analytic_linear_covariance(unitA, {1.0, 0.0}, -1.0); }));
  const Cov2 c = analytic_linear_covariance(unitA, {1.0, 0.0}, 0.0);
  CHECK(c.s11 == 0.0);
  CHECK(c.s12 == 0.0);
  CHECK(c.s22 == 0.0);
}

TEST_CASE("exact sampler reproduces the transition covariance") {
  const std::vector<double> grid{0.0, 1.0};
  const int n = 20000;
  double s1 = 0, s2 = 0, s11 = 0, s12 = 0, s22 = 0;
  for (int r = 0; r < n; ++r) {
    const SdePath p = simulate_U(1.0, 1.0, 1.0, {0.0, 0.0}, grid, exact_cfg(10, r));
    const double u1 = p.comps[1][0], u2 = p.comps[1][1];
    s1 += u1;
    s2 += u2;
    s11 += u1 * u1;
    s12 += u1 * u2;
    s22 += u2 * u2;
  }
  const double m1 = s1 / n, m2 = s2 / n;
  CHECK(std::fabs(m1) < 5.0 / std::sqrt(double(n)));
  CHECK(std::fabs(m2) < 5.0 * std::sqrt(0.1681 / n));
  CHECK(std::fabs(s11 / n - m1 * m1 - 1.0) < 0.05);
  CHECK(std::fabs(s12 / n - m1 * m2 - 0.36787944117144233) < 0.0195);
  CHECK(std::fabs(s22 / n - m2 * m2 - 0.1680912407245783) < 0.0084);
}

TEST_CASE("exact sampler composes over intermediate grid points") {
  // marginal law at t = 1 must not depend on the grid refinement
  const std::vector<double> grid{0.0, 0.3, 0.65, 1.0};
  const int n = 20000;
  double s11 = 0, s12 = 0, s22 = 0;
  for (int r = 0; r < n; ++r) {
    const SdePath p = simulate_U(1.0, 1.0, 1.0, {0.0, 0.0}, grid, exact_cfg(11, r));
    const double u1 = p.comps[3][0], u2 = p.comps[3][1];
    s11 += u1 * u1;
    s12 += u1 * u2;
    s22 += u2 * u2;
  }
  CHECK(std::fabs(s11 / n - 1.0) < 0.05);
  CHECK(std::fabs(s12 / n - 0.36787944117144233) < 0.0195);
  CHECK(std::fabs(s22 / n - 0.1680912407245783) < 0.0084);
}

TEST_CASE("exact sampler flow with zero noise is deterministic") {
  const std::vector<double> grid{0.0, 1.0};
  const SdePath p = simulate_U(2.0, 1.0, 0.0, {1.0, 0.5}, grid, exact_cfg(3, 0));
  CHECK(p.comps[1][0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p.comps[1][1] == doctest::Approx(1.4481808382428366).epsilon(1e-13));
}

TEST_CASE("euler substep updates the slave component from the old state") {
  SdeConfig cfg = exact_cfg(5, 9);
  cfg.sampler = SdeSampler::EulerMaruyama;
  cfg.dt = 0.25;
  const std::vector<double> grid{0.0, 0.25};
  const SdePath p = simulate_U(1.0, 1.0, 1.0, {0.0, 0.0}, grid, cfg);
  // one substep from (0,0): drift of u2 vanishes, diffusion moves u1 only
  CHECK(p.comps[1][1] == 0.0);
  CHECK(p.comps[1][0] != 0.0);
  CHECK(p.comps[1][0] == doctest::Approx(p.dB[0]).epsilon(1e-14));  // sigma = 1
}

TEST_CASE("euler endpoint law approaches the exact one") {
  SdeConfig cfg = exact_cfg(6, 0);
  cfg.sampler = SdeSampler::EulerMaruyama;
  cfg.dt = 1e-3;
  const std::vector<double> grid{0.0, 1.0};
  const int n = 5000;
  double s22 = 0;
  for (int r = 0; r < n; ++r) {
    cfg.stream = r;
    const SdePath p = simulate_U(1.0, 1.0, 1.0, {0.0, 0.0}, grid, cfg);
    s22 += p.comps[1][1] * p.comps[1][1];
  }
  CHECK(std::fabs(s22 / n - 0.1680912407245783) < 5.0 * 0.1681 * std::sqrt(2.0 / n));
}

TEST_CASE("V is the U recursion with the compartment-3 clock") {
  const std::vector<double> grid{0.0, 0.4, 1.0, 2.0};
  const SdePath u = simulate_U(1.0, 0.7, 1.5, {0.0, 0.0}, grid, exact_cfg(77, 13));
  const SdePath v = simulate_V(1.0, 0.7, 1.5, {0.0, 0.0}, grid, exact_cfg(77, 13));
  REQUIRE(u.comps.size() == v.comps.size());
  for (std::size_t i = 0; i < u.comps.size(); ++i) {
    CHECK(u.comps[i][0] == v.comps[i][0]);
    CHECK(u.comps[i][1] == v.comps[i][1]);
  }
}

TEST_CASE("W2 literal variance matches tau2 y2(t) t") {
  const std::vector<double> grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  const int n = 20000;
  double s = 0, ssq = 0;
  for (int r = 0; r < n; ++r) {
    const SdePath p =
        simulate_W2(1.0, 1.0, 1.0, 0.0, grid, exact_cfg(12, r), W2Mode::Literal);
    const double w = p.comps[5][0];
    s += w;
    ssq += w * w;
  }
  const double mean = s / n;
  const double var = ssq / n - mean * mean;
  // tau2 y2(1) * 1 = 1 - e^-1
  CHECK(std::fabs(var - 0.6321205588285577) < 0.032);
  CHECK(std::fabs(mean) < 5.0 * std::sqrt(0.6321 / n));
}

TEST_CASE("W2 time-changed variance matches the integrated intensity") {
  const std::vector<double> grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  const int n = 20000;
  double ssq = 0;
  for (int r = 0; r < n; ++r) {
    const SdePath p =
        simulate_W2(1.0, 1.0, 1.0, 0.0, grid, exact_cfg(14, r), W2Mode::TimeChanged);
    ssq += p.comps[5][0] * p.comps[5][0];
  }
  // int_0^1 tau2 y2 = e^-1
  CHECK(std::fabs(ssq / n - 0.36787944117144233) < 0.0190);
}

TEST_CASE("both W2 modes ride the same Brownian increments") {
  const std::vector<double> grid{0.0, 0.5, 1.0, 1.5};
  const SdePath lit =
      simulate_W2(1.0, 2.0, 1.0, 0.5, grid, exact_cfg(9, 3), W2Mode::Literal);
  const SdePath tc =
      simulate_W2(1.0, 2.0, 1.0, 0.5, grid, exact_cfg(9, 3), W2Mode::TimeChanged);
  REQUIRE(lit.dB.size() == tc.dB.size());
  for (std::size_t i = 0; i < lit.dB.size(); ++i) CHECK(lit.dB[i] == tc.dB[i]);
}

TEST_CASE("U and W2 drivers are independent streams") {
  const std::vector<double> grid{0.0, 0.5, 1.0};
  const SdePath u = simulate_U(1.0, 1.0, 1.0, {0.0, 0.0}, grid, exact_cfg(9, 3));
  const SdePath w = simulate_W2(1.0, 1.0, 1.0, 0.0, grid, exact_cfg(9, 3));
  CHECK(u.dB[0] != w.dB[0]);
}

TEST_CASE("SDE grid validation") {
  const SdeConfig cfg = exact_cfg(0, 0);
  CHECK(throws_code(Errc::InvalidArgument,
                    [&] { simulate_U(1, 1, 1, {0, 0}, {}, cfg); }));
  CHECK(throws_code(Errc::InvalidArgument,
                    [&] { simulate_U(1, 1, 1, {0, 0}, {0.0, 0.0}, cfg); }));
  CHECK(throws_code(Errc::InvalidArgument,
                    [&] { simulate_U(1, 1, 1, {0, 0}, {-0.5, 0.5}, cfg); }));
  CHECK(throws_code(Errc::InvalidArgument,
                    [&] { simulate_W2(1, 1, 1, 0, {0.5, 1.0}, cfg); }));
  CHECK(throws_code(Errc::NonPositiveRate,
                    [&] { simulate_U(0.0, 1, 1, {0, 0}, {0.0, 1.0}, cfg); }));
}

TEST_CASE("expansion amplitudes, production design") {
  const ModelParams p = validate_params(1, 1, 1, 0.55, 0.8, 2000);
  const DerivedRates r = derive_rates(p);
  const LimitCurveY y = make_limit_y(1.0, 0.0, 1.0, 1.0);
  const LimitCurveZ z = make_limit_z(1.0, 0.0, 1.0, 1.0, 1.0);
  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  const SdePath u = simulate_U(1, 1, 1, {0, 0}, grid, exact_cfg(2, 0));
  const SdePath w = simulate_W2(1, 1, 1, 0, grid, exact_cfg(2, 0));
  const SdePath v = simulate_V(1, 1, 1, {0, 0}, grid, exact_cfg(2, 0));

  // absolute times that land exactly on the s = 0.5 grid node
  const double tAbs2 = 0.5 * r.kGamma2;
  const ExpansionTerms e2 = expansion_N2(p, y, u, w, tAbs2);
  CHECK(e2.deterministic ==
        doctest::Approx(130796.61157636695 * y(0.5)[1]).epsilon(1e-12));
  CHECK(e2.gaussian ==
        doctest::Approx(23651.82975239417 * u.comps[2][1]).epsilon(1e-12));
  CHECK(e2.martingale ==
        doctest::Approx(2924.7011471139244 * w.comps[2][0]).epsilon(1e-12));
  CHECK(e2.total == doctest::Approx(e2.deterministic + e2.gaussian + e2.martingale)
                        .epsilon(1e-15));

  const double tAbs3 = 0.5 * r.kGamma3;
  const ExpansionTerms e3 = expansion_N3(p, z, v, tAbs3);
  CHECK(e3.deterministic ==
        doctest::Approx(57203221.79915597 * z(0.5)[1]).epsilon(1e-12));
  CHECK(e3.gaussian ==
        doctest::Approx(26749612.199056882 * v.comps[2][1]).epsilon(1e-12));
  CHECK(e3.martingale == 0.0);
}

TEST_CASE("expansion rejects paths that do not start at the origin") {
  const ModelParams p = validate_params(1, 1, 1, 0.5, 0.75, 16);
  const LimitCurveY y = make_limit_y(1.0, 0.0, 1.0, 1.0);
  const std::vector<double> grid{0.0, 1.0};
  const SdePath off = simulate_U(1, 1, 1, {1.0, 0.0}, grid, exact_cfg(0, 0));
  const SdePath w = simulate_W2(1, 1, 1, 0, grid, exact_cfg(0, 0));
  CHECK(throws_code(Errc::InvalidArgument, [&] { expansion_N2(p, y, off, w, 0.5); }));
}

TEST_CASE("expansion time must lie in the path span") {
  const ModelParams p = validate_params(1, 1, 1, 0.5, 0.75, 16);
  const DerivedRates r = derive_rates(p);
  const LimitCurveY y = make_limit_y(1.0, 0.0, 1.0, 1.0);
  const std::vector<double> grid{0.0, 1.0};
  const SdePath u = simulate_U(1, 1, 1, {0, 0}, grid, exact_cfg(0, 0));
  const SdePath w = simulate_W2(1, 1, 1, 0, grid, exact_cfg(0, 0));
  // s = 2 is beyond the grid
  CHECK(throws_code(Errc::InvalidArgument,
                    [&] { expansion_N2(p, y, u, w, 2.0 * r.kGamma2); }));
}
