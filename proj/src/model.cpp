#include "model.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace hemo {

ModelParams validate_params(double tau1, double tau2, double tau3, double gamma2,
                            double gamma3, std::int64_t K, bool degenerate) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      fail(Errc::NonPositiveRate, std::string(name) + " must be strictly positive");
  };
  positive(tau1, "tau1");
  positive(tau2, "tau2");
  positive(tau3, "tau3");
  if (!(gamma2 > 0.0 && gamma2 < 1.0) || !(gamma3 > 0.0 && gamma3 < 1.0) ||
      !(gamma2 < gamma3))
    fail(Errc::ExponentOrderViolated, "exponents must satisfy 0 < gamma2 < gamma3 < 1");
  const std::int64_t minK = degenerate ? 1 : 2;
  if (K < minK)
    fail(Errc::ScaleTooSmall, "K must be >= 2 (K = 1 only with the degenerate flag)");
  return ModelParams{tau1, tau2, tau3, gamma2, gamma3, K, degenerate};
}

DerivedRates derive_rates(const ModelParams& p) {
  const double lnK = std::log(static_cast<double>(p.K));
  DerivedRates r;
  r.kGamma2 = std::exp(p.gamma2 * lnK);
  r.kGamma3 = std::exp(p.gamma3 * lnK);
  r.kInvGamma2 = std::exp(-p.gamma2 * lnK);
  r.p2D = 0.5 + 0.5 * r.kInvGamma2;
  r.p2R = 1.0 - r.p2D;
  r.d3 = p.tau3 * std::exp(-p.gamma3 * lnK);
  r.n2Scale = static_cast<double>(p.K) * r.kGamma2;
  r.n3Scale = r.n2Scale * r.kGamma3;
  return r;
}

ChannelRates channel_rates(const PopulationState& s, const ModelParams& p,
                           const DerivedRates& r) {
  const double n1 = static_cast<double>(s.n1);
  const double n2 = static_cast<double>(s.n2);
  const double n3 = static_cast<double>(s.n3);
  ChannelRates rates{0.5 * p.tau1 * n1, 0.5 * p.tau1 * n1, p.tau2 * r.p2R * n2,
                     p.tau2 * r.p2D * n2, r.d3 * n3};
  for (double v : rates)
    if (!std::isfinite(v)) fail(Errc::RateOverflow, "channel rate not representable");
  return rates;
}

PopulationState apply_event(const PopulationState& s, EventKind e) {
  PopulationState out = s;
  switch (e) {
    case EventKind::Renewal1:
      out.n1 += 1;
      return out;
    case EventKind::Differentiation1:
      if (s.n1 < 1) fail(Errc::IllegalEvent, "Differentiation1 with N1 = 0");
      out.n1 -= 1;
      out.n2 += 2;
      return out;
    case EventKind::Renewal2:
      out.n2 += 1;
      return out;
    case EventKind::Differentiation2:
      if (s.n2 < 1) fail(Errc::IllegalEvent, "Differentiation2 with N2 = 0");
      out.n2 -= 1;
      out.n3 += 2;
      return out;
    case EventKind::Death3:
      if (s.n3 < 1) fail(Errc::IllegalEvent, "Death3 with N3 = 0");
      out.n3 -= 1;
      return out;
  }
  fail(Errc::Internal, "unknown event kind");
}

EquilibriumOrders equilibrium_orders(const ModelParams& p, const DerivedRates& r,
                                     double n1Star) {
  if (!(n1Star > 0)) fail(Errc::InvalidArgument, "n1Star must be positive");
  EquilibriumOrders eq;
  eq.n1Star = n1Star;
  eq.n2Star = p.tau1 * n1Star / p.tau2 * r.kGamma2;
  eq.n3Star = 2.0 * r.p2D * p.tau2 * eq.n2Star / p.tau3 * r.kGamma3;
  return eq;
}

}  // namespace hemo
