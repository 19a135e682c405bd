#pragma once
#include <array>
#include <cstdint>

#include "error.hpp"

namespace hemo {

// Parameter tuple of the three-compartment process. gamma ordering and K >= 2
// are enforced by validate_params; K = 1 (p2R = 0) only via degenerate flag.
struct ModelParams {
  double tau1 = 1.0;
  double tau2 = 1.0;
  double tau3 = 1.0;
  double gamma2 = 0.5;
  double gamma3 = 0.75;
  std::int64_t K = 2;
  bool degenerate = false;
};

// Rates induced by ModelParams. Powers of K are computed once via exp/ln and
// cached; the hot path never recomputes them.
struct DerivedRates {
  double p2R = 0;       // renewal probability, compartment 2
  double p2D = 0;       // differentiation probability, p2R + p2D = 1
  double d3 = 0;        // death rate, tau3 K^-gamma3
  double kGamma2 = 0;   // K^gamma2
  double kGamma3 = 0;   // K^gamma3
  double kInvGamma2 = 0; // K^-gamma2 = p2D - p2R
  double n2Scale = 0;   // K^(1+gamma2)
  double n3Scale = 0;   // K^(1+gamma2+gamma3)
};

struct PopulationState {
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  std::int64_t n3 = 0;

  friend bool operator==(const PopulationState&, const PopulationState&) = default;
  std::int64_t totalMass() const { return n1 + n2 + n3; }
};

enum class EventKind : int {
  Renewal1 = 0,
  Differentiation1 = 1,
  Renewal2 = 2,
  Differentiation2 = 3,
  Death3 = 4,
};

inline constexpr int kNumChannels = 5;
using ChannelRates = std::array<double, kNumChannels>;

ModelParams validate_params(double tau1, double tau2, double tau3, double gamma2,
                            double gamma3, std::int64_t K, bool degenerate = false);

DerivedRates derive_rates(const ModelParams& p);

// (tau1/2 N1, tau1/2 N1, tau2 p2R N2, tau2 p2D N2, d3 N3)
ChannelRates channel_rates(const PopulationState& s, const ModelParams& p,
                           const DerivedRates& r);

PopulationState apply_event(const PopulationState& s, EventKind e);

struct EquilibriumOrders {
  double n1Star = 0;
  double n2Star = 0;
  double n3Star = 0;
};

EquilibriumOrders equilibrium_orders(const ModelParams& p, const DerivedRates& r,
                                     double n1Star);

}  // namespace hemo
