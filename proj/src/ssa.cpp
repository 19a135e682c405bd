#include "ssa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rng.hpp"

namespace hemo {

namespace {

void check_grid(const SimulationConfig& cfg) {
  if (!(cfg.horizon >= 0) || !std::isfinite(cfg.horizon))
    fail(Errc::InvalidArgument, "horizon must be finite and non-negative");
  if (cfg.maxEvents <= 0) fail(Errc::InvalidArgument, "maxEvents must be positive");
  double prev = -1.0;
  for (double g : cfg.sampleGrid) {
    if (!(g >= 0.0) || g > cfg.horizon)
      fail(Errc::InvalidArgument, "sample grid point outside [0, horizon]");
    if (g <= prev && !(prev < 0.0))
      fail(Errc::InvalidArgument, "sample grid must be strictly increasing");
    prev = g;
  }
}

struct Recorder {
  Trajectory traj;
  std::size_t gi = 0;

  Recorder(const ModelParams& p, const DerivedRates& r, const PopulationState& init,
           const SimulationConfig& cfg) {
    traj.params = p;
    traj.rates = r;
    traj.initial = init;
    traj.timeScale = cfg.timeScale;
    traj.timeFactor = time_scale_factor(cfg.timeScale, r);
    traj.gridRescaled = cfg.sampleGrid;
    traj.gridAbsolute.reserve(cfg.sampleGrid.size());
    for (double g : cfg.sampleGrid) traj.gridAbsolute.push_back(g * traj.timeFactor);
    traj.states.resize(cfg.sampleGrid.size());
  }

  // next grid time not yet recorded; +inf once exhausted
  double nextGrid() const {
    return gi < traj.gridAbsolute.size() ? traj.gridAbsolute[gi]
                                         : std::numeric_limits<double>::infinity();
  }

  // record left limits at grid times in (lastT, t]; state held constant there
  void catchUp(double t, const PopulationState& s) {
    while (gi < traj.gridAbsolute.size() && traj.gridAbsolute[gi] <= t) {
      traj.states[gi] = s;
      ++gi;
    }
  }

  void finish(double t, const PopulationState& s, bool truncated) {
    if (!truncated) catchUp(std::nextafter(t, t + 1.0), s);
    traj.finalState = s;
    traj.terminalTime = t;
    traj.truncated = truncated;
    if (truncated) {  // keep only the recorded prefix
      traj.gridRescaled.resize(gi);
      traj.gridAbsolute.resize(gi);
      traj.states.resize(gi);
    }
  }
};

}  // namespace

double time_scale_factor(TimeScale s, const DerivedRates& r) {
  switch (s) {
    case TimeScale::Unit:
      return 1.0;
    case TimeScale::Gamma2:
      return r.kGamma2;
    case TimeScale::Gamma3:
      return r.kGamma3;
  }
  fail(Errc::Internal, "unknown time scale");
}

Trajectory simulate_exact(const ModelParams& p, const PopulationState& initial,
                          const SimulationConfig& cfg) {
  check_grid(cfg);
  if (initial.n1 < 0 || initial.n2 < 0 || initial.n3 < 0)
    fail(Errc::InvalidArgument, "initial populations must be non-negative");
  const DerivedRates r = derive_rates(p);
  Recorder rec(p, r, initial, cfg);
  const double horizonAbs = cfg.horizon * rec.traj.timeFactor;

  rng::Xoshiro256pp gen(cfg.seed, cfg.stream);
  std::int64_t n1 = initial.n1, n2 = initial.n2, n3 = initial.n3;
  double t = 0.0;
  double i1 = 0.0, i2 = 0.0, i3 = 0.0;
  auto& counts = rec.traj.channelCounts;
  std::int64_t events = 0;
  bool truncated = false;

  const double tau1 = p.tau1, tau2 = p.tau2, d3 = r.d3, p2R = r.p2R;
  double nextGrid = rec.nextGrid();

  for (;;) {
    const double f1 = tau1 * static_cast<double>(n1);  // both compartment-1 channels
    const double f2 = tau2 * static_cast<double>(n2);
    const double f3 = d3 * static_cast<double>(n3);
    const double total = f1 + f2 + f3;
    if (!(total > 0.0)) {  // absorbed at (0,0,0); state constant to horizon
      t = horizonAbs;
      break;
    }
    if (!std::isfinite(total)) fail(Errc::RateOverflow, "total jump rate overflow");

    const double dt = gen.exponential() / total;
    const double tNext = t + dt;
    if (tNext >= horizonAbs) {
      i1 += static_cast<double>(n1) * (horizonAbs - t);
      i2 += static_cast<double>(n2) * (horizonAbs - t);
      i3 += static_cast<double>(n3) * (horizonAbs - t);
      t = horizonAbs;
      break;
    }
    if (tNext >= nextGrid) {
      rec.catchUp(tNext, PopulationState{n1, n2, n3});
      nextGrid = rec.nextGrid();
    }
    i1 += static_cast<double>(n1) * dt;
    i2 += static_cast<double>(n2) * dt;
    i3 += static_cast<double>(n3) * dt;

    const double u = gen.uniform() * total;
    if (u < f1) {
      if (u + u < f1) {
        ++n1;
        ++counts[0];
      } else {
        --n1;
        n2 += 2;
        ++counts[1];
      }
    } else if (u < f1 + f2) {
      if (u < f1 + p2R * f2) {
        ++n2;
        ++counts[2];
      } else {
        --n2;
        n3 += 2;
        ++counts[3];
      }
    } else {
      --n3;
      ++counts[4];
    }
    t = tNext;
    if (++events >= cfg.maxEvents) {
      truncated = true;
      break;
    }
  }

  rec.traj.rateIntegrals = {i1, i2, i3};
  rec.traj.eventCount = events;
  rec.finish(t, PopulationState{n1, n2, n3}, truncated);
  return rec.traj;
}

Trajectory simulate_tau_leap(const ModelParams& p, const PopulationState& initial,
                             const SimulationConfig& cfg, const LeapConfig& leap) {
  check_grid(cfg);
  if (!(leap.epsilon > 0.0)) fail(Errc::InvalidArgument, "leap epsilon must be positive");
  if (initial.n1 < 0 || initial.n2 < 0 || initial.n3 < 0)
    fail(Errc::InvalidArgument, "initial populations must be non-negative");
  const DerivedRates r = derive_rates(p);
  Recorder rec(p, r, initial, cfg);
  const double horizonAbs = cfg.horizon * rec.traj.timeFactor;

  rng::Xoshiro256pp gen(cfg.seed, cfg.stream);
  std::int64_t n1 = initial.n1, n2 = initial.n2, n3 = initial.n3;
  double t = 0.0;
  double i1 = 0.0, i2 = 0.0, i3 = 0.0;
  auto& counts = rec.traj.channelCounts;
  std::int64_t events = 0;
  bool truncated = false;

  const double tau1 = p.tau1, tau2 = p.tau2, d3 = r.d3, p2R = r.p2R, p2D = r.p2D;

  while (t < horizonAbs) {
    const double dn1 = static_cast<double>(n1);
    const double dn2 = static_cast<double>(n2);
    const double dn3 = static_cast<double>(n3);
    const double a1 = 0.5 * tau1 * dn1;          // Renewal1
    const double a2 = a1;                        // Differentiation1
    const double a3 = tau2 * p2R * dn2;          // Renewal2
    const double a4 = tau2 * p2D * dn2;          // Differentiation2
    const double a5 = d3 * dn3;                  // Death3
    const double total = a1 + a2 + a3 + a4 + a5;
    if (!(total > 0.0)) {
      t = horizonAbs;
      break;
    }
    if (!std::isfinite(total)) fail(Errc::RateOverflow, "total jump rate overflow");

    if (total < leap.minRateForLeap) {
      // exact step
      const double dt = gen.exponential() / total;
      const double tNext = t + dt;
      if (tNext >= horizonAbs) {
        i1 += dn1 * (horizonAbs - t);
        i2 += dn2 * (horizonAbs - t);
        i3 += dn3 * (horizonAbs - t);
        t = horizonAbs;
        break;
      }
      rec.catchUp(tNext, PopulationState{n1, n2, n3});
      i1 += dn1 * dt;
      i2 += dn2 * dt;
      i3 += dn3 * dt;
      const double u = gen.uniform() * total;
      if (u < a1) {
        ++n1;
        ++counts[0];
      } else if (u < a1 + a2) {
        --n1;
        n2 += 2;
        ++counts[1];
      } else if (u < a1 + a2 + a3) {
        ++n2;
        ++counts[2];
      } else if (u < a1 + a2 + a3 + a4) {
        --n2;
        n3 += 2;
        ++counts[3];
      } else {
        --n3;
        ++counts[4];
      }
      t = tNext;
      if (++events >= cfg.maxEvents) {
        truncated = true;
        break;
      }
      continue;
    }

    // Cao two-term selection per component, g_i = 1:
    // tau <= min_i max(eps*x_i, 1) / |mu_i|, max(eps*x_i, 1)^2 / sigma2_i
    const double mu1 = a1 - a2;
    const double sg1 = a1 + a2;
    const double mu2 = 2.0 * a2 + a3 - a4;
    const double sg2 = 4.0 * a2 + a3 + a4;
    const double mu3 = 2.0 * a4 - a5;
    const double sg3 = 4.0 * a4 + a5;
    double step = horizonAbs - t;
    auto bound = [&](double x, double mu, double sg) {
      const double cap = std::max(leap.epsilon * x, 1.0);
      if (mu != 0.0) step = std::min(step, cap / std::fabs(mu));
      if (sg > 0.0) step = std::min(step, cap * cap / sg);
    };
    bound(dn1, mu1, sg1);
    bound(dn2, mu2, sg2);
    bound(dn3, mu3, sg3);

    for (;;) {
      const std::int64_t k1 = gen.poisson(a1 * step);
      const std::int64_t k2 = gen.poisson(a2 * step);
      const std::int64_t k3 = gen.poisson(a3 * step);
      const std::int64_t k4 = gen.poisson(a4 * step);
      const std::int64_t k5 = gen.poisson(a5 * step);
      const std::int64_t m1 = n1 + k1 - k2;
      const std::int64_t m2 = n2 + 2 * k2 + k3 - k4;
      const std::int64_t m3 = n3 + 2 * k4 - k5;
      if (m1 < 0 || m2 < 0 || m3 < 0) {
        step *= 0.5;  // negative excursion: reject and halve
        continue;
      }
      const double tNext = t + step;
      rec.catchUp(std::min(tNext, horizonAbs), PopulationState{n1, n2, n3});
      i1 += dn1 * step;
      i2 += dn2 * step;
      i3 += dn3 * step;
      counts[0] += k1;
      counts[1] += k2;
      counts[2] += k3;
      counts[3] += k4;
      counts[4] += k5;
      events += k1 + k2 + k3 + k4 + k5;
      n1 = m1;
      n2 = m2;
      n3 = m3;
      t = tNext;
      break;
    }
    if (events >= cfg.maxEvents) {
      truncated = true;
      break;
    }
  }

  rec.traj.rateIntegrals = {i1, i2, i3};
  rec.traj.eventCount = events;
  rec.finish(t, PopulationState{n1, n2, n3}, truncated);
  return rec.traj;
}

EventAccounting event_counts(const Trajectory& t) {
  return EventAccounting{t.channelCounts, t.rateIntegrals};
}

}  // namespace hemo
