#include "analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <utility>

namespace hemo {

void for_each_replica(int n, int threads, const std::function<void(int)>& f) {
  if (n <= 0) return;
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int r = 0; r < n; ++r) f(r);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr firstError = nullptr;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= n || failed.load()) return;
        try {
          f(r);
        } catch (...) {
          if (!failed.exchange(true)) firstError = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (firstError) std::rethrow_exception(firstError);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("HEMOSCALE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

EnsembleStats run_ensemble(const ModelParams& p, const PopulationState& initial,
                           const SimulationConfig& cfg, int nReplicas, ScaleKind scaling,
                           int threads) {
  if (nReplicas < 2) fail(Errc::InvalidArgument, "ensemble needs at least 2 replicas");
  EnsembleStats st;
  st.scaling = scaling;
  st.grid = cfg.sampleGrid;
  st.nReplicas = static_cast<std::size_t>(nReplicas);
  st.replicaValues.resize(nReplicas);
  st.counts.resize(nReplicas);
  st.integrals.resize(nReplicas);
  st.initialStates.resize(nReplicas);
  st.finalStates.resize(nReplicas);
  st.eventCounts.resize(nReplicas);

  std::vector<std::string> replicaError(nReplicas);
  for_each_replica(nReplicas, resolve_threads(threads), [&](int r) {
    SimulationConfig c = cfg;
    c.stream = static_cast<std::uint64_t>(r);
    const Trajectory traj = simulate_exact(p, initial, c);
    if (traj.truncated) replicaError[r] = "maxEvents guard tripped";
    const RescaledPath path = rescale(traj, scaling);
    st.replicaValues[r] = path.comps;
    st.counts[r] = traj.channelCounts;
    st.integrals[r] = traj.rateIntegrals;
    st.initialStates[r] = traj.initial;
    st.finalStates[r] = traj.finalState;
    st.eventCounts[r] = traj.eventCount;
  });
  for (int r = 0; r < nReplicas; ++r)
    if (!replicaError[r].empty()) {
      st.anyTruncated = true;
      fail(Errc::MaxEventsExceeded,
           "replica " + std::to_string(r) + ": " + replicaError[r]);
    }

  const std::size_t G = cfg.sampleGrid.size();
  const std::size_t n = st.nReplicas;
  std::vector<double> column(n), sorted;
  for (int comp = 0; comp < 3; ++comp) {
    st.mean[comp].resize(G);
    st.variance[comp].resize(G);
    st.stderror[comp].resize(G);
    st.q05[comp].resize(G);
    st.q25[comp].resize(G);
    st.q50[comp].resize(G);
    st.q75[comp].resize(G);
    st.q95[comp].resize(G);
    for (std::size_t g = 0; g < G; ++g) {
      for (std::size_t r = 0; r < n; ++r) column[r] = st.replicaValues[r][g][comp];
      const double mean = pairwise_sum(column) / static_cast<double>(n);
      std::vector<double> sq(n);
      for (std::size_t r = 0; r < n; ++r) {
        const double d = column[r] - mean;
        sq[r] = d * d;
      }
      const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
      st.mean[comp][g] = mean;
      st.variance[comp][g] = var;
      st.stderror[comp][g] = std::sqrt(var / static_cast<double>(n));
      sorted = column;
      std::sort(sorted.begin(), sorted.end());
      auto quant = [&](double q) {
        const double pos = q * static_cast<double>(n - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double w = pos - static_cast<double>(lo);
        return lo + 1 < n ? (1 - w) * sorted[lo] + w * sorted[lo + 1] : sorted[lo];
      };
      st.q05[comp][g] = quant(0.05);
      st.q25[comp][g] = quant(0.25);
      st.q50[comp][g] = quant(0.50);
      st.q75[comp][g] = quant(0.75);
      st.q95[comp][g] = quant(0.95);
    }
  }
  double events = 0;
  for (std::size_t r = 0; r < n; ++r) events += static_cast<double>(st.eventCounts[r]);
  st.totalEvents = events;

  const DerivedRates dr = derive_rates(p);
  const double d1 = static_cast<double>(p.K);
  const bool overK = scaling == ScaleKind::XOverK;
  st.initialRescaled = {static_cast<double>(initial.n1) / d1,
                        static_cast<double>(initial.n2) / (overK ? d1 : dr.n2Scale),
                        static_cast<double>(initial.n3) / (overK ? d1 : dr.n3Scale)};
  return st;
}

double OccupationHistogram::totalMass() const {
  double s = underflow + overflow;
  for (double m : mass) s += m;
  return s;
}

namespace {

// integrates the piecewise-constant (left-limit) grid path over [t0, t1],
// calling sink(value, dt) per constant stretch
template <class Sink>
void integrate_path(const RescaledPath& path, int comp, double t0, double t1, Sink&& sink) {
  const auto& g = path.grid;
  if (g.empty()) fail(Errc::EmptyWindow, "path has no grid points");
  if (!(t1 > t0)) fail(Errc::EmptyWindow, "window must have positive length");
  if (t0 < g.front() - 1e-12 || t1 > g.back() + 1e-12)
    fail(Errc::EmptyWindow, "window outside path span");
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double lo = g[i];
    const double hi = i + 1 < g.size() ? g[i + 1] : t1;
    const double a = std::max(lo, t0);
    const double b = std::min(hi, t1);
    if (b > a) sink(path.comps[i][comp], b - a);
    if (hi >= t1) break;
  }
}

}  // namespace

OccupationHistogram occupation_measure(const RescaledPath& path,
                                       const std::vector<double>& edges, double t0,
                                       double t1) {
  if (path.kind != ScaleKind::Z)
    fail(Errc::ScaleMismatch, "occupation measure expects a Z-scaled path");
  if (edges.size() < 2) fail(Errc::InvalidArgument, "need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      fail(Errc::InvalidArgument, "bin edges must be strictly increasing");
  OccupationHistogram h;
  h.edges = edges;
  h.mass.assign(edges.size() - 1, 0.0);
  h.window0 = t0;
  h.window1 = t1;
  integrate_path(path, 1, t0, t1, [&](double v, double dt) {
    if (v < edges.front()) {
      h.underflow += dt;
    } else if (v >= edges.back()) {
      h.overflow += dt;
    } else {
      const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
      h.mass[static_cast<std::size_t>(it - h.edges.begin()) - 1] += dt;
    }
  });
  return h;
}

double band_fraction(const RescaledPath& path, int comp, double lo, double hi, double t0,
                     double t1) {
  double inBand = 0;
  integrate_path(path, comp, t0, t1, [&](double v, double dt) {
    if (v >= lo && v <= hi) inBand += dt;
  });
  return inBand / (t1 - t0);
}

CompensatorReport compensator_check(const EnsembleStats& st, const ModelParams& claimed) {
  if (st.nReplicas < 30)
    fail(Errc::InvalidArgument, "compensator check needs at least 30 replicas");
  const DerivedRates r = derive_rates(claimed);
  const std::size_t n = st.nReplicas;
  CompensatorReport rep;
  rep.nReplicas = n;

  auto zscore = [&](const std::vector<double>& resid, double* meanOut) {
    const double mean = pairwise_sum(resid) / static_cast<double>(n);
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = resid[i] - mean;
      sq[i] = d * d;
    }
    const double sd = std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1));
    if (meanOut) *meanOut = mean;
    if (sd == 0.0) return mean == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return mean / (sd / std::sqrt(static_cast<double>(n)));
  };

  std::vector<double> resid(n);
  for (int c = 0; c < kNumChannels; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& I = st.integrals[i];
      double comp = 0;
      switch (c) {
        case 0:
        case 1:
          comp = 0.5 * claimed.tau1 * I[0];
          break;
        case 2:
          comp = claimed.tau2 * r.p2R * I[1];
          break;
        case 3:
          comp = claimed.tau2 * r.p2D * I[1];
          break;
        case 4:
          comp = r.d3 * I[2];
          break;
      }
      resid[i] = static_cast<double>(st.counts[i][c]) - comp;
    }
    rep.z[c] = zscore(resid, &rep.meanResid[c]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double dn1 = static_cast<double>(st.finalStates[i].n1 - st.initialStates[i].n1);
    resid[i] = dn1 * dn1 - claimed.tau1 * st.integrals[i][0];
  }
  rep.zBracket1 = zscore(resid, nullptr);
  return rep;
}

std::size_t OracleDistribution::index(std::int64_t n1, std::int64_t n2,
                                      std::int64_t n3) const {
  return static_cast<std::size_t>((n1 * dims[1] + n2) * dims[2] + n3);
}

double OracleDistribution::expectation(int comp) const {
  double s = 0;
  for (std::int64_t a = 0; a < dims[0]; ++a)
    for (std::int64_t b = 0; b < dims[1]; ++b)
      for (std::int64_t c = 0; c < dims[2]; ++c) {
        const double w = prob[index(a, b, c)];
        s += w * static_cast<double>(comp == 0 ? a : comp == 1 ? b : c);
      }
  return s;
}

OracleDistribution uniformization_oracle(const ModelParams& p,
                                         const PopulationState& initial, double t,
                                         const std::array<std::int64_t, 3>& dims,
                                         double leakTolerance) {
  if (!(t >= 0)) fail(Errc::InvalidArgument, "t must be non-negative");
  for (auto d : dims)
    if (d < 1) fail(Errc::InvalidArgument, "truncation bounds must be positive");
  const std::size_t NS =
      static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
      static_cast<std::size_t>(dims[2]);
  if (NS > 2'000'000)
    fail(Errc::InvalidArgument, "truncated state space too large to enumerate");
  if (initial.n1 >= dims[0] || initial.n2 >= dims[1] || initial.n3 >= dims[2])
    fail(Errc::InvalidArgument, "initial state outside truncation box");
  const DerivedRates r = derive_rates(p);

  OracleDistribution out;
  out.dims = dims;

  // sparse transition structure: per state, outgoing (target, rate); targets
  // outside the box lose their mass, making the semigroup defective
  std::vector<std::uint32_t> arcTo;
  std::vector<double> arcRate;
  std::vector<std::uint32_t> rowStart(NS + 1, 0);
  std::vector<double> outRate(NS, 0.0);
  arcTo.reserve(NS * 4);
  arcRate.reserve(NS * 4);

  double lambda = 0;
  std::size_t s = 0;
  for (std::int64_t a = 0; a < dims[0]; ++a)
    for (std::int64_t b = 0; b < dims[1]; ++b)
      for (std::int64_t c = 0; c < dims[2]; ++c, ++s) {
        rowStart[s] = static_cast<std::uint32_t>(arcTo.size());
        const ChannelRates cr = channel_rates(PopulationState{a, b, c}, p, r);
        const std::array<std::array<std::int64_t, 3>, kNumChannels> delta{
            {{1, 0, 0}, {-1, 2, 0}, {0, 1, 0}, {0, -1, 2}, {0, 0, -1}}};
        double total = 0;
        for (int ch = 0; ch < kNumChannels; ++ch) {
          if (cr[ch] <= 0) continue;
          total += cr[ch];
          const std::int64_t m1 = a + delta[ch][0];
          const std::int64_t m2 = b + delta[ch][1];
          const std::int64_t m3 = c + delta[ch][2];
          if (m1 >= 0 && m1 < dims[0] && m2 >= 0 && m2 < dims[1] && m3 >= 0 &&
              m3 < dims[2]) {
            arcTo.push_back(static_cast<std::uint32_t>(out.index(m1, m2, m3)));
            arcRate.push_back(cr[ch]);
          }
        }
        outRate[s] = total;
        lambda = std::max(lambda, total);
      }
  rowStart[NS] = static_cast<std::uint32_t>(arcTo.size());

  out.lambda = lambda;
  std::vector<double> v(NS, 0.0), pv(NS, 0.0), acc(NS, 0.0);
  v[out.index(initial.n1, initial.n2, initial.n3)] = 1.0;
  if (lambda == 0.0 || t == 0.0) {
    out.prob = v;
    out.leak = 0;
    out.terms = 0;
    return out;
  }

  const double mu = lambda * t;
  if (mu > 600.0)
    fail(Errc::InvalidArgument,
         "uniformization horizon too large (lambda*t > 600); shrink the instance");
  // Poisson(mu) weights forward from n = 0; stop once the tail is < 1e-13
  double logw = -mu;  // log weight at n = 0
  int n = 0;
  double cumulative = 0;
  const int nMax = static_cast<int>(mu + 12 * std::sqrt(mu) + 60);
  for (;;) {
    const double w = std::exp(logw);
    cumulative += w;
    for (std::size_t i = 0; i < NS; ++i) acc[i] += w * v[i];
    if (n >= nMax || (cumulative > 1.0 - 1e-13 && n > mu)) break;
    // v <- P v with P = I + Q/lambda (column action: redistribute mass forward)
    for (std::size_t i = 0; i < NS; ++i) pv[i] = v[i] * (1.0 - outRate[i] / lambda);
    for (std::size_t i = 0; i < NS; ++i) {
      const double vi = v[i];
      if (vi == 0.0) continue;
      const std::uint32_t lo = rowStart[i], hi = rowStart[i + 1];
      for (std::uint32_t k = lo; k < hi; ++k) pv[arcTo[k]] += vi * arcRate[k] / lambda;
    }
    v.swap(pv);
    ++n;
    logw += std::log(mu) - std::log(static_cast<double>(n));
  }
  out.terms = n;
  out.prob = std::move(acc);
  double sum = pairwise_sum(out.prob);
  out.leak = std::max(0.0, 1.0 - sum);
  if (out.leak > leakTolerance)
    fail(Errc::TruncationLeakTooLarge,
         "truncation leak " + std::to_string(out.leak) + " exceeds tolerance");
  return out;
}

double tv_distance(const OracleDistribution& oracle,
                   const std::vector<PopulationState>& samples) {
  if (samples.empty()) fail(Errc::InvalidArgument, "no samples");
  std::vector<double> emp(oracle.prob.size(), 0.0);
  double outOfBox = 0;
  const double w = 1.0 / static_cast<double>(samples.size());
  for (const auto& s : samples) {
    if (s.n1 < oracle.dims[0] && s.n2 < oracle.dims[1] && s.n3 < oracle.dims[2])
      emp[oracle.index(s.n1, s.n2, s.n3)] += w;
    else
      outOfBox += w;
  }
  double l1 = std::fabs(outOfBox - oracle.leak);
  for (std::size_t i = 0; i < emp.size(); ++i) l1 += std::fabs(emp[i] - oracle.prob[i]);
  return 0.5 * l1;
}

double tv_noise_floor(const OracleDistribution& oracle, std::size_t n) {
  double s = 0;
  for (double p : oracle.prob)
    if (p > 0 && p < 1) s += std::sqrt(p * (1 - p));
  // the escape atom is a category of the distance too
  if (oracle.leak > 0 && oracle.leak < 1) s += std::sqrt(oracle.leak * (1 - oracle.leak));
  return 0.5 * std::sqrt(2.0 / (3.14159265358979323846 * static_cast<double>(n))) * s;
}

namespace {

// Student-t 0.975 quantiles; linear in 1/df between table rows above df = 30
double t975(std::size_t df) {
  static const std::pair<std::size_t, double> table[] = {
      {1, 12.706204736432095}, {2, 4.302652729696142},  {3, 3.182446305284263},
      {4, 2.7764451051977987}, {5, 2.570581835636314},  {6, 2.4469118511449692},
      {8, 2.306004135204166},  {10, 2.2281388519649385}, {20, 2.0859634472658364},
      {30, 2.0422724563012373}};
  if (df == 0) return std::numeric_limits<double>::infinity();
  for (const auto& [d, v] : table)
    if (df == d) return v;
  if (df > 30) {
    // 1/df interpolation toward the normal quantile
    const double z = 1.959963984540054;
    return z + (2.0422724563012373 - z) * (30.0 / static_cast<double>(df));
  }
  // between tabulated rows
  const std::pair<std::size_t, double>* lo = &table[0];
  const std::pair<std::size_t, double>* hi = &table[0];
  for (const auto& row : table) {
    if (row.first < df) lo = &row;
    if (row.first > df) {
      hi = &row;
      break;
    }
  }
  const double w = static_cast<double>(df - lo->first) /
                   static_cast<double>(hi->first - lo->first);
  return (1 - w) * lo->second + w * hi->second;
}

}  // namespace

ScalingFit scaling_fit(const std::vector<std::pair<double, double>>& points) {
  std::vector<double> ks;
  for (const auto& [k, stat] : points) {
    if (!(stat > 0) || !(k > 0))
      fail(Errc::DegenerateDesign, "scaling fit needs positive K and statistics");
    ks.push_back(k);
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.size() < 3)
    fail(Errc::DegenerateDesign, "scaling fit needs at least 3 distinct K values");

  const std::size_t n = points.size();
  ScalingFit fit;
  fit.n = n;
  std::vector<double> lx(n), ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    fit.K.push_back(points[i].first);
    fit.statistic.push_back(points[i].second);
    lx[i] = std::log(points[i].first);
    ly[i] = std::log(points[i].second);
  }
  const double mx = pairwise_sum(lx) / static_cast<double>(n);
  const double my = pairwise_sum(ly) / static_cast<double>(n);
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ly[i] - fit.slope * lx[i] - fit.intercept;
    ssr += e * e;
  }
  const std::size_t df = n - 2;
  fit.residStderr = df > 0 ? std::sqrt(ssr / static_cast<double>(df)) : 0.0;
  fit.slopeStderr = df > 0 ? fit.residStderr / std::sqrt(sxx) : 0.0;
  const double tq = t975(df);
  fit.ciLow = fit.slope - tq * fit.slopeStderr;
  fit.ciHigh = fit.slope + tq * fit.slopeStderr;
  return fit;
}

double v2_sup_norm(const RescaledPath& path, const ModelParams& p) {
  if (path.kind != ScaleKind::Z)
    fail(Errc::ScaleMismatch, "v2_sup_norm expects a Z-scaled path");
  if (path.comps.empty()) return 0.0;
  const double lnK = std::log(static_cast<double>(p.K));
  const double amp = std::exp((0.5 * (1 - p.gamma3) - (p.gamma3 - p.gamma2)) * lnK);
  const double z20 = path.comps.front()[1];
  double sup = 0;
  for (const auto& c : path.comps) sup = std::max(sup, std::fabs(c[1] - z20));
  return amp * sup;
}

namespace {

void compare_component(const EnsembleStats& st, int comp,
                       const std::function<double(double)>& ref, LimitComparison& out) {
  const std::size_t G = st.grid.size();
  std::vector<double> refs(G);
  for (std::size_t g = 0; g < G; ++g) refs[g] = ref(st.grid[g]);
  double supMean = 0;
  for (std::size_t g = 0; g < G; ++g)
    supMean = std::max(supMean, std::fabs(st.mean[comp][g] - refs[g]));
  std::vector<double> sups(st.nReplicas, 0.0);
  for (std::size_t r = 0; r < st.nReplicas; ++r) {
    double s = 0;
    for (std::size_t g = 0; g < G; ++g)
      s = std::max(s, std::fabs(st.replicaValues[r][g][comp] - refs[g]));
    sups[r] = s;
  }
  std::sort(sups.begin(), sups.end());
  const std::size_t n = sups.size();
  out.supMeanDev[comp] = supMean;
  out.medianSupDev[comp] =
      n % 2 == 1 ? sups[n / 2] : 0.5 * (sups[n / 2 - 1] + sups[n / 2]);
}

}  // namespace

LimitComparison limit_comparison(const EnsembleStats& st, const LimitCurveY& curve) {
  if (st.scaling != ScaleKind::Y)
    fail(Errc::GridMismatch, "Y-curve comparison expects Y-scaled ensemble");
  LimitComparison out;
  compare_component(st, 0, [&](double t) { return curve(t)[0]; }, out);
  compare_component(st, 1, [&](double t) { return curve(t)[1]; }, out);
  const double x3 = st.initialRescaled[2];
  compare_component(st, 2, [&](double) { return x3; }, out);
  return out;
}

LimitComparison limit_comparison(const EnsembleStats& st, const LimitCurveZ& curve) {
  if (st.scaling != ScaleKind::Z)
    fail(Errc::GridMismatch, "Z-curve comparison expects Z-scaled ensemble");
  LimitComparison out;
  compare_component(st, 0, [&](double t) { return curve(t)[0]; }, out);
  compare_component(st, 1, [&](double) { return curve.z2Star; }, out);
  compare_component(st, 2, [&](double t) { return curve(t)[1]; }, out);
  return out;
}

}  // namespace hemo
