#include "otc/valuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "otc/equilibrium.hpp"
#include "otc/error.hpp"

namespace otc {

namespace {

using T = State::Type;

std::size_t e_count(ModelKind kind, std::size_t K) { return kind == ModelKind::NonSegmented ? 1 : K; }

}  // namespace

std::vector<double> DeltaVector::flat() const {
  std::vector<double> out{delta0};
  out.insert(out.end(), delta_e.begin(), delta_e.end());
  out.insert(out.end(), delta_h.begin(), delta_h.end());
  out.insert(out.end(), delta_l.begin(), delta_l.end());
  return out;
}

DeltaVector DeltaVector::from_flat(ModelKind kind, int K, std::span<const double> flat) {
  const auto k = static_cast<std::size_t>(K);
  const std::size_t ne = e_count(kind, k);
  if (flat.size() != 1 + ne + 2 * k) throw Error(ErrorCode::InvalidArgument, "Delta vector length mismatch");
  DeltaVector d;
  d.kind = kind;
  d.delta0 = flat[0];
  d.delta_e.assign(flat.begin() + 1, flat.begin() + static_cast<std::ptrdiff_t>(1 + ne));
  d.delta_h.assign(flat.begin() + static_cast<std::ptrdiff_t>(1 + ne),
                   flat.begin() + static_cast<std::ptrdiff_t>(1 + ne + k));
  d.delta_l.assign(flat.begin() + static_cast<std::ptrdiff_t>(1 + ne + k), flat.end());
  return d;
}

LinearSystem build_matrix_nonseg(const MarketParams& p, const StateDistribution& mu) {
  if (p.kind() != ModelKind::NonSegmented || mu.kind() != ModelKind::NonSegmented)
    throw Error(ErrorCode::KindMismatch, "build_matrix_nonseg needs the non-segmented model");
  const auto& val = p.valuation();
  const std::size_t K = p.assets();
  const std::size_t n = 2 * K + 2;
  const double r = val.r;
  const double q = val.q;
  const double v = mu.h_n();

  std::vector<double> Mi(K), psi_u(K), psi_d(K);
  for (std::size_t i = 0; i < K; ++i) {
    Mi[i] = p.lambda()[i] * mu.li_o(i) * (1.0 - q);
    psi_u[i] = p.gamma_ui()[i] + p.lambda()[i] * v * q;
    psi_d[i] = p.gamma_di()[i] + Mi[i];
  }

  LinearSystem sys{Matrix(n, n), std::vector<double>(n, 0.0)};
  auto& M = sys.M;
  const std::size_t h0 = 2;
  const std::size_t l0 = 2 + K;

  M(0, 0) = r;
  M(0, 1) = -p.gamma_u();

  M(1, 1) = r + p.gamma();
  for (std::size_t j = 0; j < K; ++j) {
    M(1, h0 + j) = -Mi[j];
    M(1, l0 + j) = Mi[j];
  }

  for (std::size_t i = 0; i < K; ++i) {
    const std::size_t row = h0 + i;
    M(row, 1) = -p.gamma_d() + p.gamma_di()[i];
    for (std::size_t j = 0; j < K; ++j) {
      M(row, h0 + j) = Mi[j];
      M(row, l0 + j) = -Mi[j];
    }
    M(row, h0 + i) = r + psi_d[i];
    M(row, l0 + i) = -psi_d[i];
    sys.rhs[row] = val.delta_h[i];
  }

  for (std::size_t i = 0; i < K; ++i) {
    const std::size_t row = l0 + i;
    M(row, 1) = p.gamma_u() - p.gamma_ui()[i];
    M(row, h0 + i) = -psi_u[i];
    M(row, l0 + i) = r + psi_u[i];
    sys.rhs[row] = val.delta_h[i] - val.delta_d[i];
  }
  return sys;
}

LinearSystem build_matrix_seg(const MarketParams& p, const StateDistribution& mu) {
  if (p.kind() != ModelKind::PartiallySegmented || mu.kind() != ModelKind::PartiallySegmented)
    throw Error(ErrorCode::KindMismatch, "build_matrix_seg needs the segmented model");
  const auto& val = p.valuation();
  const std::size_t K = p.assets();
  const std::size_t n = 3 * K + 1;
  const double r = val.r;
  const double q = val.q;
  const auto tgu = p.tgamma_ui();
  const auto tgd = p.tgamma_di();

  std::vector<double> Mi(K), psi_u(K), psi_d(K);
  for (std::size_t i = 0; i < K; ++i) {
    Mi[i] = p.lambda()[i] * mu.li_o(i) * (1.0 - q);
    psi_u[i] = p.gamma_ui()[i] + p.lambda()[i] * mu.hi_n(i) * q;
    psi_d[i] = p.gamma_di()[i] + Mi[i];
  }

  LinearSystem sys{Matrix(n, n), std::vector<double>(n, 0.0)};
  auto& M = sys.M;
  const std::size_t e0 = 1;
  const std::size_t h0 = 1 + K;
  const std::size_t l0 = 1 + 2 * K;

  M(0, 0) = r;
  for (std::size_t j = 0; j < K; ++j) M(0, e0 + j) = -tgu[j];

  for (std::size_t i = 0; i < K; ++i) {
    const std::size_t row = e0 + i;
    for (std::size_t j = 0; j < K; ++j) M(row, e0 + j) = tgu[j];
    M(row, e0 + i) = r + p.tgamma_i(i);
    M(row, h0 + i) = -Mi[i];
    M(row, l0 + i) = Mi[i];
  }

  for (std::size_t i = 0; i < K; ++i) {
    const std::size_t row = h0 + i;
    M(row, e0 + i) = -tgd[i] + p.gamma_di()[i];
    M(row, h0 + i) = r + psi_d[i];
    M(row, l0 + i) = -psi_d[i];
    sys.rhs[row] = val.delta_h[i];
  }

  for (std::size_t i = 0; i < K; ++i) {
    const std::size_t row = l0 + i;
    for (std::size_t j = 0; j < K; ++j) M(row, e0 + j) = tgu[j];
    M(row, e0 + i) = tgu[i] - p.gamma_ui()[i];
    M(row, h0 + i) = -psi_u[i];
    M(row, l0 + i) = r + psi_u[i];
    sys.rhs[row] = val.delta_h[i] - val.delta_d[i];
  }
  return sys;
}

LinearSystem build_matrix(const MarketParams& params, const StateDistribution& steady) {
  return params.kind() == ModelKind::NonSegmented ? build_matrix_nonseg(params, steady)
                                                  : build_matrix_seg(params, steady);
}

DeltaSolution solve_deltas(ModelKind kind, int K, const LinearSystem& system) {
  const LuDecomposition lu(system.M);
  const auto x = lu.solve(system.rhs);
  return {DeltaVector::from_flat(kind, K, x), lu.condition_estimate()};
}

Prices price_from_deltas(const DeltaVector& d, double q) {
  Prices out;
  out.P.resize(d.delta_h.size());
  for (std::size_t i = 0; i < d.delta_h.size(); ++i) {
    out.P[i] = (1.0 - q) * d.delta_l[i] + q * d.delta_h[i];
    if (d.delta_l[i] > d.delta_h[i]) out.inverted_spread.push_back(static_cast<int>(i));
  }
  return out;
}

StateValues values_from_deltas(const DeltaVector& d, int K) {
  StateValues V{d.kind, K, std::vector<double>(static_cast<std::size_t>(state_count(d.kind, K)))};
  V.at({T::LowNonOwner, -1}) = d.delta0;
  if (d.kind == ModelKind::NonSegmented) V.at({T::HighNonOwner, -1}) = d.delta0 + d.delta_e[0];
  for (int i = 0; i < K; ++i) {
    const auto u = static_cast<std::size_t>(i);
    double buyer = 0.0;
    if (d.kind == ModelKind::NonSegmented) {
      buyer = d.delta0 + d.delta_e[0];
    } else {
      buyer = d.delta0 + d.delta_e[u];
      V.at({T::HighSeeker, i}) = buyer;
    }
    V.at({T::HighOwner, i}) = buyer + d.delta_h[u];
    V.at({T::LowOwner, i}) = d.delta0 + d.delta_l[u];
  }
  return V;
}

PriceReport price(const MarketParams& params, const StateDistribution& steady) {
  const auto sys = build_matrix(params, steady);
  auto sol = solve_deltas(params.kind(), params.K(), sys);
  auto prices = price_from_deltas(sol.deltas, params.valuation().q);
  StateValues V = values_from_deltas(sol.deltas, params.K());
  return {std::move(sol.deltas), std::move(prices.P), std::move(V), sol.condition_estimate,
          std::move(prices.inverted_spread)};
}

StateValues value_rhs(const MarketParams& p, const StateDistribution& mu, const StateValues& V,
                      std::span<const double> P) {
  if (p.kind() != mu.kind() || p.kind() != V.kind || V.K != p.K())
    throw Error(ErrorCode::KindMismatch, "value_rhs inputs disagree on the model class");
  if (P.size() != p.assets()) throw Error(ErrorCode::InvalidArgument, "one price per asset required");
  const auto& val = p.valuation();
  const double r = val.r;
  const int K = p.K();
  StateValues dV{V.kind, K, std::vector<double>(V.values.size(), 0.0)};
  const State ln{T::LowNonOwner, -1};

  for (int i = 0; i < K; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const State hio{T::HighOwner, i};
    const State lio{T::LowOwner, i};
    const double buyers = p.kind() == ModelKind::NonSegmented ? mu.h_n() : mu.hi_n(u);
    const double lb = p.lambda()[u] * buyers;
    dV.at(hio) = (p.gamma_di()[u] + r) * V.at(hio) - p.gamma_di()[u] * V.at(lio) - val.delta_h[u];
    dV.at(lio) = (p.gamma_ui()[u] + r + lb) * V.at(lio) - p.gamma_ui()[u] * V.at(hio) - lb * (V.at(ln) + P[u]) -
                 (val.delta_h[u] - val.delta_d[u]);
  }

  if (p.kind() == ModelKind::NonSegmented) {
    const State hn{T::HighNonOwner, -1};
    double meet = 0.0;
    double gain = 0.0;
    for (int i = 0; i < K; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const double rate = p.lambda()[u] * mu.li_o(u);
      meet += rate;
      gain += (V.at({T::HighOwner, i}) - P[u]) * rate;
    }
    dV.at(ln) = -V.at(hn) * p.gamma_u() + (p.gamma_u() + r) * V.at(ln);
    dV.at(hn) = -gain - p.gamma_d() * V.at(ln) + (p.gamma_d() + r + meet) * V.at(hn);
  } else {
    double inflow = 0.0;
    double tgu_sum = 0.0;
    for (int i = 0; i < K; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const State hin{T::HighSeeker, i};
      inflow += V.at(hin) * p.tgamma_ui()[u];
      tgu_sum += p.tgamma_ui()[u];
      const double rate = p.lambda()[u] * mu.li_o(u);
      dV.at(hin) = -(V.at({T::HighOwner, i}) - P[u]) * rate - V.at(ln) * p.tgamma_di()[u] +
                   (p.tgamma_di()[u] + r + rate) * V.at(hin);
    }
    dV.at(ln) = -inflow + (r + tgu_sum) * V.at(ln);
  }
  return dV;
}

Prices prices_from_values(const MarketParams& params, const StateValues& V) {
  const double q = params.valuation().q;
  DeltaVector d;
  d.kind = params.kind();
  for (int i = 0; i < params.K(); ++i) {
    const State buyer = params.kind() == ModelKind::NonSegmented ? State{T::HighNonOwner, -1}
                                                                 : State{T::HighSeeker, i};
    d.delta_h.push_back(V.at({T::HighOwner, i}) - V.at(buyer));
    d.delta_l.push_back(V.at({T::LowOwner, i}) - V.at({T::LowNonOwner, -1}));
  }
  return price_from_deltas(d, q);
}

ValueTrajectory integrate_values_backward(const MarketParams& params, const Trajectory& mu_traj,
                                          const StateValues& terminal, const BackwardOptions& opts) {
  if (mu_traj.times.size() < 2) throw Error(ErrorCode::InvalidArgument, "trajectory needs at least two samples");
  if (opts.substeps < 1) throw Error(ErrorCode::InvalidArgument, "substeps must be >= 1");
  if (terminal.kind != params.kind() || terminal.K != params.K())
    throw Error(ErrorCode::KindMismatch, "terminal values do not match the model");

  const std::size_t n = terminal.values.size();
  const std::size_t samples = mu_traj.times.size();
  ValueTrajectory out;
  out.times = mu_traj.times;
  out.values.resize(samples);
  out.prices.resize(samples);

  auto f = [&](double t, const std::vector<double>& v) {
    const StateDistribution mu(params, interpolate(mu_traj, t));
    const StateValues V{params.kind(), params.K(), v};
    const Prices P = prices_from_values(params, V);
    return value_rhs(params, mu, V, P.P).values;
  };
  auto record = [&](std::size_t idx, const std::vector<double>& v) {
    StateValues V{params.kind(), params.K(), v};
    Prices P = prices_from_values(params, V);
    for (int a : P.inverted_spread) out.inverted_spread.emplace_back(out.times[idx], a);
    out.prices[idx] = std::move(P.P);
    out.values[idx] = std::move(V);
  };

  std::vector<double> v = terminal.values;
  record(samples - 1, v);
  std::vector<double> tmp(n);
  for (std::size_t j = samples - 1; j-- > 0;) {
    const double t1 = mu_traj.times[j + 1];
    const double h = (t1 - mu_traj.times[j]) / opts.substeps;
    for (int s = 0; s < opts.substeps; ++s) {
      const double t = t1 - s * h;
      const auto k1 = f(t, v);
      for (std::size_t k = 0; k < n; ++k) tmp[k] = v[k] - 0.5 * h * k1[k];
      const auto k2 = f(t - 0.5 * h, tmp);
      for (std::size_t k = 0; k < n; ++k) tmp[k] = v[k] - 0.5 * h * k2[k];
      const auto k3 = f(t - 0.5 * h, tmp);
      for (std::size_t k = 0; k < n; ++k) tmp[k] = v[k] - h * k3[k];
      const auto k4 = f(t - h, tmp);
      for (std::size_t k = 0; k < n; ++k) v[k] -= h / 6.0 * (k1[k] + 2.0 * (k2[k] + k3[k]) + k4[k]);
    }
    record(j, v);
  }
  return out;
}

namespace {

double asset1_price(const MarketParams& p, const StateDistribution& steady, double q, double dd,
                    const CalibrationGrid& g) {
  const std::size_t K = p.assets();
  const auto priced = p.with_valuation({g.r, std::vector<double>(K, g.delta_h), std::vector<double>(K, dd), q});
  const auto sys = build_matrix(priced, steady);
  const auto sol = solve_deltas(p.kind(), p.K(), sys);
  return price_from_deltas(sol.deltas, q).P[0];
}

}  // namespace

CalibrationResult calibrate_prices(const MarketParams& nonseg, const MarketParams& seg, double target_nonseg,
                                   double target_seg, const CalibrationGrid& g) {
  if (nonseg.kind() != ModelKind::NonSegmented || seg.kind() != ModelKind::PartiallySegmented)
    throw Error(ErrorCode::KindMismatch, "calibration needs one instance of each model class");
  if (!(g.q_step > 0.0 && g.delta_d_step > 0.0 && g.delta_d_hi >= g.delta_d_lo))
    throw Error(ErrorCode::InvalidArgument, "bad calibration grid");
  const auto ns_steady = solve_steady(nonseg).dist;
  const auto sg_steady = solve_steady(seg).dist;

  CalibrationResult best;
  best.max_error = std::numeric_limits<double>::infinity();
  int evals = 0;
  auto eval = [&](double q, double dd) {
    ++evals;
    const double a = asset1_price(nonseg, ns_steady, q, dd, g);
    const double b = asset1_price(seg, sg_steady, q, dd, g);
    return CalibrationResult{q, dd, a, b, std::max(std::abs(a - target_nonseg), std::abs(b - target_seg)), 0};
  };

  const auto nq = static_cast<int>(std::lround(1.0 / g.q_step));
  const auto nd = static_cast<int>(std::lround((g.delta_d_hi - g.delta_d_lo) / g.delta_d_step));
  for (int iq = 0; iq <= nq; ++iq) {
    const double q = std::min(1.0, iq * g.q_step);
    CalibrationResult row_best;
    row_best.max_error = std::numeric_limits<double>::infinity();
    for (int id = 0; id <= nd; ++id) {
      const auto c = eval(q, std::min(g.delta_d_hi, g.delta_d_lo + id * g.delta_d_step));
      if (c.max_error < row_best.max_error) row_best = c;
    }
    // Golden-section refinement of delta_d within one grid cell either side.
    double lo = std::max(g.delta_d_lo, row_best.delta_d - g.delta_d_step);
    double hi = std::min(g.delta_d_hi, row_best.delta_d + g.delta_d_step);
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - phi * (hi - lo);
    double b = lo + phi * (hi - lo);
    auto ca = eval(q, a);
    auto cb = eval(q, b);
    for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
      if (ca.max_error < cb.max_error) {
        hi = b;
        b = a;
        cb = ca;
        a = hi - phi * (hi - lo);
        ca = eval(q, a);
      } else {
        lo = a;
        a = b;
        ca = cb;
        b = lo + phi * (hi - lo);
        cb = eval(q, b);
      }
    }
    for (const auto& c : {ca, cb, row_best})
      if (c.max_error < best.max_error) best = c;
  }
  best.evaluations = evals;
  return best;
}

}  // namespace otc
