#include "otc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "otc/error.hpp"

namespace otc {

namespace {

constexpr double kSilentClamp = 1e-9;
constexpr double kAbortBand = 1e-6;

void check_kind(const MarketParams& params, ModelKind expected, const StateDistribution& dist) {
  if (params.kind() != expected || dist.kind() != expected)
    throw Error(ErrorCode::KindMismatch, "rhs called with a distribution of the other model class");
  if (dist.K() != params.K()) throw Error(ErrorCode::KindMismatch, "asset count mismatch");
}

void rhs_nonseg_raw(const MarketParams& p, std::span<const double> y, std::span<double> out) {
  const std::size_t K = p.assets();
  const auto lambda = p.lambda();
  const auto gui = p.gamma_ui();
  const auto gdi = p.gamma_di();
  const auto m = p.m();
  const double v = y[0];
  const double ln = p.free_mass() - v;
  double meet = 0.0;
  for (std::size_t i = 0; i < K; ++i) meet += lambda[i] * y[1 + i];
  out[0] = -v * meet + p.gamma_u() * ln - p.gamma_d() * v;
  for (std::size_t i = 0; i < K; ++i) {
    const double x = y[1 + i];
    out[1 + i] = -lambda[i] * v * x - gui[i] * x + gdi[i] * (m[i] - x);
  }
}

void rhs_seg_raw(const MarketParams& p, std::span<const double> y, std::span<double> out) {
  const std::size_t K = p.assets();
  const auto lambda = p.lambda();
  const auto gui = p.gamma_ui();
  const auto gdi = p.gamma_di();
  const auto tgu = p.tgamma_ui();
  const auto tgd = p.tgamma_di();
  const auto m = p.m();
  double seekers = 0.0;
  for (std::size_t i = 0; i < K; ++i) seekers += y[i];
  const double ln = p.free_mass() - seekers;
  for (std::size_t i = 0; i < K; ++i) {
    const double h = y[i];
    const double x = y[K + i];
    const double trade = lambda[i] * h * x;
    out[i] = -trade + tgu[i] * ln - tgd[i] * h;
    out[K + i] = -trade - gui[i] * x + gdi[i] * (m[i] - x);
  }
}

}  // namespace

std::vector<double> rhs_nonseg(const MarketParams& params, const StateDistribution& dist) {
  check_kind(params, ModelKind::NonSegmented, dist);
  std::vector<double> out(dist.reduced().size());
  rhs_nonseg_raw(params, dist.reduced(), out);
  return out;
}

std::vector<double> rhs_seg(const MarketParams& params, const StateDistribution& dist) {
  check_kind(params, ModelKind::PartiallySegmented, dist);
  std::vector<double> out(dist.reduced().size());
  rhs_seg_raw(params, dist.reduced(), out);
  return out;
}

void reduced_rhs(const MarketParams& params, std::span<const double> reduced, std::span<double> out) {
  if (params.kind() == ModelKind::NonSegmented)
    rhs_nonseg_raw(params, reduced, out);
  else
    rhs_seg_raw(params, reduced, out);
}

StateValues full_rhs(const MarketParams& params, const StateDistribution& dist) {
  if (params.kind() != dist.kind()) throw Error(ErrorCode::KindMismatch, "full_rhs kind mismatch");
  const StateValues mu = full_distribution(dist);
  StateValues d{mu.kind, mu.K, std::vector<double>(mu.values.size(), 0.0)};
  const auto lambda = params.lambda();
  const auto gui = params.gamma_ui();
  const auto gdi = params.gamma_di();
  const State ln{State::Type::LowNonOwner, -1};

  for (int i = 0; i < mu.K; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const State hio{State::Type::HighOwner, i};
    const State lio{State::Type::LowOwner, i};
    const State buyer = params.kind() == ModelKind::NonSegmented ? State{State::Type::HighNonOwner, -1}
                                                                 : State{State::Type::HighSeeker, i};
    const double trade = lambda[u] * mu.at(buyer) * mu.at(lio);
    // buyer (h,n)/(hi,n) -> (hi,o); seller (li,o) -> (l,n)
    d.at(buyer) -= trade;
    d.at(hio) += trade;
    d.at(lio) -= trade;
    d.at(ln) += trade;
    // owner type switches
    d.at(hio) += gui[u] * mu.at(lio) - gdi[u] * mu.at(hio);
    d.at(lio) += -gui[u] * mu.at(lio) + gdi[u] * mu.at(hio);
  }
  if (params.kind() == ModelKind::NonSegmented) {
    const State hn{State::Type::HighNonOwner, -1};
    const double up = params.gamma_u() * mu.at(ln);
    const double down = params.gamma_d() * mu.at(hn);
    d.at(hn) += up - down;
    d.at(ln) += -up + down;
  } else {
    for (int i = 0; i < mu.K; ++i) {
      const auto u = static_cast<std::size_t>(i);
      const State hin{State::Type::HighSeeker, i};
      const double up = params.tgamma_ui()[u] * mu.at(ln);
      const double down = params.tgamma_di()[u] * mu.at(hin);
      d.at(hin) += up - down;
      d.at(ln) += -up + down;
    }
  }
  return d;
}

void rk4_step(const MarketParams& params, std::span<double> y, double dt) {
  const std::size_t n = y.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  reduced_rhs(params, y, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
  reduced_rhs(params, tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
  reduced_rhs(params, tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * k3[i];
  reduced_rhs(params, tmp, k4);
  for (std::size_t i = 0; i < n; ++i) y[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
}

namespace {

// Returns true when a clamp beyond the silent band happened.
bool clamp_into_bounds(const MarketParams& params, std::span<double> y) {
  bool loud = false;
  auto clamp = [&](double& x, double lo, double hi) {
    const double over = std::max(lo - x, x - hi);
    if (over <= 0.0) return;
    if (over > kAbortBand)
      throw Error(ErrorCode::InfeasibleDuringIntegration,
                  "coordinate left its feasible range by " + std::to_string(over));
    if (over > kSilentClamp) loud = true;
    x = std::clamp(x, lo, hi);
  };
  const std::size_t K = params.assets();
  const auto m = params.m();
  const std::size_t lio = params.kind() == ModelKind::NonSegmented ? 1 : K;
  for (std::size_t i = 0; i < K; ++i) clamp(y[lio + i], 0.0, m[i]);
  double seekers = 0.0;
  for (std::size_t i = 0; i < lio; ++i) {
    clamp(y[i], 0.0, 1.0);
    seekers += y[i];
  }
  const double deficit = seekers - params.free_mass();  // mu(l,n) = -deficit
  if (deficit > 0.0) {
    if (deficit > kAbortBand)
      throw Error(ErrorCode::InfeasibleDuringIntegration, "mu(l,n) fell below -1e-6");
    if (deficit > kSilentClamp) loud = true;
    auto largest = std::max_element(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(lio));
    *largest = std::max(0.0, *largest - deficit);
  }
  return loud;
}

}  // namespace

Trajectory integrate(const MarketParams& params, const StateDistribution& initial, const IntegrateOptions& opts) {
  if (!(opts.dt > 0.0) || !(opts.t_end > 0.0))
    throw Error(ErrorCode::InvalidArgument, "dt and t_end must be positive");
  if (opts.record_every < 1) throw Error(ErrorCode::InvalidArgument, "record_every must be >= 1");
  if (initial.kind() != params.kind() || initial.K() != params.K())
    throw Error(ErrorCode::KindMismatch, "initial distribution does not match params");

  Trajectory traj{{0.0}, {initial}, params, 0};
  std::vector<double> y(initial.reduced().begin(), initial.reduced().end());
  auto full_steps = static_cast<long long>(std::floor(opts.t_end / opts.dt));
  double remainder = opts.t_end - static_cast<double>(full_steps) * opts.dt;
  if (remainder <= 1e-12 * opts.t_end) remainder = 0.0;
  if (full_steps == 0 && remainder == 0.0) full_steps = 1;  // dt == t_end up to round-off
  const long long total = full_steps + (remainder > 0.0 ? 1 : 0);

  for (long long step = 1; step <= total; ++step) {
    const bool last = step == total;
    const double h = step <= full_steps ? opts.dt : remainder;
    rk4_step(params, y, step == full_steps && remainder == 0.0 ? opts.t_end - (step - 1) * opts.dt : h);
    if (clamp_into_bounds(params, y)) ++traj.clamp_events;
    if (last || step % opts.record_every == 0) {
      traj.times.push_back(last ? opts.t_end : static_cast<double>(step) * opts.dt);
      traj.states.emplace_back(params.kind(), std::vector<double>(params.m().begin(), params.m().end()), y);
    }
  }
  return traj;
}

StateDistribution all_low_owners(const MarketParams& params) {
  const std::size_t K = params.assets();
  std::vector<double> y(static_cast<std::size_t>(free_dim(params.kind(), params.K())), 0.0);
  const std::size_t lio = params.kind() == ModelKind::NonSegmented ? 1 : K;
  for (std::size_t i = 0; i < K; ++i) y[lio + i] = params.m()[i];
  return {params, std::move(y)};
}

std::vector<double> interpolate(const Trajectory& traj, double t) {
  const auto& ts = traj.times;
  if (ts.empty()) throw Error(ErrorCode::InvalidArgument, "empty trajectory");
  if (t <= ts.front()) {
    const auto r = traj.states.front().reduced();
    return {r.begin(), r.end()};
  }
  if (t >= ts.back()) {
    const auto r = traj.states.back().reduced();
    return {r.begin(), r.end()};
  }
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  const auto j = static_cast<std::size_t>(it - ts.begin());
  const std::size_t i = j - 1;
  const double h = ts[j] - ts[i];
  const double s = (t - ts[i]) / h;
  const auto y0 = traj.states[i].reduced();
  const auto y1 = traj.states[j].reduced();
  if (s == 0.0) return {y0.begin(), y0.end()};
  const std::size_t n = y0.size();
  std::vector<double> f0(n), f1(n), out(n);
  reduced_rhs(traj.params, y0, f0);
  reduced_rhs(traj.params, y1, f1);
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
  const double h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s);
  const double h11 = s * s * (s - 1);
  for (std::size_t k = 0; k < n; ++k) out[k] = h00 * y0[k] + h10 * h * f0[k] + h01 * y1[k] + h11 * h * f1[k];
  return out;
}

}  // namespace otc
