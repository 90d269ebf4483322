#pragma once

#include <span>
#include <vector>

#include "otc/model.hpp"

namespace otc {

/// Reduced master equation, non-segmented market:
/// (d mu(h,n), d mu(l1,o), ..., d mu(lK,o)). Throws KindMismatch.
std::vector<double> rhs_nonseg(const MarketParams& params, const StateDistribution& dist);

/// Reduced master equation, partially segmented market:
/// (d mu(h1,n)..d mu(hK,n), d mu(l1,o)..d mu(lK,o)). Throws KindMismatch.
std::vector<double> rhs_seg(const MarketParams& params, const StateDistribution& dist);

/// Dispatches on `params.kind()`; operates on raw reduced coordinates so
/// integrator stages need not be feasible distributions.
void reduced_rhs(const MarketParams& params, std::span<const double> reduced, std::span<double> out);

/// Time derivative of every state in E, evaluated from the unreduced
/// balance equations (all 2K+2 or 3K+1 of them).
StateValues full_rhs(const MarketParams& params, const StateDistribution& dist);

struct Trajectory {
  std::vector<double> times;
  std::vector<StateDistribution> states;
  MarketParams params;
  /// Steps where a coordinate overshot its bounds by more than 1e-9 (but
  /// less than 1e-6) and was clamped back.
  int clamp_events = 0;
};

struct IntegrateOptions {
  double t_end = 1.0;
  double dt = 1e-4;
  int record_every = 1;
};

/// Classical fixed-step RK4 on the reduced coordinates. The last step is
/// shortened to land on t_end, which is always recorded. Overshoots up to
/// 1e-9 are clamped silently, up to 1e-6 clamped and counted; anything
/// larger raises InfeasibleDuringIntegration.
Trajectory integrate(const MarketParams& params, const StateDistribution& initial, const IntegrateOptions& opts);

/// One RK4 step of length `dt`, in place, without clamping.
void rk4_step(const MarketParams& params, std::span<double> reduced, double dt);

/// State with every owner low-type and no high-type non-owner:
/// mu(li,o) = m_i, mu(h,n) = 0 (or mu(hi,n) = 0).
StateDistribution all_low_owners(const MarketParams& params);

/// Reduced state at time `t` via cubic Hermite interpolation between the
/// bracketing samples, using the vector field for the end-point slopes.
std::vector<double> interpolate(const Trajectory& traj, double t);

}  // namespace otc
