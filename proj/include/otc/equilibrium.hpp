#pragma once

#include "otc/model.hpp"

namespace otc {

/// F(x) = sum_i g_i g_di m_i / (l_i x + g_i) - sum_i g_di m_i + g_u (1 - sum m) - g x,
/// whose root in [0, 1 - sum m] is the steady mu(h,n) of a non-segmented market.
double eval_F(const MarketParams& params, double x);
double eval_F_prime(const MarketParams& params, double x);

/// Steady mu(li,o) given the buyer mass facing asset i:
/// g_di m_i / (lambda_i * buyers + g_i).
double steady_li_o(const MarketParams& params, std::size_t i, double buyers);

struct SteadyOptions {
  double tol = 1e-12;
  int max_iter = 10000;
  double damping = 0.5;
  int max_newton = 200;
};

/// Bisection on [0, 1 - sum m] down to width 1e-6, then safeguarded Newton
/// polish until |F| < tol. Any K.
SteadyState solve_nonseg_steady(const MarketParams& params, const SteadyOptions& opts = {});

/// Two-asset segmented market: intersects the two steady curves by
/// bisection on x - X(Y(x)) followed by Newton polish. The reverse
/// composition is solved as a cross-check; a disagreement sets
/// `multiple_intersections`.
SteadyState solve_seg_steady_k2(const MarketParams& params, const SteadyOptions& opts = {});

/// Segmented market with any K: damped fixed-point iteration on the
/// mu(hi,n) map, projected to [0, 1 - sum m], with a Newton fallback when
/// the update stalls.
SteadyState solve_seg_steady_general(const MarketParams& params, const SteadyOptions& opts = {});

/// Dispatches to the routine matching the model class and K.
SteadyState solve_steady(const MarketParams& params, const SteadyOptions& opts = {});

/// Infinity norm of the reduced master-equation right-hand side at `dist`.
double steady_residual(const MarketParams& params, const StateDistribution& dist);

}  // namespace otc
