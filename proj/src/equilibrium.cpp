#include "otc/equilibrium.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>
#include <numeric>

#include "otc/dynamics.hpp"
#include "otc/error.hpp"
#include "otc/linalg.hpp"

namespace otc {

namespace {

constexpr double kBisectWidth = 1e-6;

struct Root {
  double x = 0.0;
  RootDiagnostics diag;
  int iterations = 0;
};

// Bisection to kBisectWidth, then Newton kept inside the shrinking bracket.
// Requires f(lo) > 0 > f(hi).
Root bracketed_root(const std::function<double(double)>& f, const std::function<double(double)>& fprime,
                    double lo, double hi, double tol, int max_newton) {
  Root out;
  double flo = f(lo);
  double fhi = f(hi);
  out.diag = {lo, hi, flo, fhi, 0};
  if (!(flo > 0.0 && fhi < 0.0))
    throw Error(ErrorCode::BracketFailure, "f(lo)=" + std::to_string(flo) + " f(hi)=" + std::to_string(fhi));
  if (flo < tol) {
    out.x = lo;
    return out;
  }
  if (-fhi < tol) {
    out.x = hi;
    return out;
  }

  while (hi - lo > kBisectWidth) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    ++out.iterations;
    if (fm > 0.0)
      lo = mid;
    else
      hi = mid;
  }

  double x = 0.5 * (lo + hi);
  for (int k = 0; k < max_newton; ++k) {
    const double fx = f(x);
    ++out.iterations;
    if (std::abs(fx) < tol) {
      out.x = x;
      return out;
    }
    if (fx > 0.0)
      lo = x;
    else
      hi = x;
    const double d = fprime(x);
    double next = d != 0.0 ? x - fx / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    ++out.diag.newton_polish_steps;
    if (std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(x), 1e-300)) {
      // Further steps cannot move x; the residual is at round-off level.
      out.x = next;
      return out;
    }
    x = next;
  }
  throw Error(ErrorCode::NoConvergence, "Newton polish did not reach tolerance");
}

// Round-off in the reduced residual: each rate times the magnitude of the
// masses its term is computed from (owner masses come from m_i - x_i).
double residual_scale(const MarketParams& p, const StateDistribution& d) {
  const std::size_t K = p.assets();
  const double S = p.free_mass();
  double s = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const double buyers = p.kind() == ModelKind::NonSegmented ? d.h_n() : d.hi_n(i);
    const double mi = p.m()[i];
    s = std::max({s, p.lambda()[i] * buyers * mi, p.gamma_ui()[i] * mi, p.gamma_di()[i] * mi});
    if (p.kind() == ModelKind::PartiallySegmented) s = std::max({s, p.tgamma_ui()[i] * S, p.tgamma_di()[i] * S});
  }
  if (p.kind() == ModelKind::NonSegmented) s = std::max({s, p.gamma_u() * S, p.gamma_d() * S});
  return s;
}

// Newton on the reduced segmented system (h_1..h_K, x_1..x_K). The seeker
// curves cancel large terms, so their roots can be off by far more than eps.
std::vector<double> polish_seg(const MarketParams& p, std::vector<double> y) {
  const std::size_t K = p.assets();
  const std::size_t n = 2 * K;
  std::vector<double> r(n), trial(n);
  reduced_rhs(p, y, r);
  double rn = inf_norm(r);
  for (int it = 0; it < 8 && rn > 0.0; ++it) {
    Matrix J(n, n);
    for (std::size_t i = 0; i < K; ++i) {
      const double lam = p.lambda()[i];
      for (std::size_t j = 0; j < K; ++j) J(i, j) = -p.tgamma_ui()[i];
      J(i, i) = -lam * y[K + i] - p.tgamma_i(i);
      J(i, K + i) = -lam * y[i];
      J(K + i, i) = -lam * y[K + i];
      J(K + i, K + i) = -lam * y[i] - p.gamma_i(i);
    }
    std::vector<double> neg(n);
    std::transform(r.begin(), r.end(), neg.begin(), [](double v) { return -v; });
    std::vector<double> dy;
    try {
      dy = lu_solve(J, neg);
    } catch (const Error&) {
      break;
    }
    for (std::size_t k = 0; k < n; ++k) trial[k] = y[k] + dy[k];
    std::vector<double> rt(n);
    reduced_rhs(p, trial, rt);
    const double tn = inf_norm(rt);
    if (!(tn < rn)) break;
    y = trial;
    r = rt;
    rn = tn;
  }
  return y;
}

std::string fmt_sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

SteadyState finish(const MarketParams& params, StateDistribution dist, int iterations, SteadyMethod method,
                   double tol) {
  const double res = steady_residual(params, dist);
  const double allowed = tol * std::max(1.0, residual_scale(params, dist));
  if (!(res <= allowed))
    throw Error(ErrorCode::NoConvergence, "steady residual " + fmt_sci(res) + " above tolerance " + fmt_sci(allowed));
  return SteadyState{std::move(dist), res, iterations, method, std::nullopt, false};
}

void require(const MarketParams& params, ModelKind kind, const char* who) {
  if (params.kind() != kind) throw Error(ErrorCode::KindMismatch, who);
}

StateDistribution seg_distribution(const MarketParams& params, const std::vector<double>& seekers) {
  const std::size_t K = params.assets();
  std::vector<double> y(seekers);
  for (std::size_t i = 0; i < K; ++i) y.push_back(steady_li_o(params, i, seekers[i]));
  const double ln = params.free_mass() - std::accumulate(seekers.begin(), seekers.end(), 0.0);
  if (ln < -1e-12) throw Error(ErrorCode::InfeasibleSolution, "recovered mu(l,n) < 0");
  try {
    return {params, polish_seg(params, std::move(y))};
  } catch (const Error& e) {
    throw Error(ErrorCode::InfeasibleSolution, e.what());
  }
}

// Seeker-space solvers work in mass units; the reduced residual is that
// error multiplied by a rate.
SteadyOptions mass_units(const MarketParams& p, SteadyOptions opts) {
  double r = 1.0;
  for (std::size_t i = 0; i < p.assets(); ++i)
    r = std::max({r, p.lambda()[i], p.gamma_ui()[i], p.gamma_di()[i], p.tgamma_ui()[i], p.tgamma_di()[i]});
  opts.tol /= r;
  return opts;
}

}  // namespace

double eval_F(const MarketParams& p, double x) {
  require(p, ModelKind::NonSegmented, "eval_F needs non-segmented params");
  double f = p.gamma_u() * p.free_mass() - p.gamma() * x;
  for (std::size_t i = 0; i < p.assets(); ++i) {
    const double gi = p.gamma_i(i);
    const double gdm = p.gamma_di()[i] * p.m()[i];
    f += gi * gdm / (p.lambda()[i] * x + gi) - gdm;
  }
  return f;
}

double eval_F_prime(const MarketParams& p, double x) {
  require(p, ModelKind::NonSegmented, "eval_F_prime needs non-segmented params");
  double d = -p.gamma();
  for (std::size_t i = 0; i < p.assets(); ++i) {
    const double gi = p.gamma_i(i);
    const double den = p.lambda()[i] * x + gi;
    d -= gi * p.gamma_di()[i] * p.m()[i] * p.lambda()[i] / (den * den);
  }
  return d;
}

double steady_li_o(const MarketParams& p, std::size_t i, double buyers) {
  return p.gamma_di()[i] * p.m()[i] / (p.lambda()[i] * buyers + p.gamma_i(i));
}

double steady_residual(const MarketParams& params, const StateDistribution& dist) {
  std::vector<double> r(dist.reduced().size());
  reduced_rhs(params, dist.reduced(), r);
  return inf_norm(r);
}

SteadyState solve_nonseg_steady(const MarketParams& params, const SteadyOptions& opts) {
  require(params, ModelKind::NonSegmented, "solve_nonseg_steady needs non-segmented params");
  if (!(opts.tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");
  const Root root = bracketed_root([&](double x) { return eval_F(params, x); },
                                   [&](double x) { return eval_F_prime(params, x); }, 0.0, params.free_mass(),
                                   opts.tol, opts.max_newton);
  std::vector<double> y{root.x};
  for (std::size_t i = 0; i < params.assets(); ++i) y.push_back(steady_li_o(params, i, root.x));
  SteadyState s = finish(params, StateDistribution(params, std::move(y)), root.iterations,
                         SteadyMethod::BisectionNewton, opts.tol);
  s.root = root.diag;
  return s;
}

namespace {

// One of the two steady curves of the two-asset segmented market: the
// seeker mass of asset `b` as a function of the seeker mass of asset `a`.
struct Curve {
  double slope;  // -tg_a / tgu_a
  double num;    // g_a g_da m_a / tgu_a
  double lam;
  double ga;
  double offset;  // S - g_da m_a / tgu_a

  Curve(const MarketParams& p, std::size_t a) {
    const double tgu = p.tgamma_ui()[a];
    slope = -p.tgamma_i(a) / tgu;
    ga = p.gamma_i(a);
    num = ga * p.gamma_di()[a] * p.m()[a] / tgu;
    lam = p.lambda()[a];
    offset = p.free_mass() - p.gamma_di()[a] * p.m()[a] / tgu;
  }
  [[nodiscard]] double operator()(double x) const { return slope * x + num / (lam * x + ga) + offset; }
  [[nodiscard]] double prime(double x) const {
    const double den = lam * x + ga;
    return slope - num * lam / (den * den);
  }
};

// Root of x - second(first(x)) on the part of [0, S] where first(x) >= 0.
Root compose_root(const Curve& first, const Curve& second, double S, const SteadyOptions& opts) {
  const Root edge = bracketed_root([&](double x) { return first(x); }, [&](double x) { return first.prime(x); },
                                   0.0, S, 1e-15, opts.max_newton);
  auto g = [&](double x) { return x - second(std::max(0.0, first(x))); };
  auto gp = [&](double x) { return 1.0 - second.prime(first(x)) * first.prime(x); };
  Root r = bracketed_root(g, gp, 0.0, edge.x, opts.tol, opts.max_newton);
  r.iterations += edge.iterations;
  return r;
}

}  // namespace

SteadyState solve_seg_steady_k2(const MarketParams& params, const SteadyOptions& opts) {
  require(params, ModelKind::PartiallySegmented, "solve_seg_steady_k2 needs segmented params");
  if (params.K() != 2) throw Error(ErrorCode::InvalidArgument, "solve_seg_steady_k2 needs K = 2");
  const double S = params.free_mass();
  const Curve y_of_x(params, 0);
  const Curve x_of_y(params, 1);

  const SteadyOptions inner = mass_units(params, opts);
  const Root forward = compose_root(y_of_x, x_of_y, S, inner);
  const double x = forward.x;
  const double y = std::max(0.0, y_of_x(x));

  const Root reverse = compose_root(x_of_y, y_of_x, S, inner);
  const double y2 = reverse.x;
  const double x2 = std::max(0.0, x_of_y(y2));

  SteadyState s = finish(params, seg_distribution(params, {x, y}), forward.iterations + reverse.iterations,
                         SteadyMethod::CurveIntersection, opts.tol);
  s.root = forward.diag;
  s.multiple_intersections = std::max(std::abs(x - x2), std::abs(y - y2)) > 1e-8;
  return s;
}

SteadyState solve_seg_steady_general(const MarketParams& params, const SteadyOptions& opts) {
  require(params, ModelKind::PartiallySegmented, "solve_seg_steady_general needs segmented params");
  if (!(opts.damping > 0.0 && opts.damping <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "damping must lie in (0,1]");
  const std::size_t K = params.assets();
  const double S = params.free_mass();
  const auto tgu = params.tgamma_ui();
  const auto lambda = params.lambda();
  const auto gdi = params.gamma_di();
  const auto m = params.m();

  auto T = [&](const std::vector<double>& x, std::size_t i) {
    const double tg = params.tgamma_i(i);
    const double others = std::accumulate(x.begin(), x.end(), 0.0) - x[i];
    const double gi = params.gamma_i(i);
    return -tgu[i] / tg * others + gi * gdi[i] * m[i] / (tg * (lambda[i] * x[i] + gi)) - gdi[i] * m[i] / tg +
           tgu[i] / tg * S;
  };
  auto residual = [&](const std::vector<double>& x) {
    std::vector<double> r(K);
    for (std::size_t i = 0; i < K; ++i) r[i] = x[i] - T(x, i);
    return r;
  };

  std::vector<double> x(K, 0.0);
  const double alpha = opts.damping;
  const double inner_tol = mass_units(params, opts).tol;
  std::vector<double> history;
  int iter = 0;
  bool converged = false;
  for (; iter < opts.max_iter; ++iter) {
    std::vector<double> next(K);
    double update = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      next[i] = std::clamp((1.0 - alpha) * x[i] + alpha * T(x, i), 0.0, S);
      update = std::max(update, std::abs(next[i] - x[i]));
    }
    x = std::move(next);
    if (update < inner_tol) {
      converged = true;
      break;
    }
    history.push_back(update);
    if (history.size() > 20 && update > 0.9 * history[history.size() - 21]) break;  // stalled
  }

  {
    // Newton on x - T(x) with backtracking, projected onto [0, S]^K. Also
    // polishes a fixed-point answer, whose step-size test is weaker than the
    // residual test in finish().
    for (int k = 0; k < opts.max_newton; ++k, ++iter) {
      const auto r = residual(x);
      const double rn = inf_norm(r);
      if (rn < 1e-3 * inner_tol) {
        converged = true;
        break;
      }
      Matrix J(K, K);
      for (std::size_t i = 0; i < K; ++i) {
        const double tg = params.tgamma_i(i);
        const double gi = params.gamma_i(i);
        const double den = lambda[i] * x[i] + gi;
        for (std::size_t j = 0; j < K; ++j) J(i, j) = i == j ? 1.0 : tgu[i] / tg;
        J(i, i) += gi * gdi[i] * m[i] * lambda[i] / (tg * den * den);
      }
      std::vector<double> neg(r.size());
      std::transform(r.begin(), r.end(), neg.begin(), [](double v) { return -v; });
      const auto dx = lu_solve(J, neg);
      double step = 1.0;
      std::vector<double> trial(K);
      bool improved = false;
      for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
        for (std::size_t i = 0; i < K; ++i) trial[i] = std::clamp(x[i] + step * dx[i], 0.0, S);
        if (inf_norm(residual(trial)) < rn) {
          improved = true;
          break;
        }
      }
      if (!improved) {
        converged = true;  // stagnated at round-off; finish() judges the residual
        break;
      }
      x = trial;
    }
  }
  if (!converged)
    throw Error(ErrorCode::NoConvergence,
                "segmented steady state did not converge in " + std::to_string(iter) + " iterations");
  return finish(params, seg_distribution(params, x), iter, SteadyMethod::DampedFixedPoint, opts.tol);
}

SteadyState solve_steady(const MarketParams& params, const SteadyOptions& opts) {
  if (params.kind() == ModelKind::NonSegmented) return solve_nonseg_steady(params, opts);
  if (params.K() == 2) return solve_seg_steady_k2(params, opts);
  return solve_seg_steady_general(params, opts);
}

}  // namespace otc
