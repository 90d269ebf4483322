#include "otc/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "otc/equilibrium.hpp"
#include "otc/error.hpp"

namespace otc {

namespace {

constexpr double kMarginalBand = 1e-10;
constexpr double kDeflateTol = 1e-12;

using cd = std::complex<double>;

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::AsymptoticallyStable:
      return "AsymptoticallyStable";
    case Verdict::Unstable:
      return "Unstable";
    case Verdict::Marginal:
      return "Marginal";
  }
  return "?";
}

Matrix jacobian_nonseg(const MarketParams& p, const StateDistribution& s) {
  if (p.kind() != ModelKind::NonSegmented || s.kind() != ModelKind::NonSegmented)
    throw Error(ErrorCode::KindMismatch, "jacobian_nonseg needs the non-segmented model");
  const std::size_t K = p.assets();
  const double v = s.h_n();
  Matrix J(K + 1, K + 1);
  double meet = 0.0;
  for (std::size_t i = 0; i < K; ++i) {
    const double li = p.lambda()[i];
    const double x = s.li_o(i);
    J(i, i) = -li * v - p.gamma_i(i);
    J(i, K) = -li * x;
    J(K, i) = -li * v;
    meet += li * x;
  }
  J(K, K) = -meet - p.gamma();
  return J;
}

Matrix jacobian_seg(const MarketParams& p, const StateDistribution& s) {
  if (p.kind() != ModelKind::PartiallySegmented || s.kind() != ModelKind::PartiallySegmented)
    throw Error(ErrorCode::KindMismatch, "jacobian_seg needs the segmented model");
  const std::size_t K = p.assets();
  Matrix J(2 * K, 2 * K);
  for (std::size_t i = 0; i < K; ++i) {
    const double li = p.lambda()[i];
    const double h = s.hi_n(i);
    const double x = s.li_o(i);
    for (std::size_t j = 0; j < K; ++j) J(i, j) = -p.tgamma_ui()[i];
    J(i, i) = -li * x - p.tgamma_i(i);
    J(i, K + i) = -li * h;
    J(K + i, i) = -li * x;
    J(K + i, K + i) = -li * h - p.gamma_i(i);
  }
  return J;
}

Matrix jacobian(const MarketParams& params, const StateDistribution& steady) {
  return params.kind() == ModelKind::NonSegmented ? jacobian_nonseg(params, steady) : jacobian_seg(params, steady);
}

std::vector<double> char_poly(const Matrix& J) {
  if (!J.square()) throw Error(ErrorCode::InvalidArgument, "char_poly needs a square matrix");
  const std::size_t n = J.rows();
  using LD = long double;
  std::vector<LD> A(n * n), M(n * n, 0.0L), AM(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) A[r * n + c] = J(r, c);
  std::vector<LD> coeff(n + 1, 0.0L);
  coeff[0] = 1.0L;
  // M_k = A M_{k-1} + c_{k-1} I, c_k = -tr(A M_k) / k
  for (std::size_t k = 1; k <= n; ++k) {
    for (std::size_t d = 0; d < n; ++d) M[d * n + d] += coeff[k - 1];
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        LD acc = 0.0L;
        for (std::size_t t = 0; t < n; ++t) acc += A[r * n + t] * M[t * n + c];
        AM[r * n + c] = acc;
      }
    LD tr = 0.0L;
    for (std::size_t d = 0; d < n; ++d) tr += AM[d * n + d];
    coeff[k] = -tr / static_cast<LD>(k);
    M = AM;
  }
  return {coeff.begin(), coeff.end()};
}

Matrix companion(std::span<const double> p) {
  if (p.size() < 2 || p[0] != 1.0) throw Error(ErrorCode::InvalidArgument, "companion needs a monic polynomial");
  const std::size_t n = p.size() - 1;
  Matrix C(n, n);
  for (std::size_t c = 0; c < n; ++c) C(0, c) = -p[c + 1];
  for (std::size_t r = 1; r < n; ++r) C(r, r - 1) = 1.0;
  return C;
}

namespace {

void to_hessenberg(Matrix& A) {
  const std::size_t n = A.rows();
  if (n < 3) return;
  std::vector<double> v(n);
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double alpha = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) alpha += A(i, k) * A(i, k);
    alpha = std::sqrt(alpha);
    if (alpha == 0.0) continue;
    if (A(k + 1, k) > 0) alpha = -alpha;
    std::fill(v.begin(), v.end(), 0.0);
    v[k + 1] = A(k + 1, k) - alpha;
    for (std::size_t i = k + 2; i < n; ++i) v[i] = A(i, k);
    double vv = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vv += v[i] * v[i];
    if (vv == 0.0) continue;
    // A <- (I - 2vv'/v'v) A (I - 2vv'/v'v)
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) s += v[i] * A(i, c);
      s *= 2.0 / vv;
      for (std::size_t i = k + 1; i < n; ++i) A(i, c) -= s * v[i];
    }
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t i = k + 1; i < n; ++i) s += A(r, i) * v[i];
      s *= 2.0 / vv;
      for (std::size_t i = k + 1; i < n; ++i) A(r, i) -= s * v[i];
    }
    for (std::size_t i = k + 2; i < n; ++i) A(i, k) = 0.0;
  }
}

cd wilkinson_shift(cd a, cd b, cd c, cd d) {
  // eigenvalue of [[a, b], [c, d]] closer to d
  const cd half_tr = 0.5 * (a + d);
  const cd disc = std::sqrt(0.25 * (a - d) * (a - d) + b * c);
  const cd e1 = half_tr + disc;
  const cd e2 = half_tr - disc;
  return std::abs(e1 - d) < std::abs(e2 - d) ? e1 : e2;
}

}  // namespace

std::vector<cd> eigenvalues(const Matrix& J) {
  if (!J.square()) throw Error(ErrorCode::InvalidArgument, "eigenvalues needs a square matrix");
  const std::size_t n = J.rows();
  if (n == 0) return {};
  Matrix R = J;
  to_hessenberg(R);
  std::vector<cd> H(n * n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) H[r * n + c] = R(r, c);
  auto h = [&](std::size_t r, std::size_t c) -> cd& { return H[r * n + c]; };

  const double scale = std::max(J.max_abs(), std::numeric_limits<double>::min());
  std::vector<cd> eig(n);
  std::vector<cd> cs(n), sn(n);
  long long total = 0;
  const long long budget = 100LL * static_cast<long long>(n);
  int its = 0;
  std::size_t hi = n - 1;
  for (;;) {
    if (hi == 0) {
      eig[0] = h(0, 0);
      break;
    }
    std::size_t lo = hi;
    while (lo > 0) {
      const double sub = std::abs(h(lo, lo - 1));
      double ref = std::abs(h(lo, lo)) + std::abs(h(lo - 1, lo - 1));
      if (ref == 0.0) ref = scale;
      if (sub <= kDeflateTol * ref) {
        h(lo, lo - 1) = 0.0;
        break;
      }
      --lo;
    }
    if (lo == hi) {
      eig[hi] = h(hi, hi);
      --hi;
      its = 0;
      continue;
    }
    if (++total > budget) throw Error(ErrorCode::NoConvergence, "QR iteration did not converge");

    cd mu = 0.0;
    if (its >= 2) {
      if (its % 11 == 10)
        mu = h(hi, hi) + 0.75 * std::abs(h(hi, hi - 1));
      else
        mu = wilkinson_shift(h(hi - 1, hi - 1), h(hi - 1, hi), h(hi, hi - 1), h(hi, hi));
    }
    ++its;

    for (std::size_t k = lo; k <= hi; ++k) h(k, k) -= mu;
    for (std::size_t k = lo; k < hi; ++k) {
      const cd a = h(k, k);
      const cd b = h(k + 1, k);
      const double r = std::hypot(std::abs(a), std::abs(b));
      cd c = 1.0;
      cd s = 0.0;
      if (r != 0.0) {
        c = a / r;
        s = b / r;
      }
      cs[k] = c;
      sn[k] = s;
      // rows k, k+1 <- G rows, G = [[conj c, conj s], [-s, c]]
      for (std::size_t j = k; j <= hi; ++j) {
        const cd x = h(k, j);
        const cd y = h(k + 1, j);
        h(k, j) = std::conj(c) * x + std::conj(s) * y;
        h(k + 1, j) = -s * x + c * y;
      }
    }
    for (std::size_t k = lo; k < hi; ++k) {
      const cd c = cs[k];
      const cd s = sn[k];
      // columns k, k+1 <- columns G^H
      for (std::size_t i = lo; i <= std::min(k + 1, hi); ++i) {
        const cd x = h(i, k);
        const cd y = h(i, k + 1);
        h(i, k) = x * c + y * s;
        h(i, k + 1) = -x * std::conj(s) + y * std::conj(c);
      }
    }
    for (std::size_t k = lo; k <= hi; ++k) h(k, k) += mu;
  }
  return eig;
}

std::vector<double> eig_real_parts(const Matrix& J) {
  const auto eig = eigenvalues(J);
  std::vector<double> re(eig.size());
  std::transform(eig.begin(), eig.end(), re.begin(), [](cd z) { return z.real(); });
  return re;
}

Verdict eigen_verdict(std::span<const double> re) {
  if (re.empty()) return Verdict::Marginal;
  const double top = *std::max_element(re.begin(), re.end());
  if (top < -kMarginalBand) return Verdict::AsymptoticallyStable;
  if (top > kMarginalBand) return Verdict::Unstable;
  return Verdict::Marginal;
}

RhResult rh_quartic(double a1, double a2, double a3, double a4) {
  using LD = long double;
  const LD A1 = a1, A2 = a2, A3 = a3, A4 = a4;
  const LD pos = A1 * A2 * A3;
  const LD neg = A3 * A3 + A1 * A1 * A4;
  RhResult out{static_cast<double>(pos - neg), Verdict::Unstable};
  if (a1 > 0 && a2 > 0 && a3 > 0 && a4 > 0) {
    if (out.margin > 0)
      out.verdict = Verdict::AsymptoticallyStable;
    else if (std::abs(pos - neg) <= 1e-15L * (std::abs(pos) + std::abs(neg)))
      out.verdict = Verdict::Marginal;
  }
  return out;
}

StabilityReport stability_report(const MarketParams& params, const StateDistribution& steady) {
  StabilityReport rep;
  rep.jacobian = jacobian(params, steady);
  rep.char_poly = char_poly(rep.jacobian);
  rep.eigenvalues = eigenvalues(rep.jacobian);
  rep.eig_real_parts.reserve(rep.eigenvalues.size());
  for (cd z : rep.eigenvalues) rep.eig_real_parts.push_back(z.real());
  rep.verdict = eigen_verdict(rep.eig_real_parts);
  if (params.kind() == ModelKind::PartiallySegmented && params.K() == 2) {
    const auto& c = rep.char_poly;
    rep.rh_coeffs = std::array<double, 4>{c[1], c[2], c[3], c[4]};
    const auto rh = rh_quartic(c[1], c[2], c[3], c[4]);
    rep.rh_margin = rh.margin;
    rep.rh_verdict = rh.verdict;
  }
  return rep;
}

MarketParams sample_params(ModelKind kind, int K, std::mt19937_64& rng, const SamplerRange& range) {
  if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double llo = std::log(range.rate_lo);
  const double lhi = std::log(range.rate_hi);
  auto rate = [&] { return std::exp(llo + (lhi - llo) * unit(rng)); };
  auto rates = [&] {
    std::vector<double> v(static_cast<std::size_t>(K));
    for (auto& x : v) x = rate();
    return v;
  };

  RawParams raw;
  raw.K = K;
  raw.lambda = rates();
  raw.gamma_ui = rates();
  raw.gamma_di = rates();
  if (kind == ModelKind::NonSegmented) {
    raw.gamma_u = rate();
    raw.gamma_d = rate();
  } else {
    raw.tgamma_ui = rates();
    raw.tgamma_di = rates();
  }
  const double total = range.mass_lo + (range.mass_hi - range.mass_lo) * unit(rng);
  std::vector<double> w(static_cast<std::size_t>(K));
  double wsum = 0.0;
  for (auto& x : w) {
    x = 0.05 + unit(rng);
    wsum += x;
  }
  for (auto& x : w) x *= total / wsum;
  raw.m = w;
  return make_params(kind, raw);
}

RhSweepSummary rh_margin_sweep(const ParamSampler& sampler, int n_draws, std::uint64_t seed) {
  RhSweepSummary out;
  out.min_margin = std::numeric_limits<double>::infinity();
  out.min_relative_margin = std::numeric_limits<double>::infinity();
  out.min_coeff = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  for (int d = 0; d < n_draws; ++d) {
    ++out.draws;
    try {
      const MarketParams params = sampler(rng);
      if (params.kind() != ModelKind::PartiallySegmented || params.K() != 2)
        throw Error(ErrorCode::InvalidArgument, "sweep sampler must yield segmented K=2 instances");
      const auto steady = solve_steady(params);
      const auto rep = stability_report(params, steady.dist);
      const auto& a = *rep.rh_coeffs;
      const double m = *rep.rh_margin;
      out.min_margin = std::min(out.min_margin, m);
      out.min_relative_margin = std::min(out.min_relative_margin, m / (a[0] * a[1] * a[2]));
      out.min_coeff = std::min({out.min_coeff, a[0], a[1], a[2], a[3]});
      if (a[0] <= 0 || a[1] <= 0 || a[2] <= 0 || a[3] <= 0 || m <= 0) out.violations.push_back(d);
      if (*rep.rh_verdict != rep.verdict) out.disagreements.push_back(d);
    } catch (const Error& e) {
      ++out.solver_failures;
      out.failure_messages.push_back("draw " + std::to_string(d) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace otc
