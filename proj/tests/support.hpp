#pragma once

// Fixtures and independent oracles shared by the unit tests and the
// acceptance runner. Nothing here calls the code paths it is used to check.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "otc/model.hpp"
#include "otc/valuation.hpp"

namespace otc {

struct UncheckedParamsAccess {
  static MarketParams build(ModelKind kind, const RawParams& raw) { return MarketParams::build_unchecked(kind, raw); }
};

}  // namespace otc

namespace otc::testing {

inline RawParams baseline_raw(ModelKind kind) {
  RawParams raw;
  raw.K = 2;
  raw.lambda = std::vector<double>{1250, 1250};
  raw.gamma_ui = std::vector<double>{5, 5};
  raw.gamma_di = std::vector<double>{0.5, 0.5};
  raw.m = std::vector<double>{0.4, 0.4};
  if (kind == ModelKind::NonSegmented) {
    raw.gamma_u = 5;
    raw.gamma_d = 0.5;
  } else {
    raw.tgamma_ui = std::vector<double>{5, 5};
    raw.tgamma_di = std::vector<double>{0.5, 0.5};
  }
  return raw;
}

inline MarketParams baseline(ModelKind kind) { return make_params(kind, baseline_raw(kind)); }

inline double max_rate(const MarketParams& p) {
  double r = 1.0;
  for (std::size_t i = 0; i < p.assets(); ++i) {
    r = std::max({r, p.lambda()[i], p.gamma_ui()[i], p.gamma_di()[i]});
    if (p.kind() == ModelKind::PartiallySegmented) r = std::max({r, p.tgamma_ui()[i], p.tgamma_di()[i]});
  }
  if (p.kind() == ModelKind::NonSegmented) r = std::max({r, p.gamma_u(), p.gamma_d()});
  return r;
}

inline ValuationParams valuation(int K, double r, double dh, double dd, double q) {
  const auto k = static_cast<std::size_t>(K);
  return {r, std::vector<double>(k, dh), std::vector<double>(k, dd), q};
}

/// One-asset pair with matched rates: segmented tgamma = non-segmented gamma.
inline std::pair<MarketParams, MarketParams> matched_k1(double lambda, double gu, double gd, double gui, double gdi,
                                                       double m) {
  RawParams ns;
  ns.K = 1;
  ns.lambda = std::vector<double>{lambda};
  ns.gamma_u = gu;
  ns.gamma_d = gd;
  ns.gamma_ui = std::vector<double>{gui};
  ns.gamma_di = std::vector<double>{gdi};
  ns.m = std::vector<double>{m};
  RawParams sg = ns;
  sg.gamma_u.reset();
  sg.gamma_d.reset();
  sg.tgamma_ui = std::vector<double>{gu};
  sg.tgamma_di = std::vector<double>{gd};
  return {make_params(ModelKind::NonSegmented, ns), make_params(ModelKind::PartiallySegmented, sg)};
}

/// Residual of the Delta equations written as r*Delta = (right-hand side)
/// one equation per state difference, not via the coefficient matrix.
/// T = long double evaluates every product in extended precision.
template <class T = double>
std::vector<T> delta_equation_residual(const MarketParams& p, const StateDistribution& mu, const DeltaVector& d) {
  const auto& val = p.valuation();
  const T r = val.r;
  const T q = val.q;
  const std::size_t K = p.assets();
  auto lam = [&](std::size_t i) { return static_cast<T>(p.lambda()[i]); };
  auto gui = [&](std::size_t i) { return static_cast<T>(p.gamma_ui()[i]); };
  auto gdi = [&](std::size_t i) { return static_cast<T>(p.gamma_di()[i]); };
  auto dh = [&](std::size_t i) { return static_cast<T>(d.delta_h[i]); };
  auto dl = [&](std::size_t i) { return static_cast<T>(d.delta_l[i]); };
  auto de = [&](std::size_t i) { return static_cast<T>(d.delta_e[i]); };
  auto vh = [&](std::size_t i) { return static_cast<T>(val.delta_h[i]); };
  auto vd = [&](std::size_t i) { return static_cast<T>(val.delta_d[i]); };
  auto lio = [&](std::size_t i) { return static_cast<T>(mu.li_o(i)); };
  const T d0 = d.delta0;
  std::vector<T> res;
  if (p.kind() == ModelKind::NonSegmented) {
    const T gu = p.gamma_u(), gd = p.gamma_d(), hn = mu.h_n();
    const T De = de(0);
    T trade = 0;  // sum_j lambda_j mu(lj,o) (1-q) (Dh_j - Dl_j)
    for (std::size_t j = 0; j < K; ++j) trade += lam(j) * lio(j) * (1 - q) * (dh(j) - dl(j));
    res.push_back(r * d0 - gu * De);
    res.push_back(r * De - (trade - (gu + gd) * De));
    for (std::size_t i = 0; i < K; ++i) {
      const T rhs = gdi(i) * (dl(i) - dh(i) - De) - trade + gd * De + vh(i);
      res.push_back(r * dh(i) - rhs);
    }
    for (std::size_t i = 0; i < K; ++i) {
      const T rhs = lam(i) * hn * q * (dh(i) - dl(i)) - gui(i) * (dl(i) - dh(i) - De) - gu * De + vh(i) - vd(i);
      res.push_back(r * dl(i) - rhs);
    }
  } else {
    auto tgu = [&](std::size_t i) { return static_cast<T>(p.tgamma_ui()[i]); };
    auto tgd = [&](std::size_t i) { return static_cast<T>(p.tgamma_di()[i]); };
    T inflow = 0;  // sum_j tgamma_uj De_j
    for (std::size_t j = 0; j < K; ++j) inflow += tgu(j) * de(j);
    res.push_back(r * d0 - inflow);
    for (std::size_t i = 0; i < K; ++i) {
      const T trade = lam(i) * lio(i) * (1 - q) * (dh(i) - dl(i));
      res.push_back(r * de(i) - (trade - tgd(i) * de(i) - inflow));
    }
    for (std::size_t i = 0; i < K; ++i) {
      const T trade = lam(i) * lio(i) * (1 - q) * (dh(i) - dl(i));
      const T rhs = gdi(i) * (dl(i) - dh(i) - de(i)) - trade + tgd(i) * de(i) + vh(i);
      res.push_back(r * dh(i) - rhs);
    }
    for (std::size_t i = 0; i < K; ++i) {
      const T hin = mu.hi_n(i);
      const T rhs = lam(i) * hin * q * (dh(i) - dl(i)) - gui(i) * (dl(i) - dh(i) - de(i)) - inflow + vh(i) - vd(i);
      res.push_back(r * dl(i) - rhs);
    }
  }
  return res;
}

/// Quartic coefficients of the two-asset segmented Jacobian, written out
/// term by term in closed form. x = mu(h1,n), y = mu(h2,n),
/// z = mu(l1,o), v = mu(l2,o).
inline std::array<double, 4> quartic_closed_form(const MarketParams& p, const StateDistribution& s) {
  const double gu1 = p.gamma_ui()[0], gu2 = p.gamma_ui()[1];
  const double gd1 = p.gamma_di()[0], gd2 = p.gamma_di()[1];
  const double tu1 = p.tgamma_ui()[0], tu2 = p.tgamma_ui()[1];
  const double td1 = p.tgamma_di()[0], td2 = p.tgamma_di()[1];
  const double l1 = p.lambda()[0], l2 = p.lambda()[1];
  const double x = s.hi_n(0), y = s.hi_n(1), z = s.li_o(0), v = s.li_o(1);

  const double a1 = gd1 + gd2 + gu1 + gu2 + td1 + td2 + tu1 + tu2 + l2 * (v + y) + l1 * (x + z);

  const double a2 =
      gu1 * gu2 + gu1 * td1 + gu2 * td1 + gu1 * td2 + gu2 * td2 + td1 * td2 + gu1 * tu1 + gu2 * tu1 + td2 * tu1 +
      gu1 * tu2 + gu2 * tu2 + td1 * tu2 + gu1 * l2 * v + gu2 * l2 * v + l2 * td1 * v + l2 * tu1 * v +
      gu2 * l1 * x + l1 * td1 * x + l1 * td2 * x + l1 * tu1 * x + l1 * tu2 * x + l1 * l2 * v * x + gu1 * l2 * y +
      l2 * td1 * y + l2 * td2 * y + l2 * tu1 * y + l2 * tu2 * y + l1 * l2 * x * y +
      l1 * (gu1 + gu2 + td2 + tu2 + l2 * (v + y)) * z +
      gd1 * (gd2 + gu2 + td1 + td2 + tu1 + tu2 + l2 * (v + y) + l1 * z) +
      gd2 * (gu1 + td1 + td2 + tu1 + tu2 + l2 * v + l1 * (x + z));

  const double a3 =
      gu1 * gu2 * td1 + gu1 * gu2 * td2 + gu1 * td1 * td2 + gu2 * td1 * td2 + gu1 * gu2 * tu1 + gu1 * td2 * tu1 +
      gu2 * td2 * tu1 + gu1 * gu2 * tu2 + gu1 * td1 * tu2 + gu2 * td1 * tu2 + gu1 * gu2 * l2 * v +
      gu1 * l2 * td1 * v + gu2 * l2 * td1 * v + gu1 * l2 * tu1 * v + gu2 * l2 * tu1 * v + gu2 * l1 * td1 * x +
      gu2 * l1 * td2 * x + l1 * td1 * td2 * x + gu2 * l1 * tu1 * x + l1 * td2 * tu1 * x + gu2 * l1 * tu2 * x +
      l1 * td1 * tu2 * x + gu2 * l1 * l2 * v * x + l1 * l2 * td1 * v * x + l1 * l2 * tu1 * v * x +
      gu1 * l2 * td1 * y + gu1 * l2 * td2 * y + l2 * td1 * td2 * y + gu1 * l2 * tu1 * y + l2 * td2 * tu1 * y +
      gu1 * l2 * tu2 * y + l2 * td1 * tu2 * y + l1 * l2 * td1 * x * y + l1 * l2 * td2 * x * y +
      l1 * l2 * tu1 * x * y + l1 * l2 * tu2 * x * y +
      l1 * (gu2 * (td2 + tu2 + l2 * v) + l2 * (td2 + tu2) * y + gu1 * (gu2 + td2 + tu2 + l2 * (v + y))) * z +
      gd2 * (td2 * tu1 + l2 * tu1 * v + l1 * td2 * x + l1 * tu1 * x + l1 * tu2 * x + l1 * l2 * v * x +
             td1 * (td2 + tu2 + l2 * v + l1 * x) + l1 * (td2 + tu2 + l2 * v) * z +
             gu1 * (td1 + td2 + tu1 + tu2 + l2 * v + l1 * z)) +
      gd1 * (td1 * td2 + td2 * tu1 + td1 * tu2 + l2 * td1 * v + l2 * tu1 * v + l2 * td1 * y + l2 * td2 * y +
             l2 * tu1 * y + l2 * tu2 * y + l1 * (td2 + tu2 + l2 * (v + y)) * z +
             gd2 * (td1 + td2 + tu1 + tu2 + l2 * v + l1 * z) + gu2 * (td1 + td2 + tu1 + tu2 + l2 * v + l1 * z));

  const double a4 =
      (gd1 + gu1 + l1 * x) * ((gd2 + gu2) * (tu1 * (td2 + l2 * v) + td1 * (td2 + tu2 + l2 * v)) +
                              l2 * (td2 * tu1 + td1 * (td2 + tu2)) * y) +
      (gd1 + gu1) * l1 * ((gd2 + gu2) * (td2 + tu2 + l2 * v) + l2 * (td2 + tu2) * y) * z;

  return {a1, a2, a3, a4};
}

/// Durand-Kerner roots of a monic polynomial in descending powers.
inline std::vector<std::complex<double>> durand_kerner(const std::vector<double>& p, int iters = 2000) {
  using cd = std::complex<double>;
  const std::size_t n = p.size() - 1;
  double bound = 0.0;
  for (std::size_t k = 1; k < p.size(); ++k) bound = std::max(bound, std::abs(p[k]));
  bound += 1.0;
  std::vector<cd> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = bound * std::pow(cd(0.4, 0.9), static_cast<double>(k));
  auto eval = [&](cd x) {
    cd acc = 0.0;
    for (double c : p) acc = acc * x + c;
    return acc;
  };
  for (int it = 0; it < iters; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cd den = 1.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) den *= z[i] - z[j];
      const cd step = eval(z[i]) / den;
      z[i] -= step;
      change = std::max(change, std::abs(step) / std::max(1.0, std::abs(z[i])));
    }
    if (change < 1e-15) break;
  }
  return z;
}

/// Greedy matching distance between two multisets of complex numbers.
inline double spectrum_distance(std::vector<std::complex<double>> a, std::vector<std::complex<double>> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (const auto& x : a) {
    auto best = std::min_element(b.begin(), b.end(),
                                 [&](const auto& u, const auto& w) { return std::abs(u - x) < std::abs(w - x); });
    worst = std::max(worst, std::abs(*best - x) / std::max(1.0, std::abs(x)));
    b.erase(best);
  }
  return worst;
}

}  // namespace otc::testing
