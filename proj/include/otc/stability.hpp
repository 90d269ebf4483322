#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "otc/linalg.hpp"
#include "otc/model.hpp"

namespace otc {

enum class Verdict { AsymptoticallyStable, Unstable, Marginal };
const char* to_string(Verdict v);

/// Analytic Jacobian of the non-segmented system in coordinates
/// (mu(l1,o) .. mu(lK,o), mu(h,n)).
Matrix jacobian_nonseg(const MarketParams& params, const StateDistribution& steady);

/// Analytic Jacobian of the segmented system in coordinates
/// (mu(h1,n) .. mu(hK,n), mu(l1,o) .. mu(lK,o)).
Matrix jacobian_seg(const MarketParams& params, const StateDistribution& steady);

Matrix jacobian(const MarketParams& params, const StateDistribution& steady);

/// Monic characteristic polynomial det(xi I - J), descending powers:
/// {1, c_{n-1}, ..., c_0}. Faddeev-LeVerrier in extended precision.
std::vector<double> char_poly(const Matrix& J);

/// Companion matrix of a monic polynomial given in descending powers.
Matrix companion(std::span<const double> monic);

/// All eigenvalues: Householder reduction to Hessenberg form, then complex
/// QR iteration (two unshifted sweeps, Wilkinson shifts afterwards) with
/// deflation at relative subdiagonal 1e-12. Throws NoConvergence after 100n
/// iterations.
std::vector<std::complex<double>> eigenvalues(const Matrix& J);
std::vector<double> eig_real_parts(const Matrix& J);

/// Verdict from the largest real part, Marginal within 1e-10 of zero.
Verdict eigen_verdict(std::span<const double> real_parts);

struct RhResult {
  double margin = 0.0;  // a1 a2 a3 - a3^2 - a1^2 a4
  Verdict verdict = Verdict::Unstable;
};

/// Routh-Hurwitz test for xi^4 + a1 xi^3 + a2 xi^2 + a3 xi + a4.
RhResult rh_quartic(double a1, double a2, double a3, double a4);

struct StabilityReport {
  Matrix jacobian;
  std::vector<double> char_poly;
  std::vector<std::complex<double>> eigenvalues;
  std::vector<double> eig_real_parts;
  std::optional<std::array<double, 4>> rh_coeffs;  // segmented K=2 only
  std::optional<double> rh_margin;
  std::optional<Verdict> rh_verdict;
  Verdict verdict = Verdict::Unstable;
};

StabilityReport stability_report(const MarketParams& params, const StateDistribution& steady);

/// Ranges for random parameter draws. Rates are log-uniform.
struct SamplerRange {
  double rate_lo = 1e-2;
  double rate_hi = 1e4;
  double mass_lo = 0.01;  // bounds on sum m
  double mass_hi = 0.99;
};

/// A random valid instance of the given class. Asset masses split a uniform
/// total by uniform weights.
MarketParams sample_params(ModelKind kind, int K, std::mt19937_64& rng, const SamplerRange& range = {});

using ParamSampler = std::function<MarketParams(std::mt19937_64&)>;

struct RhSweepSummary {
  int draws = 0;
  int solver_failures = 0;
  std::vector<std::string> failure_messages;
  double min_margin = 0.0;
  /// Smallest margin divided by a1 a2 a3, a scale-free view of the margin.
  double min_relative_margin = 0.0;
  double min_coeff = 0.0;
  /// Draw indices with some a_k <= 0 or margin <= 0.
  std::vector<int> violations;
  /// Draw indices where the Routh-Hurwitz and eigenvalue verdicts differ.
  std::vector<int> disagreements;
};

/// For each draw: steady state, quartic coefficients, margin and the
/// eigenvalue verdict. Solver failures are counted, not thrown.
RhSweepSummary rh_margin_sweep(const ParamSampler& sampler, int n_draws, std::uint64_t seed = 1);

}  // namespace otc
