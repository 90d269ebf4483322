#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace otc {

enum class ModelKind { NonSegmented, PartiallySegmented };

std::string to_string(ModelKind kind);

/// Number of free (reduced) coordinates: 1+K non-segmented, 2K segmented.
int free_dim(ModelKind kind, int K);

/// Number of investor states in E: 2K+2 non-segmented, 3K+1 segmented.
int state_count(ModelKind kind, int K);

/// Field values as they arrive from a config file or a caller. Absent
/// fields stay empty; `make_params` decides which are required.
struct RawParams {
  std::optional<int> K;
  std::optional<std::vector<double>> lambda;
  std::optional<double> gamma_u;
  std::optional<double> gamma_d;
  std::optional<std::vector<double>> gamma_ui;
  std::optional<std::vector<double>> gamma_di;
  std::optional<std::vector<double>> tgamma_ui;
  std::optional<std::vector<double>> tgamma_di;
  std::optional<std::vector<double>> m;
  std::optional<double> r;
  std::optional<std::vector<double>> delta_h;
  std::optional<std::vector<double>> delta_d;
  std::optional<double> q;

  friend bool operator==(const RawParams&, const RawParams&) = default;
};

struct ValuationParams {
  double r = 0.0;
  std::vector<double> delta_h;
  std::vector<double> delta_d;
  double q = 0.0;
};

struct UncheckedParamsAccess;

/// Validated rate, mass and valuation parameters for one market instance.
/// Immutable after construction; obtain one through `make_params`.
class MarketParams {
 public:
  [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
  [[nodiscard]] int K() const noexcept { return K_; }
  [[nodiscard]] std::size_t assets() const noexcept { return static_cast<std::size_t>(K_); }

  [[nodiscard]] std::span<const double> lambda() const noexcept { return lambda_; }
  [[nodiscard]] std::span<const double> gamma_ui() const noexcept { return gamma_ui_; }
  [[nodiscard]] std::span<const double> gamma_di() const noexcept { return gamma_di_; }
  [[nodiscard]] std::span<const double> m() const noexcept { return m_; }

  // Non-segmented only; throw KindMismatch otherwise.
  [[nodiscard]] double gamma_u() const;
  [[nodiscard]] double gamma_d() const;
  /// gamma_u + gamma_d.
  [[nodiscard]] double gamma() const;

  // Segmented only; throw KindMismatch otherwise.
  [[nodiscard]] std::span<const double> tgamma_ui() const;
  [[nodiscard]] std::span<const double> tgamma_di() const;
  /// tgamma_ui[i] + tgamma_di[i].
  [[nodiscard]] double tgamma_i(std::size_t i) const;

  /// gamma_ui[i] + gamma_di[i].
  [[nodiscard]] double gamma_i(std::size_t i) const { return gamma_ui_[i] + gamma_di_[i]; }

  [[nodiscard]] double total_mass() const noexcept;
  /// 1 - sum(m): the non-owner mass.
  [[nodiscard]] double free_mass() const noexcept { return 1.0 - total_mass(); }

  [[nodiscard]] bool has_valuation() const noexcept { return valuation_.has_value(); }
  /// Throws MissingField when r, delta_h, delta_d or q were not supplied.
  [[nodiscard]] const ValuationParams& valuation() const;

  /// Copy with every meeting intensity replaced; revalidated.
  [[nodiscard]] MarketParams with_lambda(std::vector<double> lambda) const;
  /// Copy with replaced valuation block; revalidated.
  [[nodiscard]] MarketParams with_valuation(ValuationParams valuation) const;

  /// The raw field set this instance was built from.
  [[nodiscard]] RawParams raw() const;

 private:
  friend MarketParams make_params(ModelKind kind, const RawParams& raw);
  friend struct UncheckedParamsAccess;

  static MarketParams build_unchecked(ModelKind kind, const RawParams& raw);
  MarketParams() = default;

  ModelKind kind_ = ModelKind::NonSegmented;
  int K_ = 0;
  std::vector<double> lambda_;
  double gamma_u_ = 0.0;
  double gamma_d_ = 0.0;
  std::vector<double> gamma_ui_;
  std::vector<double> gamma_di_;
  std::vector<double> tgamma_ui_;
  std::vector<double> tgamma_di_;
  std::vector<double> m_;
  std::optional<ValuationParams> valuation_;
};

/// Validates `raw` for `kind`. Errors: NonPositiveRate, MassOverflow
/// (sum m >= 1), WrongFamilyField, MissingField, InvalidArgument.
MarketParams make_params(ModelKind kind, const RawParams& raw);

/// One investor state in E.
struct State {
  enum class Type { LowNonOwner, HighNonOwner, HighSeeker, HighOwner, LowOwner };
  Type type;
  int asset = -1;  // 0-based; -1 for (l,n) and (h,n)

  [[nodiscard]] std::string label() const;  // e.g. "h1,o"
  friend bool operator==(const State&, const State&) = default;
};

/// Canonical ordering of E:
///   non-segmented: (l,n), (h,n), (h1,o)..(hK,o), (l1,o)..(lK,o)
///   segmented:     (l,n), (h1,n)..(hK,n), (h1,o)..(hK,o), (l1,o)..(lK,o)
std::vector<State> state_layout(ModelKind kind, int K);

/// A value attached to every state of E, in `state_layout` order. Used for
/// probabilities, intrinsic values and their time derivatives.
struct StateValues {
  ModelKind kind = ModelKind::NonSegmented;
  int K = 0;
  std::vector<double> values;

  [[nodiscard]] std::size_t index_of(const State& s) const;
  [[nodiscard]] double at(const State& s) const { return values[index_of(s)]; }
  double& at(const State& s) { return values[index_of(s)]; }
  [[nodiscard]] std::vector<State> layout() const { return state_layout(kind, K); }
};

/// Distribution over E stored in reduced coordinates:
///   non-segmented: (mu(h,n), mu(l1,o)..mu(lK,o))
///   segmented:     (mu(h1,n)..mu(hK,n), mu(l1,o)..mu(lK,o))
/// mu(hi,o) and mu(l,n) are derived from the ownership and normalization
/// constraints, so the constraints hold by construction.
class StateDistribution {
 public:
  /// Throws InfeasibleDistribution when a stored entry leaves [0,1] or a
  /// derived entry is below -1e-12.
  StateDistribution(ModelKind kind, std::vector<double> m, std::vector<double> reduced);
  StateDistribution(const MarketParams& params, std::vector<double> reduced)
      : StateDistribution(params.kind(), std::vector<double>(params.m().begin(), params.m().end()),
                          std::move(reduced)) {}

  /// Inverse of `full_distribution`; ownership masses are read off the map.
  static StateDistribution from_full(const StateValues& full);

  [[nodiscard]] ModelKind kind() const noexcept { return kind_; }
  [[nodiscard]] int K() const noexcept { return static_cast<int>(m_.size()); }
  [[nodiscard]] std::span<const double> reduced() const noexcept { return reduced_; }
  [[nodiscard]] std::span<const double> m() const noexcept { return m_; }

  /// mu(h,n); non-segmented only.
  [[nodiscard]] double h_n() const;
  /// mu(hi,n); segmented only.
  [[nodiscard]] double hi_n(std::size_t i) const;
  /// Sum of high-type non-owners: mu(h,n) or sum_i mu(hi,n).
  [[nodiscard]] double high_nonowners() const;
  [[nodiscard]] double li_o(std::size_t i) const { return reduced_[lio_offset() + i]; }
  [[nodiscard]] double hi_o(std::size_t i) const { return m_[i] - li_o(i); }
  [[nodiscard]] double l_n() const;

  friend bool operator==(const StateDistribution&, const StateDistribution&) = default;

 private:
  [[nodiscard]] std::size_t lio_offset() const noexcept {
    return kind_ == ModelKind::NonSegmented ? 1 : m_.size();
  }

  ModelKind kind_;
  std::vector<double> m_;
  std::vector<double> reduced_;
};

/// All 2K+2 (or 3K+1) state probabilities. Throws InfeasibleDistribution
/// if a derived coordinate is below -1e-12.
StateValues full_distribution(const StateDistribution& dist);

enum class SteadyMethod { BisectionNewton, CurveIntersection, DampedFixedPoint };

std::string to_string(SteadyMethod method);

/// Bracket bookkeeping of the scalar root solve.
struct RootDiagnostics {
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double f_lo = 0.0;
  double f_hi = 0.0;
  int newton_polish_steps = 0;
};

struct SteadyState {
  StateDistribution dist;
  double residual_inf_norm = 0.0;
  int iterations = 0;
  SteadyMethod method = SteadyMethod::BisectionNewton;
  std::optional<RootDiagnostics> root;
  /// Set by the two-asset curve solver when the reverse composition finds a
  /// different intersection.
  bool multiple_intersections = false;
};

}  // namespace otc
