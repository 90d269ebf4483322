#pragma once

#include <vector>

#include "otc/dynamics.hpp"
#include "otc/linalg.hpp"
#include "otc/model.hpp"

namespace otc {

/// Reservation-value differences.
///   non-segmented: (D0, De, Dh_1..Dh_K, Dl_1..Dl_K), 2K+2 entries
///   segmented:     (D0, De_1..De_K, Dh_1..Dh_K, Dl_1..Dl_K), 3K+1 entries
/// D0 = V(l,n); De = V(h,n) - V(l,n) (or V(hi,n) - V(l,n));
/// Dh_i is the buyer's reservation price, Dl_i the seller's.
struct DeltaVector {
  ModelKind kind = ModelKind::NonSegmented;
  double delta0 = 0.0;
  std::vector<double> delta_e;  // size 1 non-segmented, K segmented
  std::vector<double> delta_h;
  std::vector<double> delta_l;

  [[nodiscard]] std::vector<double> flat() const;
  static DeltaVector from_flat(ModelKind kind, int K, std::span<const double> flat);
};

struct LinearSystem {
  Matrix M;
  std::vector<double> rhs;
};

/// M Delta = delta for the non-segmented market, (2K+2) x (2K+2).
LinearSystem build_matrix_nonseg(const MarketParams& params, const StateDistribution& steady);

/// M Delta = delta for the partially segmented market, (3K+1) x (3K+1).
LinearSystem build_matrix_seg(const MarketParams& params, const StateDistribution& steady);

LinearSystem build_matrix(const MarketParams& params, const StateDistribution& steady);

struct DeltaSolution {
  DeltaVector deltas;
  double condition_estimate = 0.0;
};

/// Dense LU with partial pivoting. Throws SingularMatrix.
DeltaSolution solve_deltas(ModelKind kind, int K, const LinearSystem& system);

struct Prices {
  std::vector<double> P;
  /// Assets whose seller reservation value exceeds the buyer's.
  std::vector<int> inverted_spread;
};

/// P_i = (1 - q) Dl_i + q Dh_i.
Prices price_from_deltas(const DeltaVector& deltas, double q);

/// Intrinsic values V(z) implied by a Delta vector.
StateValues values_from_deltas(const DeltaVector& deltas, int K);

struct PriceReport {
  DeltaVector deltas;
  std::vector<double> prices;
  StateValues values;
  double matrix_condition_estimate = 0.0;
  std::vector<int> inverted_spread;
};

/// Steady reservation values, prices and intrinsic values at `steady`.
/// Requires the valuation block (r, delta_h, delta_d, q) in `params`.
PriceReport price(const MarketParams& params, const StateDistribution& steady);

/// Time derivative of every intrinsic value V(t,z) given the current
/// distribution, values and trade prices.
StateValues value_rhs(const MarketParams& params, const StateDistribution& dist, const StateValues& V,
                      std::span<const double> P);

/// Trade prices implied pointwise by the reservation spreads of `V`.
Prices prices_from_values(const MarketParams& params, const StateValues& V);

struct ValueTrajectory {
  std::vector<double> times;
  std::vector<StateValues> values;
  std::vector<std::vector<double>> prices;
  /// (time, asset) pairs where the recorded spread was inverted.
  std::vector<std::pair<double, int>> inverted_spread;
};

struct BackwardOptions {
  /// Sub-steps per interval of the distribution trajectory.
  int substeps = 1;
};

/// RK4 backward in time from `terminal` at the last time of `mu_traj`,
/// with prices recomputed from the instantaneous reservation spreads at
/// every stage. The distribution between samples comes from cubic Hermite
/// interpolation. Output is aligned with `mu_traj.times`.
ValueTrajectory integrate_values_backward(const MarketParams& params, const Trajectory& mu_traj,
                                          const StateValues& terminal, const BackwardOptions& opts = {});

struct CalibrationGrid {
  double q_step = 0.05;
  double delta_d_lo = 0.0;
  double delta_d_hi = 5.0;
  double delta_d_step = 0.01;
  double delta_h = 1.0;
  double r = 0.05;
};

struct CalibrationResult {
  double q = 0.0;
  double delta_d = 0.0;
  double price_nonseg = 0.0;
  double price_seg = 0.0;
  /// max(|price_nonseg - target_nonseg|, |price_seg - target_seg|)
  double max_error = 0.0;
  int evaluations = 0;
};

/// Searches (q, delta_d) with common delta_h and r across all assets so that
/// asset-1 prices match both targets. Coarse grid over q and delta_d, then a
/// golden-section refinement of delta_d around the best cell for each q.
CalibrationResult calibrate_prices(const MarketParams& nonseg, const MarketParams& seg, double target_nonseg,
                                   double target_seg, const CalibrationGrid& grid = {});

}  // namespace otc
