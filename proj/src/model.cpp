#include "otc/model.hpp"

#include <cmath>
#include <numeric>

#include "otc/error.hpp"

namespace otc {

namespace {

constexpr double kFeasibilityTol = 1e-12;

const std::vector<double>& require_vec(const std::optional<std::vector<double>>& v, const char* name,
                                       int K) {
  if (!v) throw Error(ErrorCode::MissingField, name);
  if (static_cast<int>(v->size()) != K)
    throw Error(ErrorCode::InvalidArgument,
                std::string(name) + " must have K=" + std::to_string(K) + " entries");
  return *v;
}

void require_positive(std::span<const double> v, const char* name) {
  for (double x : v)
    if (!(x > 0.0) || !std::isfinite(x))
      throw Error(ErrorCode::NonPositiveRate, std::string(name) + " must be strictly positive");
}

void require_positive(double x, const char* name) { require_positive(std::span<const double>(&x, 1), name); }

void require_finite(std::span<const double> v, const char* name) {
  for (double x : v)
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be finite");
}

}  // namespace

std::string to_string(ModelKind kind) {
  return kind == ModelKind::NonSegmented ? "nonsegmented" : "segmented";
}

std::string to_string(SteadyMethod method) {
  switch (method) {
    case SteadyMethod::BisectionNewton: return "BisectionNewton";
    case SteadyMethod::CurveIntersection: return "CurveIntersection";
    case SteadyMethod::DampedFixedPoint: return "DampedFixedPoint";
  }
  return "Unknown";
}

int free_dim(ModelKind kind, int K) {
  if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
  return kind == ModelKind::NonSegmented ? 1 + K : 2 * K;
}

int state_count(ModelKind kind, int K) {
  if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");
  return kind == ModelKind::NonSegmented ? 2 * K + 2 : 3 * K + 1;
}

// ---------------------------------------------------------------------------
// MarketParams

MarketParams MarketParams::build_unchecked(ModelKind kind, const RawParams& raw) {
  MarketParams p;
  p.kind_ = kind;
  p.K_ = raw.K.value_or(0);
  p.lambda_ = raw.lambda.value_or(std::vector<double>{});
  p.gamma_u_ = raw.gamma_u.value_or(0.0);
  p.gamma_d_ = raw.gamma_d.value_or(0.0);
  p.gamma_ui_ = raw.gamma_ui.value_or(std::vector<double>{});
  p.gamma_di_ = raw.gamma_di.value_or(std::vector<double>{});
  p.tgamma_ui_ = raw.tgamma_ui.value_or(std::vector<double>{});
  p.tgamma_di_ = raw.tgamma_di.value_or(std::vector<double>{});
  p.m_ = raw.m.value_or(std::vector<double>{});
  if (raw.r && raw.delta_h && raw.delta_d && raw.q)
    p.valuation_ = ValuationParams{*raw.r, *raw.delta_h, *raw.delta_d, *raw.q};
  return p;
}

MarketParams make_params(ModelKind kind, const RawParams& raw) {
  if (!raw.K) throw Error(ErrorCode::MissingField, "K");
  const int K = *raw.K;
  if (K < 1) throw Error(ErrorCode::InvalidArgument, "K must be >= 1");

  require_positive(require_vec(raw.lambda, "lambda", K), "lambda");
  require_positive(require_vec(raw.gamma_ui, "gamma_ui", K), "gamma_ui");
  require_positive(require_vec(raw.gamma_di, "gamma_di", K), "gamma_di");

  if (kind == ModelKind::NonSegmented) {
    if (raw.tgamma_ui || raw.tgamma_di)
      throw Error(ErrorCode::WrongFamilyField, "tgamma_ui/tgamma_di belong to the segmented model");
    if (!raw.gamma_u) throw Error(ErrorCode::MissingField, "gamma_u");
    if (!raw.gamma_d) throw Error(ErrorCode::MissingField, "gamma_d");
    require_positive(*raw.gamma_u, "gamma_u");
    require_positive(*raw.gamma_d, "gamma_d");
  } else {
    if (raw.gamma_u || raw.gamma_d)
      throw Error(ErrorCode::WrongFamilyField, "gamma_u/gamma_d belong to the non-segmented model");
    require_positive(require_vec(raw.tgamma_ui, "tgamma_ui", K), "tgamma_ui");
    require_positive(require_vec(raw.tgamma_di, "tgamma_di", K), "tgamma_di");
  }

  const auto& m = require_vec(raw.m, "m", K);
  for (double mi : m)
    if (!(mi > 0.0) || !std::isfinite(mi)) throw Error(ErrorCode::InvalidArgument, "m_i must be > 0");
  if (std::accumulate(m.begin(), m.end(), 0.0) >= 1.0)
    throw Error(ErrorCode::MassOverflow, "sum of asset masses must be < 1");

  const int present = (raw.r ? 1 : 0) + (raw.delta_h ? 1 : 0) + (raw.delta_d ? 1 : 0) + (raw.q ? 1 : 0);
  if (present != 0 && present != 4) {
    if (!raw.r) throw Error(ErrorCode::MissingField, "r");
    if (!raw.delta_h) throw Error(ErrorCode::MissingField, "delta_h");
    if (!raw.delta_d) throw Error(ErrorCode::MissingField, "delta_d");
    throw Error(ErrorCode::MissingField, "q");
  }
  if (present == 4) {
    require_positive(*raw.r, "r");
    require_finite(require_vec(raw.delta_h, "delta_h", K), "delta_h");
    require_finite(require_vec(raw.delta_d, "delta_d", K), "delta_d");
    if (!(*raw.q >= 0.0 && *raw.q <= 1.0)) throw Error(ErrorCode::InvalidArgument, "q must lie in [0,1]");
  }
  return MarketParams::build_unchecked(kind, raw);
}

double MarketParams::gamma_u() const {
  if (kind_ != ModelKind::NonSegmented) throw Error(ErrorCode::KindMismatch, "gamma_u on segmented params");
  return gamma_u_;
}

double MarketParams::gamma_d() const {
  if (kind_ != ModelKind::NonSegmented) throw Error(ErrorCode::KindMismatch, "gamma_d on segmented params");
  return gamma_d_;
}

double MarketParams::gamma() const { return gamma_u() + gamma_d(); }

std::span<const double> MarketParams::tgamma_ui() const {
  if (kind_ != ModelKind::PartiallySegmented)
    throw Error(ErrorCode::KindMismatch, "tgamma_ui on non-segmented params");
  return tgamma_ui_;
}

std::span<const double> MarketParams::tgamma_di() const {
  if (kind_ != ModelKind::PartiallySegmented)
    throw Error(ErrorCode::KindMismatch, "tgamma_di on non-segmented params");
  return tgamma_di_;
}

double MarketParams::tgamma_i(std::size_t i) const { return tgamma_ui()[i] + tgamma_di()[i]; }

double MarketParams::total_mass() const noexcept { return std::accumulate(m_.begin(), m_.end(), 0.0); }

const ValuationParams& MarketParams::valuation() const {
  if (!valuation_) throw Error(ErrorCode::MissingField, "valuation parameters r, delta_h, delta_d, q");
  return *valuation_;
}

RawParams MarketParams::raw() const {
  RawParams raw;
  raw.K = K_;
  raw.lambda = lambda_;
  raw.gamma_ui = gamma_ui_;
  raw.gamma_di = gamma_di_;
  raw.m = m_;
  if (kind_ == ModelKind::NonSegmented) {
    raw.gamma_u = gamma_u_;
    raw.gamma_d = gamma_d_;
  } else {
    raw.tgamma_ui = tgamma_ui_;
    raw.tgamma_di = tgamma_di_;
  }
  if (valuation_) {
    raw.r = valuation_->r;
    raw.delta_h = valuation_->delta_h;
    raw.delta_d = valuation_->delta_d;
    raw.q = valuation_->q;
  }
  return raw;
}

MarketParams MarketParams::with_lambda(std::vector<double> lambda) const {
  RawParams r = raw();
  r.lambda = std::move(lambda);
  return make_params(kind_, r);
}

MarketParams MarketParams::with_valuation(ValuationParams valuation) const {
  RawParams r = raw();
  r.r = valuation.r;
  r.delta_h = std::move(valuation.delta_h);
  r.delta_d = std::move(valuation.delta_d);
  r.q = valuation.q;
  return make_params(kind_, r);
}

// ---------------------------------------------------------------------------
// States

std::string State::label() const {
  const std::string i = std::to_string(asset + 1);
  switch (type) {
    case Type::LowNonOwner: return "l,n";
    case Type::HighNonOwner: return "h,n";
    case Type::HighSeeker: return "h" + i + ",n";
    case Type::HighOwner: return "h" + i + ",o";
    case Type::LowOwner: return "l" + i + ",o";
  }
  return "?";
}

std::vector<State> state_layout(ModelKind kind, int K) {
  std::vector<State> out;
  out.reserve(static_cast<std::size_t>(state_count(kind, K)));
  out.push_back({State::Type::LowNonOwner, -1});
  if (kind == ModelKind::NonSegmented) {
    out.push_back({State::Type::HighNonOwner, -1});
  } else {
    for (int i = 0; i < K; ++i) out.push_back({State::Type::HighSeeker, i});
  }
  for (int i = 0; i < K; ++i) out.push_back({State::Type::HighOwner, i});
  for (int i = 0; i < K; ++i) out.push_back({State::Type::LowOwner, i});
  return out;
}

std::size_t StateValues::index_of(const State& s) const {
  const bool seg = kind == ModelKind::PartiallySegmented;
  const auto k = static_cast<std::size_t>(K);
  const auto a = static_cast<std::size_t>(s.asset);
  const std::size_t owners = seg ? 1 + k : 2;
  switch (s.type) {
    case State::Type::LowNonOwner: return 0;
    case State::Type::HighNonOwner:
      if (seg) break;
      return 1;
    case State::Type::HighSeeker:
      if (!seg || s.asset < 0 || s.asset >= K) break;
      return 1 + a;
    case State::Type::HighOwner:
      if (s.asset < 0 || s.asset >= K) break;
      return owners + a;
    case State::Type::LowOwner:
      if (s.asset < 0 || s.asset >= K) break;
      return owners + k + a;
  }
  throw Error(ErrorCode::KindMismatch, "state " + s.label() + " not in this model's state space");
}

// ---------------------------------------------------------------------------
// StateDistribution

StateDistribution::StateDistribution(ModelKind kind, std::vector<double> m, std::vector<double> reduced)
    : kind_(kind), m_(std::move(m)), reduced_(std::move(reduced)) {
  const int K = static_cast<int>(m_.size());
  if (static_cast<int>(reduced_.size()) != free_dim(kind_, K))
    throw Error(ErrorCode::InvalidArgument, "reduced coordinate count does not match model");
  for (double x : reduced_)
    if (!(x >= 0.0 && x <= 1.0))
      throw Error(ErrorCode::InfeasibleDistribution, "stored coordinate outside [0,1]");
  for (std::size_t i = 0; i < m_.size(); ++i)
    if (hi_o(i) < -kFeasibilityTol)
      throw Error(ErrorCode::InfeasibleDistribution, "mu(h" + std::to_string(i + 1) + ",o) < 0");
  if (l_n() < -kFeasibilityTol) throw Error(ErrorCode::InfeasibleDistribution, "mu(l,n) < 0");
}

StateDistribution StateDistribution::from_full(const StateValues& full) {
  const auto K = static_cast<std::size_t>(full.K);
  std::vector<double> m(K);
  std::vector<double> reduced;
  if (full.kind == ModelKind::NonSegmented) {
    reduced.push_back(full.at({State::Type::HighNonOwner, -1}));
  } else {
    for (std::size_t i = 0; i < K; ++i) reduced.push_back(full.at({State::Type::HighSeeker, static_cast<int>(i)}));
  }
  for (std::size_t i = 0; i < K; ++i) {
    const int a = static_cast<int>(i);
    const double lio = full.at({State::Type::LowOwner, a});
    m[i] = full.at({State::Type::HighOwner, a}) + lio;
    reduced.push_back(lio);
  }
  return {full.kind, std::move(m), std::move(reduced)};
}

double StateDistribution::h_n() const {
  if (kind_ != ModelKind::NonSegmented) throw Error(ErrorCode::KindMismatch, "mu(h,n) on segmented model");
  return reduced_[0];
}

double StateDistribution::hi_n(std::size_t i) const {
  if (kind_ != ModelKind::PartiallySegmented)
    throw Error(ErrorCode::KindMismatch, "mu(hi,n) on non-segmented model");
  return reduced_[i];
}

double StateDistribution::high_nonowners() const {
  if (kind_ == ModelKind::NonSegmented) return reduced_[0];
  return std::accumulate(reduced_.begin(), reduced_.begin() + static_cast<std::ptrdiff_t>(m_.size()), 0.0);
}

double StateDistribution::l_n() const {
  return 1.0 - std::accumulate(m_.begin(), m_.end(), 0.0) - high_nonowners();
}

StateValues full_distribution(const StateDistribution& dist) {
  const int K = dist.K();
  StateValues out{dist.kind(), K, std::vector<double>(static_cast<std::size_t>(state_count(dist.kind(), K)))};
  const double ln = dist.l_n();
  if (ln < -kFeasibilityTol) throw Error(ErrorCode::InfeasibleDistribution, "mu(l,n) < 0");
  out.at({State::Type::LowNonOwner, -1}) = ln;
  if (dist.kind() == ModelKind::NonSegmented) out.at({State::Type::HighNonOwner, -1}) = dist.h_n();
  for (int i = 0; i < K; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (dist.kind() == ModelKind::PartiallySegmented) out.at({State::Type::HighSeeker, i}) = dist.hi_n(u);
    const double hio = dist.hi_o(u);
    if (hio < -kFeasibilityTol)
      throw Error(ErrorCode::InfeasibleDistribution, "mu(h" + std::to_string(i + 1) + ",o) < 0");
    out.at({State::Type::HighOwner, i}) = hio;
    out.at({State::Type::LowOwner, i}) = dist.li_o(u);
  }
  return out;
}

}  // namespace otc
