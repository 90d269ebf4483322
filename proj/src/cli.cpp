#include "otc/cli.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "otc/dynamics.hpp"
#include "otc/equilibrium.hpp"
#include "otc/mcsim.hpp"
#include "otc/stability.hpp"
#include "otc/valuation.hpp"

namespace otc {

namespace {

constexpr const char* kSchemaVersion = "v1";

[[noreturn]] void config_error(int line, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, "line " + std::to_string(line) + ": " + msg);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view s, int line) {
  s = trim(s);
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    config_error(line, "not a number: '" + std::string(s) + "'");
  return x;
}

long long parse_int(std::string_view s, int line) {
  s = trim(s);
  long long x = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    config_error(line, "not an integer: '" + std::string(s) + "'");
  return x;
}

std::vector<double> parse_vector(std::string_view s, int line) {
  s = trim(s);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') config_error(line, "expected [a, b, ...]");
  s = trim(s.substr(1, s.size() - 2));
  std::vector<double> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto item = s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    out.push_back(parse_double(item, line));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string emit_vector(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_number(v[i]);
  }
  return s + "]";
}

// Round-half-even at `d` decimals; the current rounding mode is to-nearest-even.
double round_half_even(double x, int d) {
  const double scale = std::pow(10.0, d);
  return std::nearbyint(x * scale) / scale;
}

class Csv {
 public:
  Csv(std::string header, std::optional<int> round) : round_(round) { out_ << header << '\n'; }

  Csv& cell(double x) {
    sep();
    out_ << format_number(x, round_);
    return *this;
  }
  Csv& cell(const std::string& s) {
    sep();
    if (s.find_first_of(",\"\n") != std::string::npos) {
      out_ << '"';
      for (char c : s) {
        if (c == '"') out_ << '"';
        out_ << c;
      }
      out_ << '"';
    } else {
      out_ << s;
    }
    return *this;
  }
  Csv& cell(long long x) {
    sep();
    out_ << x;
    return *this;
  }
  Csv& blank() {
    sep();
    return *this;
  }
  void end() {
    out_ << '\n';
    first_ = true;
  }
  std::string str() const { return out_.str(); }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ostringstream out_;
  std::optional<int> round_;
  bool first_ = true;
};

std::string header_line(const std::string& command, const RunConfig& cfg, const std::string& extra = {}) {
  std::string h = "# otc-" + command + " " + kSchemaVersion + " model=" + cfg.model;
  if (!extra.empty()) h += " " + extra;
  return h;
}

SteadyOptions steady_options(const CommandOptions& opts) {
  SteadyOptions s;
  if (opts.tol) s.tol = *opts.tol;
  return s;
}

StateDistribution start_distribution(const RunConfig& cfg, const MarketParams& params, const CommandOptions& opts) {
  const std::string start = cfg.start.value_or("low_owners");
  if (start == "low_owners") return all_low_owners(params);
  if (start == "steady") return solve_steady(params, steady_options(opts)).dist;
  throw Error(ErrorCode::ConfigError, "start must be low_owners or steady");
}

std::string column_name(const State& s) {
  std::string label = s.label();
  for (char& c : label)
    if (c == ',') c = '_';
  return "mu_" + label;
}

void require(bool ok, const std::string& key) {
  if (!ok) throw Error(ErrorCode::ConfigError, "missing config key '" + key + "'");
}

}  // namespace

std::string format_number(double x, std::optional<int> decimals) {
  char buf[64];
  if (decimals) {
    double r = round_half_even(x, *decimals);
    if (r == 0.0) r = 0.0;  // drop negative zero
    std::snprintf(buf, sizeof buf, "%.*f", *decimals, r);
  } else {
    std::snprintf(buf, sizeof buf, "%.17g", x);
  }
  return buf;
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) config_error(line_no, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) config_error(line_no, "repeated key '" + key + "'");
    auto& p = cfg.params;

    if (key == "model") {
      cfg.model = std::string(value);
      if (cfg.model != "nonsegmented" && cfg.model != "segmented" && cfg.model != "both")
        config_error(line_no, "model must be nonsegmented, segmented or both");
    } else if (key == "K") {
      p.K = static_cast<int>(parse_int(value, line_no));
    } else if (key == "lambda") {
      p.lambda = parse_vector(value, line_no);
    } else if (key == "gamma_u") {
      p.gamma_u = parse_double(value, line_no);
    } else if (key == "gamma_d") {
      p.gamma_d = parse_double(value, line_no);
    } else if (key == "gamma_ui") {
      p.gamma_ui = parse_vector(value, line_no);
    } else if (key == "gamma_di") {
      p.gamma_di = parse_vector(value, line_no);
    } else if (key == "tgamma_ui") {
      p.tgamma_ui = parse_vector(value, line_no);
    } else if (key == "tgamma_di") {
      p.tgamma_di = parse_vector(value, line_no);
    } else if (key == "m") {
      p.m = parse_vector(value, line_no);
    } else if (key == "r") {
      p.r = parse_double(value, line_no);
    } else if (key == "delta_h") {
      p.delta_h = parse_vector(value, line_no);
    } else if (key == "delta_d") {
      p.delta_d = parse_vector(value, line_no);
    } else if (key == "q") {
      p.q = parse_double(value, line_no);
    } else if (key == "t_end") {
      cfg.t_end = parse_double(value, line_no);
    } else if (key == "dt") {
      cfg.dt = parse_double(value, line_no);
    } else if (key == "N") {
      cfg.N = parse_int(value, line_no);
    } else if (key == "seeds") {
      cfg.seeds = static_cast<int>(parse_int(value, line_no));
    } else if (key == "lambda_grid") {
      cfg.lambda_grid = parse_vector(value, line_no);
    } else if (key == "start") {
      cfg.start = std::string(value);
    } else if (key == "samples") {
      cfg.samples = static_cast<int>(parse_int(value, line_no));
    } else if (key == "record_every") {
      cfg.record_every = static_cast<int>(parse_int(value, line_no));
    } else {
      config_error(line_no, "unknown key '" + key + "'");
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const RunConfig& cfg) {
  std::ostringstream out;
  const auto& p = cfg.params;
  out << "model = " << cfg.model << '\n';
  auto scalar = [&](const char* key, const std::optional<double>& v) {
    if (v) out << key << " = " << format_number(*v) << '\n';
  };
  auto vec = [&](const char* key, const std::optional<std::vector<double>>& v) {
    if (v) out << key << " = " << emit_vector(*v) << '\n';
  };
  if (p.K) out << "K = " << *p.K << '\n';
  vec("lambda", p.lambda);
  scalar("gamma_u", p.gamma_u);
  scalar("gamma_d", p.gamma_d);
  vec("gamma_ui", p.gamma_ui);
  vec("gamma_di", p.gamma_di);
  vec("tgamma_ui", p.tgamma_ui);
  vec("tgamma_di", p.tgamma_di);
  vec("m", p.m);
  scalar("r", p.r);
  vec("delta_h", p.delta_h);
  vec("delta_d", p.delta_d);
  scalar("q", p.q);
  scalar("t_end", cfg.t_end);
  scalar("dt", cfg.dt);
  if (cfg.N) out << "N = " << *cfg.N << '\n';
  if (cfg.seeds) out << "seeds = " << *cfg.seeds << '\n';
  vec("lambda_grid", cfg.lambda_grid);
  if (cfg.start) out << "start = " << *cfg.start << '\n';
  if (cfg.samples) out << "samples = " << *cfg.samples << '\n';
  if (cfg.record_every) out << "record_every = " << *cfg.record_every << '\n';
  return out.str();
}

std::vector<ModelKind> config_kinds(const RunConfig& cfg) {
  if (cfg.model == "nonsegmented") return {ModelKind::NonSegmented};
  if (cfg.model == "segmented") return {ModelKind::PartiallySegmented};
  if (cfg.model == "both") return {ModelKind::NonSegmented, ModelKind::PartiallySegmented};
  throw Error(ErrorCode::ConfigError, "unknown model '" + cfg.model + "'");
}

MarketParams config_params(const RunConfig& cfg, ModelKind kind) {
  RawParams raw = cfg.params;
  if (cfg.model == "both") {
    if (kind == ModelKind::NonSegmented) {
      raw.tgamma_ui.reset();
      raw.tgamma_di.reset();
    } else {
      raw.gamma_u.reset();
      raw.gamma_d.reset();
    }
  }
  return make_params(kind, raw);
}

std::string cmd_steady(const RunConfig& cfg, const CommandOptions& opts) {
  std::string body;
  std::string meta;
  std::vector<std::pair<ModelKind, SteadyState>> results;
  for (ModelKind kind : config_kinds(cfg)) {
    const auto params = config_params(cfg, kind);
    auto ss = solve_steady(params, steady_options(opts));
    meta += " residual_" + to_string(kind) + "=" + format_number(ss.residual_inf_norm) + " method_" +
            to_string(kind) + "=" + to_string(ss.method);
    results.emplace_back(kind, std::move(ss));
  }
  Csv csv(header_line("steady", cfg, meta.substr(meta.empty() ? 0 : 1)), opts.round);
  csv.cell(std::string("model")).cell(std::string("asset")).cell(std::string("mu_hi_n")).cell(std::string("mu_h_n"));
  csv.cell(std::string("mu_li_o")).cell(std::string("mu_hi_o")).cell(std::string("mu_l_n"));
  csv.end();
  for (const auto& [kind, ss] : results) {
    const auto& d = ss.dist;
    double s_hin = 0.0, s_lio = 0.0, s_hio = 0.0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(d.K()); ++i) {
      csv.cell(to_string(kind)).cell(static_cast<long long>(i + 1));
      if (kind == ModelKind::PartiallySegmented) {
        csv.cell(d.hi_n(i)).blank();
        s_hin += d.hi_n(i);
      } else {
        csv.blank().cell(d.h_n());
      }
      csv.cell(d.li_o(i)).cell(d.hi_o(i)).cell(d.l_n());
      csv.end();
      s_lio += d.li_o(i);
      s_hio += d.hi_o(i);
    }
    csv.cell(to_string(kind)).cell(std::string("sum"));
    if (kind == ModelKind::PartiallySegmented)
      csv.cell(s_hin);
    else
      csv.blank();
    csv.blank().cell(s_lio).cell(s_hio).blank();
    csv.end();
  }
  return csv.str();
}

std::string cmd_price(const RunConfig& cfg, const CommandOptions& opts) {
  Csv csv(header_line("price", cfg), opts.round);
  for (const char* h : {"model", "asset", "delta_l", "delta_h", "price", "v_l_n", "v_h_n", "v_hi_n", "v_hi_o",
                        "v_li_o", "delta0", "delta_e", "inverted_spread", "condition_estimate"})
    csv.cell(std::string(h));
  csv.end();
  using T = State::Type;
  for (ModelKind kind : config_kinds(cfg)) {
    const auto params = config_params(cfg, kind);
    const auto ss = solve_steady(params, steady_options(opts));
    const auto rep = price(params, ss.dist);
    for (int i = 0; i < params.K(); ++i) {
      const auto u = static_cast<std::size_t>(i);
      csv.cell(to_string(kind)).cell(static_cast<long long>(i + 1));
      csv.cell(rep.deltas.delta_l[u]).cell(rep.deltas.delta_h[u]).cell(rep.prices[u]);
      csv.cell(rep.values.at({T::LowNonOwner, -1}));
      if (kind == ModelKind::NonSegmented)
        csv.cell(rep.values.at({T::HighNonOwner, -1})).blank();
      else
        csv.blank().cell(rep.values.at({T::HighSeeker, i}));
      csv.cell(rep.values.at({T::HighOwner, i})).cell(rep.values.at({T::LowOwner, i}));
      csv.cell(rep.deltas.delta0).cell(rep.deltas.delta_e[kind == ModelKind::NonSegmented ? 0 : u]);
      const bool inv = std::find(rep.inverted_spread.begin(), rep.inverted_spread.end(), i) != rep.inverted_spread.end();
      csv.cell(static_cast<long long>(inv ? 1 : 0)).cell(rep.matrix_condition_estimate);
      csv.end();
    }
  }
  return csv.str();
}

std::string cmd_sweep(const RunConfig& cfg, const CommandOptions& opts) {
  require(cfg.lambda_grid.has_value(), "lambda_grid");
  Csv csv(header_line("sweep", cfg), opts.round);
  for (const char* h : {"lambda", "model", "asset", "mu_buyer", "mu_li_o", "mu_hi_o", "mu_l_n", "price", "error"})
    csv.cell(std::string(h));
  csv.end();
  for (double g : *cfg.lambda_grid) {
    for (ModelKind kind : config_kinds(cfg)) {
      const auto base = config_params(cfg, kind);
      const int K = base.K();
      try {
        const auto params = base.with_lambda(std::vector<double>(static_cast<std::size_t>(K), g));
        const auto ss = solve_steady(params, steady_options(opts));
        std::vector<double> prices;
        if (params.has_valuation()) prices = price(params, ss.dist).prices;
        for (int i = 0; i < K; ++i) {
          const auto u = static_cast<std::size_t>(i);
          const auto& d = ss.dist;
          csv.cell(g).cell(to_string(kind)).cell(static_cast<long long>(i + 1));
          csv.cell(kind == ModelKind::NonSegmented ? d.h_n() : d.hi_n(u));
          csv.cell(d.li_o(u)).cell(d.hi_o(u)).cell(d.l_n());
          if (prices.empty())
            csv.blank();
          else
            csv.cell(prices[u]);
          csv.blank();
          csv.end();
        }
      } catch (const Error& e) {
        csv.cell(g).cell(to_string(kind)).blank().blank().blank().blank().blank().blank();
        csv.cell(std::string(e.what()));
        csv.end();
      }
    }
  }
  return csv.str();
}

std::string cmd_simulate(const RunConfig& cfg, const CommandOptions& opts) {
  const auto kinds = config_kinds(cfg);
  if (kinds.size() != 1) throw Error(ErrorCode::ConfigError, "simulate needs a single model class");
  const auto params = config_params(cfg, kinds[0]);
  IntegrateOptions io;
  if (cfg.t_end) io.t_end = *cfg.t_end;
  if (cfg.dt) io.dt = *cfg.dt;
  if (cfg.record_every) io.record_every = *cfg.record_every;
  const auto traj = integrate(params, start_distribution(cfg, params, opts), io);

  Csv csv(header_line("simulate", cfg, "clamp_events=" + std::to_string(traj.clamp_events)), opts.round);
  csv.cell(std::string("t"));
  for (const auto& s : state_layout(params.kind(), params.K())) csv.cell(column_name(s));
  csv.end();
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    csv.cell(traj.times[k]);
    for (double x : full_distribution(traj.states[k]).values) csv.cell(x);
    csv.end();
  }
  return csv.str();
}

std::string cmd_stability(const RunConfig& cfg, const CommandOptions& opts) {
  Csv csv(header_line("stability", cfg), opts.round);
  for (const char* h : {"model", "quantity", "index", "value"}) csv.cell(std::string(h));
  csv.end();
  for (ModelKind kind : config_kinds(cfg)) {
    const auto params = config_params(cfg, kind);
    const auto ss = solve_steady(params, steady_options(opts));
    const auto rep = stability_report(params, ss.dist);
    const std::string k = to_string(kind);
    auto row = [&](const char* q, long long idx, double v) {
      csv.cell(k).cell(std::string(q)).cell(idx).cell(v);
      csv.end();
    };
    for (std::size_t i = 0; i < rep.char_poly.size(); ++i) row("char_poly", static_cast<long long>(i), rep.char_poly[i]);
    for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i) {
      row("eig_real", static_cast<long long>(i), rep.eigenvalues[i].real());
      row("eig_imag", static_cast<long long>(i), rep.eigenvalues[i].imag());
    }
    if (rep.rh_coeffs) {
      for (std::size_t i = 0; i < 4; ++i) row("rh_coeff", static_cast<long long>(i + 1), (*rep.rh_coeffs)[i]);
      row("rh_margin", 0, *rep.rh_margin);
      csv.cell(k).cell(std::string("rh_verdict")).blank().cell(std::string(to_string(*rep.rh_verdict)));
      csv.end();
    }
    csv.cell(k).cell(std::string("verdict")).blank().cell(std::string(to_string(rep.verdict)));
    csv.end();
  }
  return csv.str();
}

std::string cmd_mc(const RunConfig& cfg, const CommandOptions& opts) {
  const auto kinds = config_kinds(cfg);
  if (kinds.size() != 1) throw Error(ErrorCode::ConfigError, "mc needs a single model class");
  require(cfg.N.has_value(), "N");
  const auto params = config_params(cfg, kinds[0]);
  const double t_end = cfg.t_end.value_or(1.0);
  const int samples = cfg.samples.value_or(10);
  const int n_seeds = cfg.seeds.value_or(1);
  if (samples < 1 || n_seeds < 1 || !(t_end > 0.0))
    throw Error(ErrorCode::ConfigError, "samples, seeds and t_end must be positive");

  const auto start = start_distribution(cfg, params, opts);
  std::vector<double> times;
  for (int k = 0; k <= samples; ++k) times.push_back(t_end * k / samples);
  times.back() = t_end;

  IntegrateOptions io;
  io.t_end = t_end;
  io.dt = cfg.dt.value_or(1e-4);
  const auto fine = integrate(params, start, io);
  Trajectory ode{{}, {}, params, fine.clamp_events};
  for (double t : times) {
    ode.times.push_back(t);
    ode.states.emplace_back(params, interpolate(fine, t));
  }

  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < n_seeds; ++s) seeds.push_back(opts.seed + static_cast<std::uint64_t>(s));
  const auto pop = population_from(params, *cfg.N, start);
  const auto runs = simulate_seeds(params, pop, t_end, seeds, times);

  Csv csv(header_line("mc", cfg, "N=" + std::to_string(*cfg.N)), opts.round);
  csv.cell(std::string("seed")).cell(std::string("t"));
  for (const auto& s : state_layout(params.kind(), params.K())) csv.cell(column_name(s));
  csv.cell(std::string("sup_gap"));
  csv.end();
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto err = lln_error(runs[r], ode);
    for (std::size_t k = 0; k < times.size(); ++k) {
      csv.cell(static_cast<long long>(seeds[r])).cell(runs[r].times[k]);
      for (double x : runs[r].fractions[k]) csv.cell(x);
      csv.cell(err.gaps[k]);
      csv.end();
    }
  }
  return csv.str();
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::NonPositiveRate:
    case ErrorCode::MassOverflow:
    case ErrorCode::WrongFamilyField:
    case ErrorCode::MissingField:
    case ErrorCode::InvalidArgument:
    case ErrorCode::KindMismatch:
    case ErrorCode::InconsistentInitialCounts:
      return 2;
    case ErrorCode::BracketFailure:
    case ErrorCode::NoConvergence:
    case ErrorCode::InfeasibleSolution:
      return 3;
    case ErrorCode::InfeasibleDistribution:
    case ErrorCode::InfeasibleDuringIntegration:
    case ErrorCode::SingularMatrix:
    case ErrorCode::TimeGridMismatch:
      return 4;
  }
  return 4;
}

}  // namespace otc
