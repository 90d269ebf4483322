#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "otc/error.hpp"
#include "otc/model.hpp"

namespace otc {

/// One model instance plus command options, as read from a config file.
/// Absent keys stay empty so emit -> parse reproduces the input exactly.
struct RunConfig {
  std::string model = "nonsegmented";  // nonsegmented | segmented | both
  RawParams params;
  std::optional<double> t_end;
  std::optional<double> dt;
  std::optional<long long> N;
  std::optional<int> seeds;
  std::optional<std::vector<double>> lambda_grid;
  std::optional<std::string> start;  // low_owners | steady
  std::optional<int> samples;
  std::optional<int> record_every;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// key = value lines; vectors as [a, b, ...]; '#' starts a comment.
/// Throws ConfigError on unknown or repeated keys and malformed values.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
std::string emit_config(const RunConfig& cfg);

/// Model classes named by `cfg.model`, in output order.
std::vector<ModelKind> config_kinds(const RunConfig& cfg);

/// Validated parameters for one class. Under model = both the fields of
/// the other class are dropped first.
MarketParams config_params(const RunConfig& cfg, ModelKind kind);

struct CommandOptions {
  std::optional<double> tol;
  std::optional<int> round;  // decimals, round-half-even
  std::uint64_t seed = 1;
};

std::string cmd_steady(const RunConfig& cfg, const CommandOptions& opts = {});
std::string cmd_price(const RunConfig& cfg, const CommandOptions& opts = {});
std::string cmd_sweep(const RunConfig& cfg, const CommandOptions& opts = {});
std::string cmd_simulate(const RunConfig& cfg, const CommandOptions& opts = {});
std::string cmd_stability(const RunConfig& cfg, const CommandOptions& opts = {});
std::string cmd_mc(const RunConfig& cfg, const CommandOptions& opts = {});

/// 2 config, 3 solver, 4 numerical.
int exit_code_for(ErrorCode code);

/// 17 significant digits, or `decimals` fixed places after round-half-even.
std::string format_number(double x, std::optional<int> decimals = std::nullopt);

}  // namespace otc
