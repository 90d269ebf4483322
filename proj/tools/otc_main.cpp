#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "otc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Solver and simulator for search-based OTC market models"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  otc::CommandOptions opts;
  std::optional<int> samples;
  std::optional<int> record_every;

  using Command = std::string (*)(const otc::RunConfig&, const otc::CommandOptions&);
  const std::vector<std::tuple<const char*, const char*, Command>> commands = {
      {"steady", "steady-state distribution per asset", otc::cmd_steady},
      {"price", "reservation values and prices at the steady state", otc::cmd_price},
      {"sweep", "steady states and prices over lambda_grid", otc::cmd_sweep},
      {"simulate", "integrate the mean-field ODE", otc::cmd_simulate},
      {"stability", "Jacobian spectrum and Routh-Hurwitz test", otc::cmd_stability},
      {"mc", "finite-population Monte Carlo against the ODE", otc::cmd_mc},
  };
  Command chosen = nullptr;
  for (const auto& [name, help, fn] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "config file")->required();
    sub->add_option("--out", out_path, "CSV output path (stdout if omitted)");
    sub->add_option("--tol", opts.tol, "steady-state tolerance");
    sub->add_option("--seed", opts.seed, "first random seed");
    sub->add_option("--round", opts.round, "round numbers half-even to this many decimals")->check(CLI::Range(0, 15));
    if (std::string(name) == "mc") sub->add_option("--samples", samples, "sample intervals over [0, t_end]");
    if (std::string(name) == "simulate") sub->add_option("--record-every", record_every, "record every n-th step");
    sub->callback([&chosen, f = fn] { chosen = f; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    auto cfg = otc::load_config(config_path);
    if (samples) cfg.samples = samples;
    if (record_every) cfg.record_every = record_every;
    const std::string csv = chosen(cfg, opts);
    if (out_path.empty()) {
      std::cout << csv;
    } else {
      std::ofstream out(out_path);
      if (!out) {
        std::cerr << "cannot write '" << out_path << "'\n";
        return 2;
      }
      out << csv;
    }
  } catch (const otc::Error& e) {
    std::cerr << e.what() << '\n';
    return otc::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 4;
  }
  return 0;
}
