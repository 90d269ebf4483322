#include <sstream>

#include "doctest.h"
#include "otc/cli.hpp"
#include "otc/error.hpp"

using namespace otc;

namespace {

const char* kBaseline = R"(# baseline, non-segmented
model = nonsegmented
K = 2
lambda = [1250, 1250]   # equal meeting rates
gamma_u = 5
gamma_d = 0.5
gamma_ui = [5, 5]
gamma_di = [0.5, 0.5]
m = [0.4, 0.4]
r = 0.05
delta_h = [1, 1]
delta_d = [2.5, 2.5]
q = 0.5
)";

std::vector<std::vector<std::string>> rows(const std::string& csv) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    out.push_back(cells);
  }
  return out;
}

ErrorCode parse_error(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config round trip") {
    auto cfg = parse_config(kBaseline);
    cfg.lambda_grid = std::vector<double>{0.1, 1e9, 1.0 / 3.0};
    cfg.t_end = 0.1 + 0.2;
    cfg.N = 100000;
    cfg.seeds = 30;
    cfg.start = "steady";
    CHECK(parse_config(emit_config(cfg)) == cfg);
    CHECK(cfg.params.lambda->at(1) == 1250);
  }

  TEST_CASE("config errors") {
    CHECK(parse_error("K = 2\nfoo = 1\n") == ErrorCode::ConfigError);
    CHECK(parse_error("K = 2\nK = 3\n") == ErrorCode::ConfigError);
    CHECK(parse_error("lambda = [1, x]\n") == ErrorCode::ConfigError);
    CHECK(parse_error("lambda = 1, 2\n") == ErrorCode::ConfigError);
    CHECK(parse_error("model = hybrid\n") == ErrorCode::ConfigError);
    CHECK(parse_error("just text\n") == ErrorCode::ConfigError);
  }

  TEST_CASE("round half even") {
    CHECK(format_number(2.5, 0) == "2");
    CHECK(format_number(3.5, 0) == "4");
    CHECK(format_number(-0.00001, 4) == "0.0000");
    CHECK(format_number(0.1) == "0.10000000000000001");
  }

  TEST_CASE("steady table") {
    const auto r = rows(cmd_steady(parse_config(kBaseline), {std::nullopt, 4, 1}));
    REQUIRE(r.size() == 4);
    CHECK(r[0][2] == "mu_hi_n");
    CHECK(r[1] == std::vector<std::string>{"nonsegmented", "1", "", "0.1118", "0.0014", "0.3986", "0.0882"});
    CHECK(r[3][4] == "0.0028");
    CHECK(r[3][5] == "0.7972");
  }

  TEST_CASE("price columns") {
    auto cfg = parse_config(kBaseline);
    auto r = rows(cmd_price(cfg, {std::nullopt, 4, 1}));
    CHECK(r[1][4] == "18.5451");
    CHECK(r[1][4] == r[2][4]);
    cfg.params.q = 0.0;
    r = rows(cmd_price(cfg));
    CHECK(r[1][4] == r[1][2]);
  }

  TEST_CASE("sweep") {
    auto cfg = parse_config(kBaseline);
    cfg.lambda_grid = std::vector<double>{1250};
    const auto one = rows(cmd_sweep(cfg));
    const auto priced = rows(cmd_price(cfg));
    CHECK(one[1][7] == priced[1][4]);

    cfg.lambda_grid = std::vector<double>{1, 10, 100, 1e3, 1e4, 1e5, 1e9};
    const auto r = rows(cmd_sweep(cfg));
    double last = 0.0;
    for (std::size_t k = 1; k < r.size(); ++k) {
      CHECK(r[k].at(8).empty());
      last = std::stod(r[k][7]);
    }
    CHECK(std::abs(last - 20.0) < 1e-2);
  }

  TEST_CASE("sweep records failures and continues") {
    auto cfg = parse_config(kBaseline);
    cfg.lambda_grid = std::vector<double>{-1, 100};
    const auto r = rows(cmd_sweep(cfg));
    REQUIRE(r.size() == 4);
    CHECK(r[1][8].find("NonPositiveRate") != std::string::npos);
    CHECK(r[2][8].empty());
  }

  TEST_CASE("simulate from the steady state") {
    auto cfg = parse_config(kBaseline);
    cfg.start = "steady";
    cfg.t_end = 0.5;
    cfg.dt = 1e-3;
    cfg.record_every = 100;
    const auto r = rows(cmd_simulate(cfg, {std::nullopt, 10, 1}));
    REQUIRE(r.size() == 7);
    for (std::size_t k = 2; k < r.size(); ++k)
      for (std::size_t c = 1; c < r[k].size(); ++c) CHECK(r[k][c] == r[1][c]);
  }

  TEST_CASE("stability verdicts") {
    auto cfg = parse_config(kBaseline);
    cfg.model = "both";
    cfg.params.tgamma_ui = cfg.params.gamma_ui;
    cfg.params.tgamma_di = cfg.params.gamma_di;
    const auto csv = cmd_stability(cfg);
    CHECK(csv.find("segmented,rh_verdict,,AsymptoticallyStable") != std::string::npos);
    CHECK(csv.find("nonsegmented,verdict,,AsymptoticallyStable") != std::string::npos);
  }

  TEST_CASE("mc is reproducible") {
    auto cfg = parse_config(kBaseline);
    cfg.N = 2000;
    cfg.seeds = 2;
    cfg.samples = 3;
    cfg.t_end = 0.3;
    const CommandOptions opts{std::nullopt, std::nullopt, 17};
    CHECK(cmd_mc(cfg, opts) == cmd_mc(cfg, opts));
    const auto r = rows(cmd_mc(cfg, opts));
    CHECK(r.size() == 1 + 2 * 4);
    CHECK(r[1][0] == "17");
    CHECK(r[5][0] == "18");
  }

  TEST_CASE("exit codes") {
    CHECK(exit_code_for(ErrorCode::ConfigError) == 2);
    CHECK(exit_code_for(ErrorCode::MassOverflow) == 2);
    CHECK(exit_code_for(ErrorCode::NoConvergence) == 3);
    CHECK(exit_code_for(ErrorCode::SingularMatrix) == 4);
  }

  TEST_CASE("missing keys") {
    auto cfg = parse_config(kBaseline);
    CHECK_THROWS_AS(cmd_sweep(cfg), Error);
    CHECK_THROWS_AS(cmd_mc(cfg), Error);
    cfg.params.r.reset();
    try {
      (void)cmd_price(cfg);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(exit_code_for(e.code()) == 2);
    }
  }
}
