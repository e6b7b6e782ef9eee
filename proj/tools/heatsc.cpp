// heatsc: semi-classical heat kernel experiments.
//
//   heatsc expand|partition|bound|oracle [--config PATH] [--out DIR]
//          [--set KEY=VALUE]... [--selfcheck]
//
// Exit status: 0 success, 1 a checked property failed, 2 invalid input,
// 3 numerical non-convergence.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "heatsc/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"semi-classical heat kernel parametrix experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  bool selfcheck = false;

  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--set", overrides, "override a config field, KEY=VALUE with a dotted KEY")->take_all();
  app.add_flag("--selfcheck", selfcheck, "oracle: repeat with a doubled cutoff and compare");
  app.fallthrough();

  auto* expand = app.add_subcommand("expand", "parametrix error against the oracle over the hbar grid");
  auto* partition = app.add_subcommand("partition", "quantum and classical partition functions, heat coefficients");
  auto* bound = app.add_subcommand("bound", "trace upper bound and volume-comparison check");
  auto* oracle = app.add_subcommand("oracle", "spectrum dump");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto cfg = heatsc::load_config(config_path, overrides);
    heatsc::CommandOptions opt;
    opt.out_dir = out_dir;
    opt.selfcheck = selfcheck;
    opt.threads = heatsc::worker_count();

    heatsc::CommandResult res;
    if (expand->parsed()) {
      res = heatsc::cmd_expand(cfg, opt);
      const auto& f = res.report.at("fit");
      std::printf("expand: max error %.3e, slope %.3f (floor %.0f), %s\n", res.report.at("max_error").get<double>(),
                  f.at("slope").get<double>(), f.at("theoretical").get<double>(), f.at("pass").get<bool>() ? "pass" : "FAIL");
    } else if (partition->parsed()) {
      res = heatsc::cmd_partition(cfg, opt);
      const auto& rows = res.report.at("rows");
      std::printf("partition: %zu rows, ratio at smallest hbar %.12g\n", rows.size(),
                  rows.back().at("ratio").get<double>());
    } else if (bound->parsed()) {
      res = heatsc::cmd_bound(cfg, opt);
      std::printf("bound: all_hold=%s, empirical constant %.6g, c3 %.6g\n",
                  res.report.at("all_hold").get<bool>() ? "true" : "false",
                  res.report.at("empirical_constant").get<double>(),
                  res.report.at("constants").at("c3").get<double>());
    } else if (oracle->parsed()) {
      res = heatsc::cmd_oracle(cfg, opt);
      std::printf("oracle: %s mode, trace %.12g\n", res.report.at("mode").get<std::string>().c_str(),
                  res.report.at("trace").get<double>());
    }
    return res.exit_code;
  } catch (const heatsc::ValidationError& e) {
    std::fprintf(stderr, "heatsc: invalid input: %s\n", e.what());
    return 2;
  } catch (const heatsc::NumericalError& e) {
    std::fprintf(stderr, "heatsc: numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "heatsc: %s\n", e.what());
    return 2;
  }
}
