#include <CLI11.hpp>

#include <iostream>

#include "relay/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"relay: peer-to-peer agent runtime for synthetic data generation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  relay::RunCommandOptions run_opts;
  std::string input, output, metrics_jsonl;

  auto* run = app.add_subcommand("run", "Run a workload over a JSONL dataset");
  run->add_option("--config", config_path, "Config file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--input", input, "JSONL file or directory of JSONL files")->required();
  run->add_option("--output", output, "Output JSONL path")->required();
  run->add_option("--metrics-jsonl", metrics_jsonl, "Periodic metrics samples");
  run->add_option("--metrics-interval", run_opts.metrics_interval_seconds, "Seconds between samples");
  run->add_option("--metrics-port", run_opts.metrics_port, "Serve GET /metrics on this port");
  run->add_flag("--allow-failures", run_opts.allow_failures, "Exit 0 even when tasks failed");
  run->add_option("overrides", overrides, "key=value config overrides");

  auto* bench = app.add_subcommand("bench", "Compare row-level and batch-level scheduling");
  bench->add_option("--config", config_path, "Config file (JSON)")->required()->check(CLI::ExistingFile);
  bench->add_option("overrides", overrides, "key=value config overrides");

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("--config", config_path, "Config file (JSON)")->required()->check(CLI::ExistingFile);
  validate->add_option("overrides", overrides, "key=value config overrides");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto config = relay::load_config(config_path, overrides);
    if (*validate) {
      relay::validate_config(config);
      std::cout << "ok: " << config.workload << "\n";
      return 0;
    }
    if (*bench) {
      if (!config.bench) throw relay::Error(relay::Errc::config_error, "bench: section required");
      std::cout << relay::bench_command(*config.bench).to_json().dump(2) << "\n";
      return 0;
    }
    run_opts.input = input;
    run_opts.output = output;
    if (!metrics_jsonl.empty()) run_opts.metrics_jsonl = metrics_jsonl;
    const auto summary = relay::run_command(config, run_opts);
    std::cout << summary.to_json().dump(2) << "\n";
    return summary.exit_code;
  } catch (const relay::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
