// Single-configuration-file driver: a deployment is described by one file
// and nothing else. Subcommands: run, provision, verify.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "epifi/config.hpp"
#include "epifi/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariantViolation = 1;
constexpr int kExitConfigError = 2;

int cmd_run(const std::string& config_path, std::optional<uint64_t> seed,
            std::optional<std::string> out_override) {
  epifi::ScenarioConfig cfg = epifi::load_config(config_path);
  if (seed) {
    cfg.seed = *seed;
    cfg.loss.seed = *seed;
  }
  const std::filesystem::path out =
      out_override ? std::filesystem::path(*out_override)
                   : cfg.deployment.sink.output;

  const auto report = epifi::run_scenario(cfg, out / "state");
  epifi::write_outputs(report, out);

  std::cout << "generated=" << report.generated_total
            << " sink=" << report.sink_unique
            << " duplicates_absorbed=" << report.duplicates_detected << "\n";
  std::cout << "exactly_once=" << (report.exactly_once ? "yes" : "no")
            << " conservation=" << (report.conservation_ok ? "ok" : "VIOLATED")
            << "\n";
  if (!report.conservation_ok)
    std::cout << "conservation error: " << report.conservation_error << "\n";
  std::cout << "reports written to " << out.string() << "\n";

  return report.exactly_once && report.conservation_ok
             ? kExitOk
             : kExitInvariantViolation;
}

int cmd_provision(const std::string& config_path,
                  std::optional<uint64_t> seed,
                  std::optional<std::string> out_override) {
  epifi::ScenarioConfig cfg = epifi::load_config(config_path);
  if (seed) {
    cfg.seed = *seed;
    cfg.loss.seed = *seed;
  }
  const std::filesystem::path out =
      out_override ? std::filesystem::path(*out_override)
                   : cfg.deployment.sink.output;

  const auto report =
      epifi::run_scenario(cfg, out / "state", epifi::RunMode::provision_only);

  bool all = true;
  for (const auto& [sensor, outcome] : report.provisioning) {
    if (outcome.recovered) {
      std::cout << "sensor=" << sensor << " recovered_round=" << outcome.round
                << " t=" << outcome.at
                << " loss_index=" << unsigned(outcome.loss_index) << "\n";
    } else {
      std::cout << "sensor=" << sensor << " not recovered\n";
      all = false;
    }
  }
  return all ? kExitOk : kExitInvariantViolation;
}

int cmd_verify(const std::string& out_dir) {
  const auto problems = epifi::verify_outputs(out_dir);
  if (problems.empty()) {
    std::cout << "verify: ok\n";
    return kExitOk;
  }
  for (const auto& p : problems) std::cout << "verify: " << p << "\n";
  return kExitInvariantViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EpiFi deployment simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_override;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "scenario config file")->required();
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--out", out_override, "output directory");
  };

  CLI::App* run = app.add_subcommand("run", "run a full scenario");
  add_common(run);
  CLI::App* provision =
      app.add_subcommand("provision", "run only the provisioning phase");
  add_common(provision);
  CLI::App* verify =
      app.add_subcommand("verify", "re-check invariants from report files");
  verify->add_option("out", out_dir, "report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, seed, out_override);
    if (provision->parsed())
      return cmd_provision(config_path, seed, out_override);
    if (verify->parsed()) return cmd_verify(out_dir);
  } catch (const epifi::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvariantViolation;
  }
  return kExitConfigError;
}
