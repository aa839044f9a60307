#pragma once

// Subcommand implementations behind the CLI. Each command writes its
// artifacts under the config's output directory, fills a RunReport and
// returns it; report.ok decides the process exit code. All randomness flows
// from the config seed.

#include <glevy/config.hpp>
#include <glevy/report.hpp>

namespace glevy {

RunReport cmd_simulate(const ExperimentConfig& cfg);
RunReport cmd_expect(const ExperimentConfig& cfg);
RunReport cmd_certify(const ExperimentConfig& cfg);
RunReport cmd_example51(const ExperimentConfig& cfg);
RunReport cmd_bdg(const ExperimentConfig& cfg);

RunReport run_command(const std::string& name, const ExperimentConfig& cfg);

}  // namespace glevy
