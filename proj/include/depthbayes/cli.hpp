#ifndef DEPTHBAYES_CLI_HPP
#define DEPTHBAYES_CLI_HPP

#include <filesystem>
#include <ostream>
#include <string>

#include "depthbayes/config.hpp"
#include "depthbayes/data.hpp"
#include "depthbayes/experiment.hpp"
#include "depthbayes/report.hpp"

namespace depthbayes {

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config_error = 2,
  exit_missing_artifact = 3,
  exit_numerical_failure = 4,
};

// Runs one subcommand and maps failures to exit codes, writing the message to
// `err`.
inline int run_command(const std::string& command, const std::filesystem::path& config_path,
                       const CommandOptions& opt, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_config(config_path);
    if (command == "generate") cmd_generate(cfg);
    else if (command == "finetune") cmd_finetune(cfg, opt);
    else if (command == "evaluate") cmd_evaluate(cfg, opt);
    else if (command == "report") cmd_report(cfg);
    else throw ConfigError("unknown command '" + command + "'");
    return exit_ok;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const MissingArtifact& e) {
    err << "missing artifact: " << e.what() << "\n";
    return exit_missing_artifact;
  } catch (const TensorFormatError& e) {
    err << "corrupt artifact: " << e.what() << "\n";
    return exit_missing_artifact;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return exit_numerical_failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_failure;
  }
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_CLI_HPP
