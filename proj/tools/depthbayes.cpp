#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "depthbayes/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bayesian fine-tuning of a toy monocular depth network"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  bool init = false;
  for (const char* name : {"generate", "finetune", "evaluate", "report"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "experiment config file")->required();
    sub->add_option("--seed", seed, "restrict to one configured replicate seed");
    sub->add_flag("--init", init, "(re)create the warm-start base model");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : depthbayes::exit_config_error;
  }

  CLI::App* sub = app.get_subcommands().front();
  depthbayes::CommandOptions opt;
  if (sub->count("--seed") > 0) opt.seed = seed;
  opt.init = init;
  return depthbayes::run_command(sub->get_name(), config, opt, std::cerr);
}
