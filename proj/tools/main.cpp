#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mfgrid/commands.hpp"
#include "mfgrid/run_config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Grid models with multiplicative-filter kernels: fitting and grid tangent kernel analysis"};
  app.require_subcommand(1);
  app.footer(std::string(mfgrid::config_reference()));

  mfgrid::CommandOptions options;
  std::string config, config_b, out, fault;
  std::uint64_t seed = 0;

  const auto add = [&](const std::string& name, const std::string& about) {
    CLI::App* sub = app.add_subcommand(name, about);
    sub->add_option("--config", config, "JSON configuration file (defaults apply when omitted)");
    sub->add_option("--out", out, "output directory (overrides output.directory)");
    sub->add_option("--seed", seed, "RNG seed (overrides train.seed)");
    return sub;
  };
  add("fit-image", "fit a PGM/PPM image and report PSNR");
  add("fit-sdf", "fit an analytic signed distance field and report IoU/NAE");
  add("gtk", "write the grid tangent kernel of analysis.points (or analysis.line)");
  add("spectrum", "Fourier spectrum of the grid tangent kernel along a line");
  add("bound-map", "difference of generalization terms of two configurations over a target grid")
      ->add_option("--config-b", config_b, "second configuration (B)");
  add("theory-check", "run the feature-only training invariants")
      ->add_option("--inject-fault", fault, "")
      ->group("")
      ->check(CLI::IsMember({"sign-flip"}));

  CLI11_PARSE(app, argc, argv);

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--config")) options.config = config;
  if (sub->count("--out")) options.out = out;
  if (sub->count("--seed")) options.seed = seed;
  if (!config_b.empty()) options.config_b = config_b;
  options.inject_sign_flip = fault == "sign-flip";
  return mfgrid::run_command(sub->get_name(), options, std::cout, std::cerr);
}
