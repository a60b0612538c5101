// Command-line front end for the experiment pipeline:
//   gen-data -> train -> attack -> eval, plus sweep and verify.
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ntiqa/experiment.hpp"

namespace {

ntiqa::Config load_config(const std::string& path,
                          const std::vector<std::string>& overrides) {
  ntiqa::Config cfg = ntiqa::Config::from_file(path);
  for (const std::string& kv : overrides) cfg.apply_override(kv);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"norm-regularized training and attack harness for toy "
               "no-reference image-quality scorers"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, checkpoint, results_csv;
  std::string attack_name, variant_name = "baseline", axis_name = "lambda";
  std::string surrogate;
  std::vector<std::string> overrides;
  std::optional<double> lambda_override;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value config file")->required();
    cmd->add_option("--out", out_dir, "output directory")->required();
    cmd->add_option("--set", overrides, "config override key=value (repeatable)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
  add_common(gen);

  CLI::App* train = app.add_subcommand("train", "train a scorer (baseline or nt)");
  add_common(train);
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--variant", variant_name, "baseline|nt")->required();
  double lambda_flag = 0.0;
  CLI::Option* lambda_opt =
      train->add_option("--lambda", lambda_flag, "explicit regularization weight");

  CLI::App* attack = app.add_subcommand("attack", "run an attack over the test split");
  add_common(attack);
  attack->add_option("--data", data_dir, "dataset directory")->required();
  attack->add_option("--checkpoint", checkpoint, "target model checkpoint")->required();
  attack->add_option("--attack", attack_name, "fgsm|ifgsm|uap|perceptual")->required();
  attack->add_option("--surrogate", surrogate, "surrogate checkpoint (uap)");

  CLI::App* eval = app.add_subcommand("eval", "compute metric reports from attack results");
  add_common(eval);
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--results", results_csv, "attack results CSV")->required();
  eval->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "hyperparameter / intensity sweeps");
  add_common(sweep);
  sweep->add_option("--data", data_dir, "dataset directory")->required();
  sweep->add_option("--axis", axis_name, "lambda|h|intensity")->required();

  CLI::App* verify = app.add_subcommand("verify", "gradient-norm diagnostics per test image");
  add_common(verify);
  verify->add_option("--data", data_dir, "dataset directory")->required();
  verify->add_option("--checkpoint", checkpoint, "model checkpoint")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    ntiqa::Config cfg = load_config(config_path, overrides);
    if (gen->parsed()) {
      ntiqa::cmd_gen_data(cfg, out_dir);
    } else if (train->parsed()) {
      if (lambda_opt->count() > 0) lambda_override = lambda_flag;
      ntiqa::cmd_train(cfg, data_dir, ntiqa::parse_variant(variant_name),
                       lambda_override, out_dir);
    } else if (attack->parsed()) {
      ntiqa::cmd_attack(cfg, data_dir, checkpoint, attack_name, surrogate, out_dir);
    } else if (eval->parsed()) {
      ntiqa::cmd_eval(cfg, results_csv, data_dir, checkpoint, out_dir);
    } else if (sweep->parsed()) {
      ntiqa::cmd_sweep(cfg, data_dir, ntiqa::parse_sweep_axis(axis_name), out_dir);
    } else if (verify->parsed()) {
      ntiqa::cmd_verify(cfg, data_dir, checkpoint, out_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
