#pragma once

#include <optional>
#include <string>

#include "ntiqa/attacks.hpp"
#include "ntiqa/config.hpp"
#include "ntiqa/dataset.hpp"
#include "ntiqa/defense.hpp"
#include "ntiqa/metrics.hpp"

namespace ntiqa {

constexpr const char* kToolVersion = "0.1.0";

enum class TrainVariant { kBaseline, kNt };
std::string variant_name(TrainVariant variant);
TrainVariant parse_variant(const std::string& name);

enum class SweepAxis { kLambda, kH, kIntensity };
SweepAxis parse_sweep_axis(const std::string& name);

// Config readers shared by the commands and the test suites.
ArchSpec arch_from_config(const Config& cfg);
TrainConfig train_config_from(const Config& cfg, TrainVariant variant);
AttackConfig attack_config_from(const Config& cfg, AttackKind kind);

// Pipeline commands. Each writes its artifacts plus a run_manifest.txt
// listing every emitted file, the config hash and the tool version.
void cmd_gen_data(const Config& cfg, const std::string& out_dir);

void cmd_train(const Config& cfg, const std::string& data_dir,
               TrainVariant variant, std::optional<double> lambda_override,
               const std::string& out_dir);

// surrogate_checkpoint is required for the uap attack (the perturbation is
// trained against it on the TRAIN split, then applied to the target).
void cmd_attack(const Config& cfg, const std::string& data_dir,
                const std::string& checkpoint, const std::string& attack_name,
                const std::string& surrogate_checkpoint,
                const std::string& out_dir);

void cmd_eval(const Config& cfg, const std::string& results_csv,
              const std::string& data_dir, const std::string& checkpoint,
              const std::string& out_dir);

void cmd_sweep(const Config& cfg, const std::string& data_dir, SweepAxis axis,
               const std::string& out_dir);

void cmd_verify(const Config& cfg, const std::string& data_dir,
                const std::string& checkpoint, const std::string& out_dir);

// Clean-split prediction metrics, also used by sweep rows.
struct CleanEval {
  double srocc = 0.0;
  double rmse = 0.0;
};
CleanEval evaluate_clean(const ScorerModel& model, const Dataset& dataset);

}  // namespace ntiqa
