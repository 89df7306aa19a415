#pragma once

#include <iosfwd>

#include "udm/analysis.hpp"
#include "udm/config.hpp"
#include "udm/grpo.hpp"
#include "udm/pretrain.hpp"

namespace udm {

// exit codes shared by all commands
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCheckpointMismatch = 3;
constexpr int kExitNumeric = 4;

struct CheckpointMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

SyntheticTask task_from_config(const Config& cfg);
NoiseSchedule schedule_from_config(const Config& cfg);
Arch arch_from_config(const Config& cfg);
TrainConfig train_config_from_config(const Config& cfg);

// pretrain: writes <out>/pretrain.ckpt, <out>/pretrain_metrics.csv, <out>/task.txt
void run_pretrain(const Config& cfg, const std::string& out_dir);

// rl: reads a pretrained checkpoint, writes <out>/rl.ckpt and <out>/rl_metrics.csv
void run_rl(const Config& cfg, const std::string& checkpoint, const std::string& out_dir);

// sample: prints n rollouts with rewards and the group mean
void run_sample(const Config& cfg, const std::string& checkpoint, int prompt, int n,
                std::ostream& out);

// probe: writes <out>/probe.csv
void run_probe(const Config& cfg, const std::string& checkpoint, const std::string& out_dir);

// eval: prints held-out CE and mean reward over eval_samples rollouts
void run_eval(const Config& cfg, const std::string& checkpoint, std::ostream& out);

}  // namespace udm
