#pragma once

#include "udm/model.hpp"
#include "udm/task.hpp"

namespace udm {

struct PretrainConfig {
    int batch_size = 64;
    double cond_drop_p = 0.1;
    AdamConfig adam{};  // lr defaults to 1e-3
};

struct PretrainStepResult {
    double ce_loss = 0.0;
    double grad_norm = 0.0;
};

// One supervised step: sample (c, x1) pairs, t ~ U[0,1], corrupt, drop the
// condition with probability cond_drop_p, then one AdamW step on the
// batch-mean cross-entropy toward x1.
PretrainStepResult pretrain_step(ModelParams& params, AdamState& opt, const SyntheticTask& task,
                                 const NoiseSchedule& sched, const PretrainConfig& cfg, Rng& rng);

// Monte-Carlo estimate of the cross-entropy objective on fresh samples.
double evaluate_ce(const ModelParams& params, const SyntheticTask& task, const NoiseSchedule& sched,
                   int n_samples, Rng& rng);

}  // namespace udm
