#pragma once

#include "udm/model.hpp"

namespace udm {

// One reverse-process trajectory and everything the trainer later needs.
// states has T+1 entries (states[0] drawn uniform), intermediate_preds has T;
// clean equals the last intermediate prediction.
struct RolloutRecord {
    int prompt = 0;
    TimeGrid grid;
    std::vector<TokenSeq> states;
    std::vector<TokenSeq> intermediate_preds;
    TokenSeq clean;
    std::vector<double> old_logprob_intermediate;  // log p_old(x1^tj | x_tj, c)
    std::vector<double> old_logprob_clean;         // log p_old(clean | x_tj, c)
    double reward = 0.0;
    double advantage = 0.0;
};

// uncond + w * (cond - uncond), in logit space.
Field cfg_combine(const Field& cond_logits, const Field& uncond_logits, double w);

// Reverse process under frozen params_old: from uniform noise, at each grid
// step sample the intermediate prediction from the (guided or conditional)
// field, record both old log-probs, then apply the Euler jump rule.
// reward/advantage are left unset.
RolloutRecord sample_rollout(const ModelParams& params_old, int c, const TimeGrid& grid,
                             const NoiseSchedule& sched, const CfgSpec& cfg, Rng& rng);

// A state on the forward-corruption trajectory of the rollout's clean sample
// (fresh draw from p_t(.|clean); not part of the recorded reverse states).
TokenSeq reconstruct_forward_state(const TokenSeq& clean, double t, const NoiseSchedule& sched,
                                   const SpaceSpec& space, Rng& rng);

// Forward-corrupts a dataset sample at every grid knot (T+1 entries).
std::vector<TokenSeq> build_pretrain_trajectory(const TokenSeq& x1, const TimeGrid& grid,
                                                const NoiseSchedule& sched, const SpaceSpec& space,
                                                Rng& rng);

// Optional per-step text dump: "j t state... | pred..." one line per step.
std::string dump_trajectory(const RolloutRecord& rec);

}  // namespace udm
