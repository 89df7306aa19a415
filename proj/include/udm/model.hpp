#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "udm/core.hpp"

namespace udm {

// prompt id for the unconditional branch
constexpr int kUncond = -1;

// Classifier-free guidance settings. scale is the guidance weight w in
// uncond + w * (cond - uncond).
struct CfgSpec {
    bool enabled = false;
    double scale = 1.0;
    // When false, guided-policy gradients stop at the conditional branch.
    bool backprop_guided = true;
};

struct Arch {
    int vocab_size = 16;   // K
    int seq_len = 24;      // D
    int num_prompts = 4;   // P (a learned NULL row is added internally)
    int emb_dim = 32;      // E
    int hidden_dim = 64;   // H

    int64_t param_count() const;
    bool operator==(const Arch&) const = default;
};

// Flat 64-bit parameter vector. Instantiated three times during RL as theta,
// theta_old and theta_ref.
struct ModelParams {
    Arch arch;
    std::vector<double> values;

    static ModelParams init(const Arch& arch, Rng& rng);  // uniform in [-0.05, 0.05]
    void validate() const;
};

struct DenoiserInput {
    TokenSeq x_t;
    double t = 0.0;
    int cond = kUncond;  // prompt id in [0, P) or kUncond
};

// Two position-wise MLP blocks with a mean-pooled context vector added to
// every position, on top of token + prompt + sinusoidal time embeddings.
// Returns D x K logits. Increments the model-evaluation counter.
Field forward_logits(const ModelParams& params, const DenoiserInput& input);

// Policy field used for both sampling and training: softmax of the guided
// combination when cfg is enabled, of the conditional logits otherwise.
Field policy_field(const ModelParams& params, const DenoiserInput& input, const CfgSpec& cfg);

// Instrumentation: number of forward_logits evaluations since the last reset.
int64_t denoiser_eval_count();
void reset_denoiser_eval_count();

struct CeItem {
    DenoiserInput input;
    TokenSeq target;
    double weight = 1.0;
};

// One (rollout, timestep) view for the clipped surrogate. old_logprob and
// ref_probs are constants w.r.t. the trainable parameters.
struct GrpoItem {
    DenoiserInput input;
    TokenSeq action;
    double advantage = 0.0;
    double old_logprob = 0.0;
    Field ref_probs;
};

// Mean over items of weight * sum_l -log p_theta(target_l | x_t, cond).
// grad receives the exact derivative (resized and overwritten).
double ce_loss_and_grad(const ModelParams& params, const std::vector<CeItem>& batch,
                        std::vector<double>& grad);

struct GrpoLossStats {
    double loss = 0.0;
    double ratio_mean = 0.0;
    double clip_frac = 0.0;
    double kl_mean = 0.0;
};

// Mean over items of -min(r*A, clip(r, 1-eps, 1+eps)*A) + kl_weight * KL(p||ref).
GrpoLossStats grpo_loss_and_grad(const ModelParams& params, const std::vector<GrpoItem>& batch,
                                 double clip_eps, double kl_weight, const CfgSpec& cfg,
                                 std::vector<double>& grad);

struct AdamState {
    std::vector<double> m, v;
    int64_t step = 0;

    static AdamState zero(int64_t n);
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double weight_decay = 0.01;
    double eps = 1e-8;
};

// Decoupled-weight-decay Adam update, in place.
void adamw_step(ModelParams& params, const std::vector<double>& grad, AdamState& state,
                const AdamConfig& cfg);

double grad_norm(const std::vector<double>& grad);

// Checkpoint: "UDMG" magic, format version, architecture ints, then the
// parameter vector as little-endian 64-bit reals. Round-trip is bit-exact.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace udm
