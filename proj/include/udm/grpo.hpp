#pragma once

#include "udm/rollout.hpp"

namespace udm {

enum class TrajectoryVariant { Backward, Forward };
enum class ActionVariant { Intermediate, Clean };
enum class TimestepMode { All, ReducedEarly, ReducedRandom };

TrajectoryVariant parse_trajectory_variant(const std::string& s);
ActionVariant parse_action_variant(const std::string& s);
TimestepMode parse_timestep_mode(const std::string& s);

struct TrainConfig {
    int group_size = 8;        // G
    int groups_per_batch = 8;
    double clip_eps = 0.2;
    double kl_weight = 0.04;   // beta
    TrajectoryVariant trajectory = TrajectoryVariant::Forward;
    ActionVariant action = ActionVariant::Clean;
    TimestepMode timestep_mode = TimestepMode::ReducedEarly;
    CfgSpec cfg{};
    AdamConfig adam{.lr = 1e-4};

    void validate() const;
};

struct GroupBatch {
    int prompt = 0;
    std::vector<RolloutRecord> rollouts;  // G entries, advantages filled in
};

// One (state, action) pair fed to the surrogate.
struct MdpView {
    TokenSeq state;
    double t = 0.0;
    int prompt = 0;
    TokenSeq action;
    int step = 0;
};

// Group-normalized advantages with population std; all-zero when the group is
// degenerate (std < 1e-8).
std::vector<double> compute_advantages(const std::vector<double>& rewards);

// all -> every index; reduced_early -> a uniform consecutive triple inside
// [0, ceil(T/2)); reduced_random -> a uniform consecutive triple in [0, T).
std::vector<int> select_timesteps(TimestepMode mode, const TimeGrid& grid, Rng& rng);

// Backward variant reads the recorded reverse state; forward variant draws a
// fresh state from p_t(.|clean). Action is the step prediction or the clean
// sample per the configured variant.
MdpView build_mdp_view(const TrainConfig& config, const RolloutRecord& record, int j,
                       const NoiseSchedule& sched, const SpaceSpec& space, Rng& rng);

// exp(log p_theta(action|state) - log p_old(action|state)), both at the view
// state under the configured policy field.
double policy_ratio(const ModelParams& params, const ModelParams& params_old, const MdpView& view,
                    const CfgSpec& cfg);

// min(r*A, clip(r, 1-eps, 1+eps)*A)
double clipped_objective(double ratio, double advantage, double eps);

// Mean over positions of the exact categorical KL(p_theta || p_ref) at the
// view state.
double kl_penalty(const ModelParams& params, const ModelParams& params_ref, const MdpView& view,
                  const CfgSpec& cfg);

struct UpdateMetrics {
    double loss = 0.0;
    double ratio_mean = 0.0;
    double clip_frac = 0.0;
    double kl_mean = 0.0;
    double grad_norm = 0.0;
};

// One trainer iteration over a sampled batch: build views for every
// rollout's selected timesteps, accumulate the clipped surrogate plus KL,
// take one AdamW step, then refresh params_old from params.
UpdateMetrics grpo_update(ModelParams& params, ModelParams& params_old,
                          const ModelParams& params_ref, AdamState& opt,
                          const std::vector<GroupBatch>& batch, const TrainConfig& config,
                          const NoiseSchedule& sched, Rng& rng);

}  // namespace udm
