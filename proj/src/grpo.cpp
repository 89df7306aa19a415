#include "udm/grpo.hpp"

#include <cmath>

namespace udm {

TrajectoryVariant parse_trajectory_variant(const std::string& s) {
    if (s == "backward") return TrajectoryVariant::Backward;
    if (s == "forward") return TrajectoryVariant::Forward;
    throw DomainError("unknown trajectory variant: " + s);
}

ActionVariant parse_action_variant(const std::string& s) {
    if (s == "intermediate") return ActionVariant::Intermediate;
    if (s == "clean") return ActionVariant::Clean;
    throw DomainError("unknown action variant: " + s);
}

TimestepMode parse_timestep_mode(const std::string& s) {
    if (s == "all") return TimestepMode::All;
    if (s == "reduced_early") return TimestepMode::ReducedEarly;
    if (s == "reduced_random") return TimestepMode::ReducedRandom;
    throw DomainError("unknown timestep mode: " + s);
}

void TrainConfig::validate() const {
    if (group_size < 2) throw DomainError("TrainConfig: group_size must be >= 2");
    if (groups_per_batch < 1) throw DomainError("TrainConfig: groups_per_batch must be >= 1");
    if (clip_eps <= 0.0 || clip_eps >= 1.0) throw DomainError("TrainConfig: clip_eps outside (0,1)");
    if (kl_weight < 0.0) throw DomainError("TrainConfig: kl_weight must be >= 0");
}

std::vector<double> compute_advantages(const std::vector<double>& rewards) {
    const size_t g = rewards.size();
    if (g < 2) throw DomainError("compute_advantages: need at least 2 rewards");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= double(g);
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= double(g);  // population std
    double sd = std::sqrt(var);
    std::vector<double> adv(g, 0.0);
    if (sd < 1e-8) return adv;  // degenerate group
    for (size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

std::vector<int> select_timesteps(TimestepMode mode, const TimeGrid& grid, Rng& rng) {
    const int T = grid.num_steps();
    if (mode == TimestepMode::All) {
        std::vector<int> all(static_cast<size_t>(T), 0);
        for (int j = 0; j < T; ++j) all[size_t(j)] = j;
        return all;
    }
    if (T < 6) throw DomainError("select_timesteps: reduced modes need T >= 6");
    int max_start;
    if (mode == TimestepMode::ReducedEarly) {
        int half = (T + 1) / 2;  // triple must lie inside [0, ceil(T/2))
        max_start = half - 3;
    } else {
        max_start = T - 3;
    }
    if (max_start < 0) throw DomainError("select_timesteps: grid too small for a triple");
    int start = rng.next_int(max_start + 1);
    return {start, start + 1, start + 2};
}

MdpView build_mdp_view(const TrainConfig& config, const RolloutRecord& record, int j,
                       const NoiseSchedule& sched, const SpaceSpec& space, Rng& rng) {
    const int T = record.grid.num_steps();
    if (j < 0 || j >= T) throw DomainError("build_mdp_view: step index out of range");
    MdpView view;
    view.prompt = record.prompt;
    view.step = j;
    view.t = record.grid.t(j);
    if (config.trajectory == TrajectoryVariant::Backward)
        view.state = record.states[size_t(j)];
    else
        view.state = reconstruct_forward_state(record.clean, view.t, sched, space, rng);
    view.action = (config.action == ActionVariant::Intermediate) ? record.intermediate_preds[size_t(j)]
                                                                 : record.clean;
    return view;
}

double policy_ratio(const ModelParams& params, const ModelParams& params_old, const MdpView& view,
                    const CfgSpec& cfg) {
    DenoiserInput in{view.state, view.t, view.prompt};
    double lp_new = sequence_log_prob(policy_field(params, in, cfg), view.action);
    double lp_old = sequence_log_prob(policy_field(params_old, in, cfg), view.action);
    if (std::isinf(lp_old)) throw NumericError("policy_ratio: zero probability under old policy");
    return std::exp(lp_new - lp_old);
}

double clipped_objective(double ratio, double advantage, double eps) {
    double clipped = std::min(std::max(ratio, 1.0 - eps), 1.0 + eps);
    return std::min(ratio * advantage, clipped * advantage);
}

double kl_penalty(const ModelParams& params, const ModelParams& params_ref, const MdpView& view,
                  const CfgSpec& cfg) {
    DenoiserInput in{view.state, view.t, view.prompt};
    Field p = policy_field(params, in, cfg);
    Field q = policy_field(params_ref, in, cfg);
    double kl = 0.0;
    for (Eigen::Index l = 0; l < p.rows(); ++l)
        for (Eigen::Index k = 0; k < p.cols(); ++k) {
            double pv = std::max(p(l, k), kProbFloor);
            double qv = std::max(q(l, k), kProbFloor);
            kl += p(l, k) * (std::log(pv) - std::log(qv));
        }
    return kl / double(p.rows());
}

UpdateMetrics grpo_update(ModelParams& params, ModelParams& params_old,
                          const ModelParams& params_ref, AdamState& opt,
                          const std::vector<GroupBatch>& batch, const TrainConfig& config,
                          const NoiseSchedule& sched, Rng& rng) {
    config.validate();
    if (batch.empty()) throw DomainError("grpo_update: empty batch");
    SpaceSpec space{params.arch.vocab_size, params.arch.seq_len};

    std::vector<GrpoItem> items;
    for (const GroupBatch& group : batch) {
        for (const RolloutRecord& rec : group.rollouts) {
            std::vector<int> steps = select_timesteps(config.timestep_mode, rec.grid, rng);
            for (int j : steps) {
                MdpView view = build_mdp_view(config, rec, j, sched, space, rng);
                GrpoItem item;
                item.input = DenoiserInput{view.state, view.t, view.prompt};
                item.action = view.action;
                item.advantage = rec.advantage;
                if (config.trajectory == TrajectoryVariant::Backward) {
                    // reverse states were produced under params_old; the
                    // recorded log-prob is the exact old policy value
                    item.old_logprob = (config.action == ActionVariant::Intermediate)
                                           ? rec.old_logprob_intermediate[size_t(j)]
                                           : rec.old_logprob_clean[size_t(j)];
                } else {
                    // fresh forward state: recompute under frozen params_old
                    item.old_logprob =
                        sequence_log_prob(policy_field(params_old, item.input, config.cfg), item.action);
                }
                if (std::isinf(item.old_logprob))
                    throw NumericError("grpo_update: zero action probability under old policy");
                item.ref_probs = policy_field(params_ref, item.input, config.cfg);
                items.push_back(std::move(item));
            }
        }
    }

    std::vector<double> grad;
    GrpoLossStats stats =
        grpo_loss_and_grad(params, items, config.clip_eps, config.kl_weight, config.cfg, grad);
    UpdateMetrics m;
    m.loss = stats.loss;
    m.ratio_mean = stats.ratio_mean;
    m.clip_frac = stats.clip_frac;
    m.kl_mean = stats.kl_mean;
    m.grad_norm = grad_norm(grad);
    // a zero-signal batch (e.g. all-degenerate groups with beta=0) leaves the
    // parameters untouched, decay included
    if (m.grad_norm > 0.0)
        adamw_step(params, grad, opt, config.adam);  // throws before mutating on non-finite grad
    params_old = params;
    return m;
}

}  // namespace udm
