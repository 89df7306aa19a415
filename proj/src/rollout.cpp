#include "udm/rollout.hpp"

#include <sstream>

namespace udm {

Field cfg_combine(const Field& cond_logits, const Field& uncond_logits, double w) {
    if (cond_logits.rows() != uncond_logits.rows() || cond_logits.cols() != uncond_logits.cols())
        throw ShapeError("cfg_combine: shape mismatch");
    return uncond_logits + w * (cond_logits - uncond_logits);
}

RolloutRecord sample_rollout(const ModelParams& params_old, int c, const TimeGrid& grid,
                             const NoiseSchedule& sched, const CfgSpec& cfg, Rng& rng) {
    grid.validate();
    const int T = grid.num_steps();
    const int K = params_old.arch.vocab_size;
    const int D = params_old.arch.seq_len;

    RolloutRecord rec;
    rec.prompt = c;
    rec.grid = grid;
    rec.states.reserve(size_t(T) + 1);
    rec.intermediate_preds.reserve(size_t(T));
    rec.old_logprob_intermediate.resize(size_t(T));
    rec.old_logprob_clean.resize(size_t(T));

    TokenSeq x(static_cast<size_t>(D), 0);
    for (int l = 0; l < D; ++l) x[size_t(l)] = rng.next_int(K);
    rec.states.push_back(x);

    std::vector<Field> fields;
    fields.reserve(size_t(T));
    for (int j = 0; j < T; ++j) {
        double t = grid.t(j);
        Field field = policy_field(params_old, DenoiserInput{x, t, c}, cfg);
        TokenSeq pred = sample_field(field, rng);
        rec.old_logprob_intermediate[size_t(j)] = sequence_log_prob(field, pred);
        fields.push_back(std::move(field));
        x = euler_step(x, pred, t, grid.dt(j), sched, rng);
        rec.intermediate_preds.push_back(std::move(pred));
        rec.states.push_back(x);
    }
    rec.clean = rec.intermediate_preds.back();
    for (int j = 0; j < T; ++j)
        rec.old_logprob_clean[size_t(j)] = sequence_log_prob(fields[size_t(j)], rec.clean);
    return rec;
}

TokenSeq reconstruct_forward_state(const TokenSeq& clean, double t, const NoiseSchedule& sched,
                                   const SpaceSpec& space, Rng& rng) {
    return forward_corrupt(clean, t, sched, space, rng);
}

std::vector<TokenSeq> build_pretrain_trajectory(const TokenSeq& x1, const TimeGrid& grid,
                                                const NoiseSchedule& sched, const SpaceSpec& space,
                                                Rng& rng) {
    grid.validate();
    std::vector<TokenSeq> out;
    out.reserve(grid.knots.size());
    for (double t : grid.knots) out.push_back(forward_corrupt(x1, t, sched, space, rng));
    return out;
}

std::string dump_trajectory(const RolloutRecord& rec) {
    std::ostringstream out;
    for (size_t j = 0; j < rec.intermediate_preds.size(); ++j) {
        out << j << " " << rec.grid.t(int(j));
        for (int tok : rec.states[j]) out << " " << tok;
        out << " |";
        for (int tok : rec.intermediate_preds[j]) out << " " << tok;
        out << "\n";
    }
    return out.str();
}

}  // namespace udm
