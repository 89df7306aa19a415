#include "udm/pretrain.hpp"

namespace udm {

namespace {

CeItem draw_item(const SyntheticTask& task, const NoiseSchedule& sched, double cond_drop_p,
                 Rng& rng) {
    int c = rng.next_int(task.num_prompts());
    TokenSeq x1 = sample_clean(task, c, rng);
    double t = rng.next_double();
    TokenSeq x_t = forward_corrupt(x1, t, sched, task.space, rng);
    if (rng.next_bernoulli(cond_drop_p)) c = kUncond;
    CeItem item;
    item.input = DenoiserInput{std::move(x_t), t, c};
    item.target = std::move(x1);
    return item;
}

}  // namespace

PretrainStepResult pretrain_step(ModelParams& params, AdamState& opt, const SyntheticTask& task,
                                 const NoiseSchedule& sched, const PretrainConfig& cfg, Rng& rng) {
    task.validate();
    if (cfg.cond_drop_p < 0.0 || cfg.cond_drop_p > 1.0)
        throw DomainError("pretrain_step: cond_drop_p outside [0,1]");
    if (task.num_prompts() > params.arch.num_prompts)
        throw ShapeError("pretrain_step: task has more prompts than the architecture");
    std::vector<CeItem> batch;
    batch.reserve(size_t(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b)
        batch.push_back(draw_item(task, sched, cfg.cond_drop_p, rng));
    std::vector<double> grad;
    PretrainStepResult res;
    res.ce_loss = ce_loss_and_grad(params, batch, grad);
    res.grad_norm = grad_norm(grad);
    adamw_step(params, grad, opt, cfg.adam);
    return res;
}

double evaluate_ce(const ModelParams& params, const SyntheticTask& task, const NoiseSchedule& sched,
                   int n_samples, Rng& rng) {
    if (n_samples < 1) throw DomainError("evaluate_ce: n_samples must be >= 1");
    double acc = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        CeItem item = draw_item(task, sched, 0.0, rng);
        Field p = softmax_rows(forward_logits(params, item.input));
        acc += -sequence_log_prob(p, item.target);
    }
    return acc / n_samples;
}

}  // namespace udm
