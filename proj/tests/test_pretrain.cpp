#include <doctest.h>

#include <cmath>

#include "udm/pretrain.hpp"

using namespace udm;

namespace {

Arch arch_for(const SyntheticTask& task, int e = 12, int h = 16) {
    Arch a;
    a.vocab_size = task.space.vocab_size;
    a.seq_len = task.space.seq_len;
    a.num_prompts = task.num_prompts();
    a.emb_dim = e;
    a.hidden_dim = h;
    return a;
}

}  // namespace

TEST_CASE("fresh uniform model starts at D log K") {
    SyntheticTask task = SyntheticTask::defaults(6, 8, 2);
    NoiseSchedule sched{ScheduleKind::Linear};
    Arch a = arch_for(task);
    ModelParams params;
    params.arch = a;
    params.values.assign(size_t(a.param_count()), 0.0);
    double dlogk = task.space.seq_len * std::log(double(task.space.vocab_size));

    Rng rng(3);
    CHECK(evaluate_ce(params, task, sched, 256, rng) == doctest::Approx(dlogk).epsilon(1e-9));

    AdamState opt = AdamState::zero(a.param_count());
    PretrainConfig pc;
    Rng rng2(4);
    PretrainStepResult r = pretrain_step(params, opt, task, sched, pc, rng2);
    CHECK(r.ce_loss == doctest::Approx(dlogk).epsilon(1e-9));
}

TEST_CASE("evaluate_ce is deterministic given the seed") {
    SyntheticTask task = SyntheticTask::defaults(5, 6, 2);
    NoiseSchedule sched{ScheduleKind::Linear};
    Rng init(1);
    ModelParams params = ModelParams::init(arch_for(task), init);
    Rng a(9), b(9);
    CHECK(evaluate_ce(params, task, sched, 100, a) == evaluate_ce(params, task, sched, 100, b));
    Rng bad(1);
    CHECK_THROWS_AS(evaluate_ce(params, task, sched, 0, bad), DomainError);
}

TEST_CASE("cond_drop_p = 1 trains only the unconditional prompt row") {
    SyntheticTask task = SyntheticTask::defaults(4, 5, 3);
    NoiseSchedule sched{ScheduleKind::Linear};
    Arch a = arch_for(task);
    Rng init(5);
    ModelParams params = ModelParams::init(a, init);
    ModelParams before = params;
    AdamState opt = AdamState::zero(a.param_count());
    PretrainConfig pc;
    pc.cond_drop_p = 1.0;
    pc.batch_size = 8;
    pc.adam.weight_decay = 0.0;  // zero-gradient coordinates must stay put
    Rng rng(6);
    pretrain_step(params, opt, task, sched, pc, rng);
    size_t prompt_off = size_t(a.vocab_size) * a.emb_dim;
    size_t row = size_t(a.emb_dim);
    for (int p = 0; p < a.num_prompts; ++p)
        for (size_t i = 0; i < row; ++i)
            CHECK(params.values[prompt_off + size_t(p) * row + i] ==
                  before.values[prompt_off + size_t(p) * row + i]);
    // the NULL row did move
    bool moved = false;
    for (size_t i = 0; i < row; ++i)
        moved |= params.values[prompt_off + size_t(a.num_prompts) * row + i] !=
                 before.values[prompt_off + size_t(a.num_prompts) * row + i];
    CHECK(moved);
}

TEST_CASE("empirical condition-dropout fraction is cond_drop_p") {
    int dropped = 0;
    const int n = 10000;
    Rng drop_rng(6);
    for (int i = 0; i < n; ++i) dropped += drop_rng.next_bernoulli(0.1);
    CHECK(std::abs(double(dropped) / n - 0.1) < 0.01);
}

TEST_CASE("short pretraining run lowers held-out CE and is smoothly decreasing") {
    SyntheticTask task = SyntheticTask::defaults(6, 8, 2);
    NoiseSchedule sched{ScheduleKind::Linear};
    Rng init(7);
    ModelParams params = ModelParams::init(arch_for(task), init);
    AdamState opt = AdamState::zero(params.arch.param_count());
    PretrainConfig pc;
    pc.batch_size = 16;

    Rng eval_rng(8);
    double before = evaluate_ce(params, task, sched, 200, eval_rng);
    Rng train_rng(9);
    double first = 0.0, last = 0.0;
    const int steps = 120;
    for (int s = 0; s < steps; ++s) {
        Rng step_rng = train_rng.child(uint64_t(s) + 1);
        double loss = pretrain_step(params, opt, task, sched, pc, step_rng).ce_loss;
        if (s < 20) first += loss / 20;
        if (s >= steps - 20) last += loss / 20;
    }
    Rng eval_rng2(8);
    double after = evaluate_ce(params, task, sched, 200, eval_rng2);
    CHECK(after < before);
    CHECK(last < first);
}

TEST_CASE("pretrain_step rejects bad configuration") {
    SyntheticTask task = SyntheticTask::defaults(4, 4, 2);
    NoiseSchedule sched{ScheduleKind::Linear};
    Rng init(2);
    ModelParams params = ModelParams::init(arch_for(task), init);
    AdamState opt = AdamState::zero(params.arch.param_count());
    PretrainConfig pc;
    pc.cond_drop_p = 1.5;
    Rng rng(1);
    CHECK_THROWS_AS(pretrain_step(params, opt, task, sched, pc, rng), DomainError);
    SyntheticTask empty;
    empty.space = task.space;
    pc.cond_drop_p = 0.1;
    CHECK_THROWS_AS(pretrain_step(params, opt, empty, sched, pc, rng), DomainError);
}
