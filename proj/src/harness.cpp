#include "udm/harness.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace udm {

namespace {

// stream derivation salts: run -> command -> step -> group -> rollout
constexpr uint64_t kSaltInit = 0x11;
constexpr uint64_t kSaltPretrain = 0x22;
constexpr uint64_t kSaltRl = 0x33;
constexpr uint64_t kSaltSample = 0x44;
constexpr uint64_t kSaltProbe = 0x55;
constexpr uint64_t kSaltEval = 0x66;
constexpr uint64_t kSaltTrain = 0x77;

class StepTimer {
public:
    explicit StepTimer(bool enabled) : enabled_(enabled) { reset(); }
    void reset() { start_ = std::chrono::steady_clock::now(); }
    int64_t elapsed_ms() const {
        if (!enabled_) return 0;
        auto d = std::chrono::steady_clock::now() - start_;
        return std::chrono::duration_cast<std::chrono::milliseconds>(d).count();
    }

private:
    bool enabled_;
    std::chrono::steady_clock::time_point start_;
};

std::ofstream open_out(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::string path = dir + "/" + name;
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw ConfigError("cannot open output file: " + path);
    f << std::setprecision(17);
    return f;
}

ModelParams load_matching_checkpoint(const Config& cfg, const std::string& path) {
    ModelParams p = load_checkpoint(path);
    if (!(p.arch == arch_from_config(cfg)))
        throw CheckpointMismatch("checkpoint architecture does not match config: " + path);
    return p;
}

}  // namespace

SyntheticTask task_from_config(const Config& cfg) {
    std::string file = cfg.get_str("task_file");
    if (!file.empty()) {
        std::ifstream f(file);
        if (!f) throw ConfigError("cannot open task file: " + file);
        std::ostringstream buf;
        buf << f.rdbuf();
        return parse_task(buf.str());
    }
    SyntheticTask t = SyntheticTask::defaults(cfg.get_int("task_vocab"), cfg.get_int("task_len"),
                                              cfg.get_int("task_prompts"));
    t.mix_prob = cfg.get_double("task_mix");
    t.validate();
    return t;
}

NoiseSchedule schedule_from_config(const Config& cfg) {
    std::string s = cfg.get_str("schedule");
    if (s == "linear") return NoiseSchedule{ScheduleKind::Linear};
    if (s == "cosine") return NoiseSchedule{ScheduleKind::Cosine};
    throw ConfigError("config key schedule: expected linear|cosine, got '" + s + "'");
}

Arch arch_from_config(const Config& cfg) {
    SyntheticTask task = task_from_config(cfg);
    Arch a;
    a.vocab_size = task.space.vocab_size;
    a.seq_len = task.space.seq_len;
    a.num_prompts = task.num_prompts();
    a.emb_dim = cfg.get_int("emb_dim");
    a.hidden_dim = cfg.get_int("hidden_dim");
    return a;
}

TrainConfig train_config_from_config(const Config& cfg) {
    TrainConfig tc;
    tc.group_size = cfg.get_int("group_size");
    tc.groups_per_batch = cfg.get_int("groups_per_batch");
    tc.clip_eps = cfg.get_double("clip_eps");
    tc.kl_weight = cfg.get_double("kl_weight");
    tc.trajectory = parse_trajectory_variant(cfg.get_str("trajectory"));
    tc.action = parse_action_variant(cfg.get_str("action"));
    tc.timestep_mode = parse_timestep_mode(cfg.get_str("timestep_mode"));
    tc.cfg.enabled = cfg.get_bool("cfg_enabled");
    tc.cfg.scale = cfg.get_double("cfg_scale");
    std::string bp = cfg.get_str("cfg_backprop");
    if (bp != "guided" && bp != "cond_only")
        throw ConfigError("config key cfg_backprop: expected guided|cond_only, got '" + bp + "'");
    tc.cfg.backprop_guided = (bp == "guided");
    tc.adam.lr = cfg.get_double("rl_lr");
    tc.adam.beta1 = cfg.get_double("adam_beta1");
    tc.adam.beta2 = cfg.get_double("adam_beta2");
    tc.adam.weight_decay = cfg.get_double("weight_decay");
    tc.validate();
    return tc;
}

void run_pretrain(const Config& cfg, const std::string& out_dir) {
    SyntheticTask task = task_from_config(cfg);
    NoiseSchedule sched = schedule_from_config(cfg);
    Arch arch = arch_from_config(cfg);
    Rng run_rng(cfg.get_u64("seed"));

    Rng init_rng = run_rng.child(kSaltInit);
    ModelParams params = ModelParams::init(arch, init_rng);
    AdamState opt = AdamState::zero(arch.param_count());

    PretrainConfig pc;
    pc.batch_size = cfg.get_int("pretrain_batch");
    pc.cond_drop_p = cfg.get_double("cond_drop_p");
    pc.adam.lr = cfg.get_double("pretrain_lr");
    pc.adam.beta1 = cfg.get_double("adam_beta1");
    pc.adam.beta2 = cfg.get_double("adam_beta2");
    pc.adam.weight_decay = cfg.get_double("weight_decay");

    std::ofstream csv = open_out(out_dir, "pretrain_metrics.csv");
    csv << "step,ce_loss,grad_norm,wallclock_ms\n";
    bool log_timing = cfg.get_bool("log_timing");
    Rng pre_rng = run_rng.child(kSaltPretrain);
    int steps = cfg.get_int("pretrain_steps");
    for (int step = 0; step < steps; ++step) {
        StepTimer timer(log_timing);
        Rng step_rng = pre_rng.child(uint64_t(step) + 1);
        PretrainStepResult r = pretrain_step(params, opt, task, sched, pc, step_rng);
        csv << step << "," << r.ce_loss << "," << r.grad_norm << "," << timer.elapsed_ms() << "\n";
    }
    save_checkpoint(params, out_dir + "/pretrain.ckpt");
    std::ofstream tf = open_out(out_dir, "task.txt");
    tf << serialize_task(task);
}

void run_rl(const Config& cfg, const std::string& checkpoint, const std::string& out_dir) {
    SyntheticTask task = task_from_config(cfg);
    NoiseSchedule sched = schedule_from_config(cfg);
    TrainConfig tc = train_config_from_config(cfg);
    RewardSpec rspec{parse_reward_kind(cfg.get_str("reward"))};
    TimeGrid grid = TimeGrid::uniform(cfg.get_int("sample_steps"));
    Rng run_rng(cfg.get_u64("seed"));

    ModelParams params = load_matching_checkpoint(cfg, checkpoint);
    ModelParams params_old = params;
    const ModelParams params_ref = params;  // frozen KL anchor
    AdamState opt = AdamState::zero(params.arch.param_count());

    std::ofstream csv = open_out(out_dir, "rl_metrics.csv");
    csv << "step,reward_mean,reward_std,kl,clip_frac,ratio_mean,loss,grad_norm,wallclock_ms\n";
    bool log_timing = cfg.get_bool("log_timing");
    Rng rl_rng = run_rng.child(kSaltRl);
    int updates = cfg.get_int("rl_updates");
    for (int step = 0; step < updates; ++step) {
        StepTimer timer(log_timing);
        Rng upd_rng = rl_rng.child(uint64_t(step) + 1);
        std::vector<GroupBatch> batch;
        double rsum = 0.0, rsq = 0.0;
        int rcount = 0;
        for (int g = 0; g < tc.groups_per_batch; ++g) {
            Rng grp_rng = upd_rng.child(uint64_t(g) + 1);
            GroupBatch group;
            group.prompt = grp_rng.next_int(task.num_prompts());
            std::vector<double> rewards;
            for (int i = 0; i < tc.group_size; ++i) {
                Rng ro_rng = grp_rng.child(uint64_t(i) + 1);
                RolloutRecord rec =
                    sample_rollout(params_old, group.prompt, grid, sched, tc.cfg, ro_rng);
                rec.reward = reward(rspec, task, rec.clean, group.prompt);
                rewards.push_back(rec.reward);
                rsum += rec.reward;
                rsq += rec.reward * rec.reward;
                ++rcount;
                group.rollouts.push_back(std::move(rec));
            }
            std::vector<double> adv = compute_advantages(rewards);
            for (int i = 0; i < tc.group_size; ++i) group.rollouts[size_t(i)].advantage = adv[size_t(i)];
            batch.push_back(std::move(group));
        }
        Rng train_rng = upd_rng.child(kSaltTrain);
        UpdateMetrics m = grpo_update(params, params_old, params_ref, opt, batch, tc, sched, train_rng);
        double rmean = rsum / rcount;
        double rstd = std::sqrt(std::max(0.0, rsq / rcount - rmean * rmean));
        csv << step << "," << rmean << "," << rstd << "," << m.kl_mean << "," << m.clip_frac << ","
            << m.ratio_mean << "," << m.loss << "," << m.grad_norm << "," << timer.elapsed_ms()
            << "\n";
    }
    save_checkpoint(params, out_dir + "/rl.ckpt");
}

void run_sample(const Config& cfg, const std::string& checkpoint, int prompt, int n,
                std::ostream& out) {
    SyntheticTask task = task_from_config(cfg);
    if (prompt < 0 || prompt >= task.num_prompts())
        throw ConfigError("unknown prompt id: " + std::to_string(prompt));
    NoiseSchedule sched = schedule_from_config(cfg);
    TrainConfig tc = train_config_from_config(cfg);
    RewardSpec rspec{parse_reward_kind(cfg.get_str("reward"))};
    TimeGrid grid = TimeGrid::uniform(cfg.get_int("sample_steps"));
    ModelParams params = load_matching_checkpoint(cfg, checkpoint);
    Rng rng = Rng(cfg.get_u64("seed")).child(kSaltSample);

    out << std::setprecision(17);
    out << "sample,reward,tokens\n";
    double rsum = 0.0;
    for (int i = 0; i < n; ++i) {
        Rng ro_rng = rng.child(uint64_t(i) + 1);
        RolloutRecord rec = sample_rollout(params, prompt, grid, sched, tc.cfg, ro_rng);
        double r = reward(rspec, task, rec.clean, prompt);
        rsum += r;
        out << i << "," << r << ",";
        for (size_t l = 0; l < rec.clean.size(); ++l) out << (l ? " " : "") << rec.clean[l];
        out << "\n";
    }
    if (n > 0) out << "mean_reward," << rsum / n << "\n";
}

void run_probe(const Config& cfg, const std::string& checkpoint, const std::string& out_dir) {
    SyntheticTask task = task_from_config(cfg);
    NoiseSchedule sched = schedule_from_config(cfg);
    TimeGrid grid = TimeGrid::uniform(cfg.get_int("sample_steps"));
    ModelParams params = load_matching_checkpoint(cfg, checkpoint);
    ProbeConfig pc;
    pc.n_pairs = cfg.get_int("probe_pairs");
    pc.feature_dim = cfg.get_int("probe_feature_dim");
    pc.feature_seed = cfg.get_u64("probe_feature_seed");
    Rng rng = Rng(cfg.get_u64("seed")).child(kSaltProbe);
    ProbeResult result = trajectory_probe(params, task, grid, sched, pc, rng);
    std::ofstream csv = open_out(out_dir, "probe.csv");
    csv << probe_csv(result);
}

void run_eval(const Config& cfg, const std::string& checkpoint, std::ostream& out) {
    SyntheticTask task = task_from_config(cfg);
    NoiseSchedule sched = schedule_from_config(cfg);
    TrainConfig tc = train_config_from_config(cfg);
    RewardSpec rspec{parse_reward_kind(cfg.get_str("reward"))};
    TimeGrid grid = TimeGrid::uniform(cfg.get_int("eval_steps"));
    ModelParams params = load_matching_checkpoint(cfg, checkpoint);
    int n = cfg.get_int("eval_samples");
    if (n < 1) throw ConfigError("config key eval_samples: must be >= 1");
    Rng rng = Rng(cfg.get_u64("seed")).child(kSaltEval);

    Rng ce_rng = rng.child(1);
    double ce = evaluate_ce(params, task, sched, n, ce_rng);
    double rsum = 0.0;
    Rng ro_base = rng.child(2);
    for (int i = 0; i < n; ++i) {
        Rng ro_rng = ro_base.child(uint64_t(i) + 1);
        int c = ro_rng.next_int(task.num_prompts());
        RolloutRecord rec = sample_rollout(params, c, grid, sched, tc.cfg, ro_rng);
        rsum += reward(rspec, task, rec.clean, c);
    }
    out << std::setprecision(17);
    out << "ce," << ce << "\n";
    out << "reward_mean," << rsum / n << "\n";
}

}  // namespace udm
