#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "udm/harness.hpp"

using namespace udm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    REQUIRE(bool(f));
    f << text;
}

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("udm_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// small but real end-to-end settings
const char* kTinyCfg =
    "task_vocab=5\n"
    "task_len=6\n"
    "task_prompts=2\n"
    "emb_dim=8\n"
    "hidden_dim=10\n"
    "pretrain_steps=10\n"
    "pretrain_batch=8\n"
    "sample_steps=6\n"
    "eval_steps=6\n"
    "rl_updates=2\n"
    "group_size=3\n"
    "groups_per_batch=2\n"
    "timestep_mode=all\n"
    "eval_samples=4\n"
    "probe_pairs=8\n";

int run_cli(const std::string& args) {
    std::string cmd = std::string(UDM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("config parsing: defaults, comments, unknown keys, bad values") {
    Config cfg = Config::from_text("");
    CHECK(cfg.get_int("sample_steps") == 10);
    CHECK(cfg.get_int("eval_steps") == 25);
    CHECK(cfg.get_double("clip_eps") == 0.2);
    CHECK(cfg.get_double("kl_weight") == 0.04);
    CHECK(cfg.get_str("trajectory") == "forward");
    CHECK(cfg.get_str("action") == "clean");
    CHECK(cfg.get_str("timestep_mode") == "reduced_early");
    CHECK(cfg.get_bool("cfg_enabled") == false);

    Config c2 = Config::from_text("# comment\nseed = 9\nclip_eps=0.3 # trailing\n\n");
    CHECK(c2.get_u64("seed") == 9);
    CHECK(c2.get_double("clip_eps") == 0.3);

    CHECK_THROWS_AS(Config::from_text("clip_epsilon=0.2\n"), ConfigError);
    CHECK_THROWS_AS(Config::from_text("no_equals_sign\n"), ConfigError);
    Config c3 = Config::from_text("seed=notanumber\n");
    CHECK_THROWS_AS(c3.get_u64("seed"), ConfigError);
    CHECK_THROWS_AS(Config::from_file("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("derived objects from config") {
    Config cfg = Config::from_text(kTinyCfg);
    SyntheticTask task = task_from_config(cfg);
    CHECK(task.space.vocab_size == 5);
    CHECK(task.space.seq_len == 6);
    CHECK(task.num_prompts() == 2);

    Arch a = arch_from_config(cfg);
    CHECK(a.vocab_size == 5);
    CHECK(a.emb_dim == 8);

    TrainConfig tc = train_config_from_config(cfg);
    CHECK(tc.group_size == 3);
    CHECK(tc.timestep_mode == TimestepMode::All);

    CHECK(schedule_from_config(cfg).kind == ScheduleKind::Linear);
    Config cos = Config::from_text("schedule=cosine\n");
    CHECK(schedule_from_config(cos).kind == ScheduleKind::Cosine);
    Config bad = Config::from_text("schedule=quadric\n");
    CHECK_THROWS_AS(schedule_from_config(bad), ConfigError);
}

TEST_CASE("task_file round trip through the harness") {
    fs::path dir = fresh_dir("taskfile");
    SyntheticTask task = SyntheticTask::defaults(7, 9, 3);
    task.mix_prob = 0.5;
    spit((dir / "task.txt").string(), serialize_task(task));
    Config cfg = Config::from_text("task_file=" + (dir / "task.txt").string() + "\n");
    SyntheticTask loaded = task_from_config(cfg);
    CHECK(loaded.space.vocab_size == 7);
    CHECK(loaded.space.seq_len == 9);
    CHECK(loaded.num_prompts() == 3);
    CHECK(loaded.mix_prob == 0.5);
}

TEST_CASE("pretrain with zero steps writes header-only metrics and the initial checkpoint") {
    fs::path dir = fresh_dir("zerosteps");
    Config cfg = Config::from_text(std::string(kTinyCfg) + "pretrain_steps=0\n");
    run_pretrain(cfg, dir.string());
    CHECK(slurp((dir / "pretrain_metrics.csv").string()) == "step,ce_loss,grad_norm,wallclock_ms\n");
    ModelParams p = load_checkpoint((dir / "pretrain.ckpt").string());
    CHECK(p.arch == arch_from_config(cfg));
    CHECK(fs::exists(dir / "task.txt"));
}

TEST_CASE("re-runs are byte-identical and checkpoints round trip bit-exactly") {
    Config cfg = Config::from_text(kTinyCfg);
    fs::path d1 = fresh_dir("det1");
    fs::path d2 = fresh_dir("det2");
    run_pretrain(cfg, d1.string());
    run_pretrain(cfg, d2.string());
    CHECK(slurp((d1 / "pretrain_metrics.csv").string()) ==
          slurp((d2 / "pretrain_metrics.csv").string()));
    CHECK(slurp((d1 / "pretrain.ckpt").string()) == slurp((d2 / "pretrain.ckpt").string()));

    run_rl(cfg, (d1 / "pretrain.ckpt").string(), (d1 / "rl").string());
    run_rl(cfg, (d2 / "pretrain.ckpt").string(), (d2 / "rl").string());
    CHECK(slurp((d1 / "rl/rl_metrics.csv").string()) == slurp((d2 / "rl/rl_metrics.csv").string()));
    CHECK(slurp((d1 / "rl/rl.ckpt").string()) == slurp((d2 / "rl/rl.ckpt").string()));

    ModelParams p = load_checkpoint((d1 / "rl/rl.ckpt").string());
    save_checkpoint(p, (d1 / "again.ckpt").string());
    CHECK(slurp((d1 / "rl/rl.ckpt").string()) == slurp((d1 / "again.ckpt").string()));

    std::ostringstream s1, s2;
    run_sample(cfg, (d1 / "pretrain.ckpt").string(), 0, 5, s1);
    run_sample(cfg, (d1 / "pretrain.ckpt").string(), 0, 5, s2);
    CHECK(s1.str() == s2.str());
    CHECK(!s1.str().empty());

    // different seed changes the streams
    Config other = Config::from_text(std::string(kTinyCfg) + "seed=99\n");
    std::ostringstream s3;
    run_sample(other, (d1 / "pretrain.ckpt").string(), 0, 5, s3);
    CHECK(s1.str() != s3.str());
}

TEST_CASE("rl rejects checkpoints with a different architecture") {
    fs::path dir = fresh_dir("mismatch");
    Config cfg = Config::from_text(kTinyCfg);
    run_pretrain(cfg, dir.string());
    Config wider = Config::from_text(std::string(kTinyCfg) + "hidden_dim=12\n");
    CHECK_THROWS_AS(run_rl(wider, (dir / "pretrain.ckpt").string(), (dir / "rl").string()),
                    CheckpointMismatch);
}

TEST_CASE("sample and eval output shapes") {
    fs::path dir = fresh_dir("sampleout");
    Config cfg = Config::from_text(kTinyCfg);
    run_pretrain(cfg, dir.string());

    std::ostringstream out;
    run_sample(cfg, (dir / "pretrain.ckpt").string(), 1, 3, out);
    std::istringstream lines(out.str());
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "sample,reward,tokens");
    int data = 0;
    bool saw_mean = false;
    while (std::getline(lines, line)) {
        if (line.rfind("mean_reward,", 0) == 0)
            saw_mean = true;
        else
            ++data;
    }
    CHECK(data == 3);
    CHECK(saw_mean);

    std::ostringstream none;
    run_sample(cfg, (dir / "pretrain.ckpt").string(), 0, 0, none);
    CHECK(none.str() == "sample,reward,tokens\n");

    CHECK_THROWS_AS(run_sample(cfg, (dir / "pretrain.ckpt").string(), 5, 1, out), ConfigError);

    std::ostringstream ev;
    run_eval(cfg, (dir / "pretrain.ckpt").string(), ev);
    CHECK(ev.str().rfind("ce,", 0) == 0);
    CHECK(ev.str().find("\nreward_mean,") != std::string::npos);
}

TEST_CASE("probe command writes the csv") {
    fs::path dir = fresh_dir("probeout");
    Config cfg = Config::from_text(kTinyCfg);
    run_pretrain(cfg, dir.string());
    run_probe(cfg, (dir / "pretrain.ckpt").string(), (dir / "probe").string());
    std::string csv = slurp((dir / "probe/probe.csv").string());
    CHECK(csv.rfind("knot,t,entropy_backward,", 0) == 0);
}

TEST_CASE("cli exit codes") {
    fs::path dir = fresh_dir("cli");
    std::string cfg_path = (dir / "tiny.cfg").string();
    spit(cfg_path, kTinyCfg);

    CHECK(run_cli("pretrain --config " + cfg_path + " --out " + (dir / "out").string()) == 0);
    CHECK(fs::exists(dir / "out/pretrain.ckpt"));

    CHECK(run_cli("sample --config " + cfg_path + " --checkpoint " +
                  (dir / "out/pretrain.ckpt").string() + " --prompt 0 -n 2") == 0);

    // unknown config key
    std::string bad_cfg = (dir / "bad.cfg").string();
    spit(bad_cfg, "bogus_key=1\n");
    CHECK(run_cli("pretrain --config " + bad_cfg + " --out " + (dir / "out2").string()) == 2);

    // architecture mismatch
    std::string wide_cfg = (dir / "wide.cfg").string();
    spit(wide_cfg, std::string(kTinyCfg) + "hidden_dim=12\n");
    CHECK(run_cli("rl --config " + wide_cfg + " --checkpoint " +
                  (dir / "out/pretrain.ckpt").string() + " --out " + (dir / "rl").string()) == 3);

    // missing checkpoint file is a config-level failure
    CHECK(run_cli("eval --config " + cfg_path + " --checkpoint " +
                  (dir / "missing.ckpt").string()) == 2);
}
