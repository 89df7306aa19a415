#include <CLI11.hpp>
#include <iostream>

#include "udm/harness.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    std::string checkpoint;
    long seed = -1;
    int workers = 1;
};

udm::Config load_config(const CommonOpts& opts) {
    udm::Config cfg = opts.config_path.empty() ? udm::Config::from_text("")
                                               : udm::Config::from_file(opts.config_path);
    if (opts.seed >= 0) cfg.set("seed", std::to_string(opts.seed));
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_checkpoint) {
    cmd->add_option("--config", opts.config_path, "config file (key=value)");
    cmd->add_option("--seed", opts.seed, "master seed (overrides config)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--workers", opts.workers, "worker count (1 = sequential)");
    auto* ck = cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint path");
    if (needs_checkpoint) ck->required();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uniform discrete diffusion + GRPO lab"};
    app.require_subcommand(1);

    CommonOpts opts;
    int prompt = 0;
    int n_samples = 8;
    int cfg_flag = -1;  // -1 = use config
    double cfg_scale = -1.0;

    CLI::App* pre = app.add_subcommand("pretrain", "cross-entropy pretraining");
    add_common(pre, opts, false);
    CLI::App* rl = app.add_subcommand("rl", "GRPO fine-tuning from a checkpoint");
    add_common(rl, opts, true);
    CLI::App* sample = app.add_subcommand("sample", "generate rollouts and print rewards");
    add_common(sample, opts, true);
    sample->add_option("--prompt", prompt, "prompt id");
    sample->add_option("-n,--num", n_samples, "number of rollouts");
    sample->add_option("--cfg", cfg_flag, "override cfg_enabled (0/1)");
    sample->add_option("--cfg-scale", cfg_scale, "override cfg_scale");
    CLI::App* probe = app.add_subcommand("probe", "trajectory divergence probe");
    add_common(probe, opts, true);
    CLI::App* eval = app.add_subcommand("eval", "held-out CE and mean reward");
    add_common(eval, opts, true);

    CLI11_PARSE(app, argc, argv);

    try {
        udm::Config cfg = load_config(opts);
        if (cfg_flag >= 0) cfg.set("cfg_enabled", std::to_string(cfg_flag));
        if (cfg_scale >= 0.0) cfg.set("cfg_scale", std::to_string(cfg_scale));
        if (pre->parsed()) udm::run_pretrain(cfg, opts.out_dir);
        if (rl->parsed()) udm::run_rl(cfg, opts.checkpoint, opts.out_dir);
        if (sample->parsed()) udm::run_sample(cfg, opts.checkpoint, prompt, n_samples, std::cout);
        if (probe->parsed()) udm::run_probe(cfg, opts.checkpoint, opts.out_dir);
        if (eval->parsed()) udm::run_eval(cfg, opts.checkpoint, std::cout);
    } catch (const udm::CheckpointMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return udm::kExitCheckpointMismatch;
    } catch (const udm::NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return udm::kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return udm::kExitConfig;
    }
    return udm::kExitOk;
}
