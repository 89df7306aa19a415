#pragma once

#include <string>
#include <vector>

#include "udm/core.hpp"

namespace udm {

enum class RewardKind { TokenMatch, CountMatch, BigramPattern };

RewardKind parse_reward_kind(const std::string& s);
std::string reward_kind_name(RewardKind k);

struct PromptSpec {
    int target_token = 0;
    int target_count = 0;   // for count_match
    int bigram_second = 0;  // bigram is (target_token, bigram_second)
};

// Prompt-conditioned synthetic data distribution: each position is the
// prompt's target token with probability mix_prob, otherwise uniform over the
// remaining K-1 tokens.
struct SyntheticTask {
    SpaceSpec space;
    std::vector<PromptSpec> prompts;
    double mix_prob = 0.6;

    static SyntheticTask defaults(int vocab_size = 16, int seq_len = 24, int num_prompts = 4);
    int num_prompts() const { return static_cast<int>(prompts.size()); }
    void validate() const;
};

TokenSeq sample_clean(const SyntheticTask& task, int c, Rng& rng);

struct RewardSpec {
    RewardKind kind = RewardKind::TokenMatch;
};

// Terminal reward r(x, c) in [0, 1]; pure function of (x, c).
double reward(const RewardSpec& spec, const SyntheticTask& task, const TokenSeq& x, int c);

// Plain-text key=value task description, round-trippable.
std::string serialize_task(const SyntheticTask& task);
SyntheticTask parse_task(const std::string& text);

}  // namespace udm
