#include "udm/task.hpp"

#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

namespace udm {

RewardKind parse_reward_kind(const std::string& s) {
    if (s == "token_match") return RewardKind::TokenMatch;
    if (s == "count_match") return RewardKind::CountMatch;
    if (s == "bigram_pattern") return RewardKind::BigramPattern;
    throw DomainError("unknown reward kind: " + s);
}

std::string reward_kind_name(RewardKind k) {
    switch (k) {
        case RewardKind::TokenMatch: return "token_match";
        case RewardKind::CountMatch: return "count_match";
        case RewardKind::BigramPattern: return "bigram_pattern";
    }
    return "token_match";
}

SyntheticTask SyntheticTask::defaults(int vocab_size, int seq_len, int num_prompts) {
    SyntheticTask t;
    t.space.vocab_size = vocab_size;
    t.space.seq_len = seq_len;
    t.prompts.resize(size_t(num_prompts));
    for (int p = 0; p < num_prompts; ++p) {
        // spread targets over the vocabulary so prompt marginals differ
        t.prompts[size_t(p)].target_token = (p * vocab_size) / num_prompts % vocab_size;
        t.prompts[size_t(p)].target_count = (3 * seq_len) / 4;
        t.prompts[size_t(p)].bigram_second = (t.prompts[size_t(p)].target_token + 1) % vocab_size;
    }
    t.validate();
    return t;
}

void SyntheticTask::validate() const {
    space.validate();
    if (prompts.empty()) throw DomainError("SyntheticTask: no prompts");
    if (mix_prob < 0.0 || mix_prob > 1.0) throw DomainError("SyntheticTask: mix_prob outside [0,1]");
    for (const PromptSpec& p : prompts) {
        if (p.target_token < 0 || p.target_token >= space.vocab_size)
            throw DomainError("SyntheticTask: target token out of range");
        if (p.target_count < 0 || p.target_count > space.seq_len)
            throw DomainError("SyntheticTask: target count out of range");
        if (p.bigram_second < 0 || p.bigram_second >= space.vocab_size)
            throw DomainError("SyntheticTask: bigram token out of range");
    }
}

TokenSeq sample_clean(const SyntheticTask& task, int c, Rng& rng) {
    if (c < 0 || c >= task.num_prompts()) throw DomainError("sample_clean: bad prompt id");
    const PromptSpec& p = task.prompts[size_t(c)];
    const int K = task.space.vocab_size;
    TokenSeq x(size_t(task.space.seq_len));
    for (int l = 0; l < task.space.seq_len; ++l) {
        if (rng.next_double() < task.mix_prob) {
            x[size_t(l)] = p.target_token;
        } else {
            int tok = rng.next_int(K - 1);
            if (tok >= p.target_token) ++tok;  // uniform over the K-1 non-target tokens
            x[size_t(l)] = tok;
        }
    }
    return x;
}

double reward(const RewardSpec& spec, const SyntheticTask& task, const TokenSeq& x, int c) {
    if (c < 0 || c >= task.num_prompts()) throw DomainError("reward: bad prompt id");
    if (!task.space.contains(x)) throw DomainError("reward: sequence invalid for space");
    const PromptSpec& p = task.prompts[size_t(c)];
    const int D = task.space.seq_len;
    switch (spec.kind) {
        case RewardKind::TokenMatch: {
            int hits = 0;
            for (int tok : x) hits += (tok == p.target_token);
            return double(hits) / D;
        }
        case RewardKind::CountMatch: {
            int count = 0;
            for (int tok : x) count += (tok == p.target_token);
            double r = 1.0 - std::abs(count - p.target_count) / double(D);
            return r < 0.0 ? 0.0 : r;
        }
        case RewardKind::BigramPattern: {
            if (D < 2) return 0.0;
            int hits = 0;
            for (int l = 0; l + 1 < D; ++l)
                hits += (x[size_t(l)] == p.target_token && x[size_t(l + 1)] == p.bigram_second);
            return double(hits) / (D - 1);
        }
    }
    return 0.0;
}

std::string serialize_task(const SyntheticTask& task) {
    std::ostringstream out;
    out << "K=" << task.space.vocab_size << "\n";
    out << "D=" << task.space.seq_len << "\n";
    out << "P=" << task.num_prompts() << "\n";
    out << "mix_prob=" << task.mix_prob << "\n";
    for (int p = 0; p < task.num_prompts(); ++p) {
        out << "target_" << p << "=" << task.prompts[size_t(p)].target_token << "\n";
        out << "count_" << p << "=" << task.prompts[size_t(p)].target_count << "\n";
        out << "bigram_" << p << "=" << task.prompts[size_t(p)].bigram_second << "\n";
    }
    return out.str();
}

SyntheticTask parse_task(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string val = line.substr(eq + 1);
        auto strip = [](std::string& s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            s = (a == std::string::npos) ? "" : s.substr(a, b - a + 1);
        };
        strip(key);
        strip(val);
        if (!key.empty()) kv[key] = val;
    }
    auto need = [&](const std::string& k) -> std::string {
        auto it = kv.find(k);
        if (it == kv.end()) throw DomainError("task file: missing key " + k);
        return it->second;
    };
    SyntheticTask t;
    t.space.vocab_size = std::atoi(need("K").c_str());
    t.space.seq_len = std::atoi(need("D").c_str());
    int P = std::atoi(need("P").c_str());
    t.mix_prob = kv.count("mix_prob") ? std::atof(kv["mix_prob"].c_str()) : 0.6;
    t.prompts.resize(size_t(P));
    for (int p = 0; p < P; ++p) {
        t.prompts[size_t(p)].target_token = std::atoi(need("target_" + std::to_string(p)).c_str());
        t.prompts[size_t(p)].target_count = std::atoi(need("count_" + std::to_string(p)).c_str());
        t.prompts[size_t(p)].bigram_second = std::atoi(need("bigram_" + std::to_string(p)).c_str());
    }
    t.validate();
    return t;
}

}  // namespace udm
