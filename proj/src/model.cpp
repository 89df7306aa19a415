#include "udm/model.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace udm {

namespace {

constexpr double kPi = 3.141592653589793;

using MapMat = Eigen::Map<Field>;
using MapConstMat = Eigen::Map<const Field>;
using MapVec = Eigen::Map<Eigen::RowVectorXd>;
using MapConstVec = Eigen::Map<const Eigen::RowVectorXd>;

// Offsets into the flat parameter vector.
struct Layout {
    int K, D, P, E, H;
    int64_t tok_emb, prompt_emb;
    int64_t w1[2], b1[2], w2[2], b2[2];
    int64_t head_w, head_b, total;

    explicit Layout(const Arch& a)
        : K(a.vocab_size), D(a.seq_len), P(a.num_prompts), E(a.emb_dim), H(a.hidden_dim) {
        int64_t off = 0;
        tok_emb = off;
        off += int64_t(K) * E;
        prompt_emb = off;
        off += int64_t(P + 1) * E;
        for (int b = 0; b < 2; ++b) {
            w1[b] = off;
            off += int64_t(H) * E;
            b1[b] = off;
            off += H;
            w2[b] = off;
            off += int64_t(E) * H;
            b2[b] = off;
            off += E;
        }
        head_w = off;
        off += int64_t(K) * E;
        head_b = off;
        off += K;
        total = off;
    }
};

Eigen::RowVectorXd time_features(double t, int e) {
    Eigen::RowVectorXd f(e);
    int half = e / 2;
    for (int j = 0; j < half; ++j) {
        double w = kPi * std::pow(10000.0, double(j) / half);
        f(2 * j) = std::sin(t * w);
        f(2 * j + 1) = std::cos(t * w);
    }
    if (e % 2 == 1) f(e - 1) = t;
    return f;
}

std::atomic<int64_t> g_eval_count{0};

struct Workspace {
    Field U0, R0, U1, R1, h2, logits;
};

void check_input(const Arch& a, const DenoiserInput& in) {
    if (static_cast<int>(in.x_t.size()) != a.seq_len)
        throw ShapeError("denoiser: input length does not match architecture");
    for (int tok : in.x_t)
        if (tok < 0 || tok >= a.vocab_size) throw ShapeError("denoiser: token id out of range");
    if (in.t < 0.0 || in.t > 1.0) throw DomainError("denoiser: t outside [0,1]");
    if (in.cond != kUncond && (in.cond < 0 || in.cond >= a.num_prompts))
        throw ShapeError("denoiser: prompt id out of range");
}

void run_forward(const ModelParams& params, const DenoiserInput& in, Workspace& ws) {
    const Layout L(params.arch);
    check_input(params.arch, in);
    const double* v = params.values.data();
    MapConstMat tok_emb(v + L.tok_emb, L.K, L.E);
    MapConstMat prompt_emb(v + L.prompt_emb, L.P + 1, L.E);
    MapConstMat head_w(v + L.head_w, L.K, L.E);
    MapConstVec head_b(v + L.head_b, L.K);

    int prow = (in.cond == kUncond) ? L.P : in.cond;
    Eigen::RowVectorXd tf = time_features(in.t, L.E);

    Field h(L.D, L.E);
    for (int l = 0; l < L.D; ++l) h.row(l) = tok_emb.row(in.x_t[size_t(l)]) + prompt_emb.row(prow) + tf;

    Field* Us[2] = {&ws.U0, &ws.U1};
    Field* Rs[2] = {&ws.R0, &ws.R1};
    for (int b = 0; b < 2; ++b) {
        MapConstMat w1(v + L.w1[b], L.H, L.E);
        MapConstVec bias1(v + L.b1[b], L.H);
        MapConstMat w2(v + L.w2[b], L.E, L.H);
        MapConstVec bias2(v + L.b2[b], L.E);
        Eigen::RowVectorXd ctx = h.colwise().mean();
        Field& U = *Us[b];
        U = h;
        U.rowwise() += ctx;
        Field& R = *Rs[b];
        R = ((U * w1.transpose()).rowwise() + bias1).array().tanh();
        h += (R * w2.transpose()).rowwise() + bias2;
    }
    ws.h2 = h;
    ws.logits = (h * head_w.transpose()).rowwise() + head_b;
    g_eval_count.fetch_add(1, std::memory_order_relaxed);
}

// Accumulates d(loss)/d(params) for a given d(loss)/d(logits) into grad.
void run_backward(const ModelParams& params, const DenoiserInput& in, const Workspace& ws,
                  const Field& dlogits, std::vector<double>& grad) {
    const Layout L(params.arch);
    const double* v = params.values.data();
    double* g = grad.data();
    MapConstMat head_w(v + L.head_w, L.K, L.E);
    MapMat d_head_w(g + L.head_w, L.K, L.E);
    MapVec d_head_b(g + L.head_b, L.K);

    d_head_w += dlogits.transpose() * ws.h2;
    d_head_b += dlogits.colwise().sum();
    Field dh = dlogits * head_w;

    const Field* Us[2] = {&ws.U0, &ws.U1};
    const Field* Rs[2] = {&ws.R0, &ws.R1};
    for (int b = 1; b >= 0; --b) {
        MapConstMat w1(v + L.w1[b], L.H, L.E);
        MapConstMat w2(v + L.w2[b], L.E, L.H);
        MapMat dw1(g + L.w1[b], L.H, L.E);
        MapVec db1(g + L.b1[b], L.H);
        MapMat dw2(g + L.w2[b], L.E, L.H);
        MapVec db2(g + L.b2[b], L.E);
        const Field& U = *Us[b];
        const Field& R = *Rs[b];

        // h_out = h_in + W2 tanh(W1 U + b1) + b2, U = h_in + mean(h_in)
        dw2 += dh.transpose() * R;
        db2 += dh.colwise().sum();
        Field dA = (dh * w2).array() * (1.0 - R.array().square());
        dw1 += dA.transpose() * U;
        db1 += dA.colwise().sum();
        Field dU = dA * w1;
        Eigen::RowVectorXd dctx = dU.colwise().sum() / double(L.D);
        dh += dU;
        dh.rowwise() += dctx;
    }

    MapMat d_tok(g + L.tok_emb, L.K, L.E);
    MapMat d_prompt(g + L.prompt_emb, L.P + 1, L.E);
    int prow = (in.cond == kUncond) ? L.P : in.cond;
    for (int l = 0; l < L.D; ++l) d_tok.row(in.x_t[size_t(l)]) += dh.row(l);
    d_prompt.row(prow) += dh.colwise().sum();
}

double row_logsumexp(const Field& logits, int l) {
    double m = logits.row(l).maxCoeff();
    double z = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) z += std::exp(logits(l, k) - m);
    return m + std::log(z);
}

}  // namespace

int64_t Arch::param_count() const { return Layout(*this).total; }

ModelParams ModelParams::init(const Arch& arch, Rng& rng) {
    ModelParams p;
    p.arch = arch;
    p.values.resize(size_t(arch.param_count()));
    for (double& w : p.values) w = 0.1 * rng.next_double() - 0.05;
    return p;
}

void ModelParams::validate() const {
    if (values.size() != size_t(arch.param_count()))
        throw ShapeError("ModelParams: value count does not match architecture");
    for (double w : values)
        if (!std::isfinite(w)) throw NumericError("ModelParams: non-finite parameter");
}

Field forward_logits(const ModelParams& params, const DenoiserInput& input) {
    Workspace ws;
    run_forward(params, input, ws);
    return ws.logits;
}

Field policy_field(const ModelParams& params, const DenoiserInput& input, const CfgSpec& cfg) {
    if (!cfg.enabled || input.cond == kUncond) return softmax_rows(forward_logits(params, input));
    Field cond = forward_logits(params, input);
    DenoiserInput un = input;
    un.cond = kUncond;
    Field uncond = forward_logits(params, un);
    return softmax_rows(uncond + cfg.scale * (cond - uncond));
}

int64_t denoiser_eval_count() { return g_eval_count.load(std::memory_order_relaxed); }
void reset_denoiser_eval_count() { g_eval_count.store(0, std::memory_order_relaxed); }

double ce_loss_and_grad(const ModelParams& params, const std::vector<CeItem>& batch,
                        std::vector<double>& grad) {
    if (batch.empty()) throw DomainError("ce_loss_and_grad: empty batch");
    grad.assign(params.values.size(), 0.0);
    double loss = 0.0;
    double inv_n = 1.0 / double(batch.size());
    Workspace ws;
    for (size_t i = 0; i < batch.size(); ++i) {
        const CeItem& item = batch[i];
        if (item.weight == 0.0) continue;
        run_forward(params, item.input, ws);
        Field p = softmax_rows(ws.logits);
        Field dlogits = p;
        double item_loss = 0.0;
        for (Eigen::Index l = 0; l < p.rows(); ++l) {
            int tok = item.target[size_t(l)];
            item_loss += row_logsumexp(ws.logits, l) - ws.logits(l, tok);
            dlogits(l, tok) -= 1.0;
        }
        if (!std::isfinite(item_loss))
            throw NumericError("ce_loss_and_grad: non-finite loss at batch index " + std::to_string(i));
        loss += inv_n * item.weight * item_loss;
        dlogits *= inv_n * item.weight;
        run_backward(params, item.input, ws, dlogits, grad);
    }
    return loss;
}

GrpoLossStats grpo_loss_and_grad(const ModelParams& params, const std::vector<GrpoItem>& batch,
                                 double clip_eps, double kl_weight, const CfgSpec& cfg,
                                 std::vector<double>& grad) {
    if (batch.empty()) throw DomainError("grpo_loss_and_grad: empty batch");
    if (clip_eps <= 0.0 || clip_eps >= 1.0) throw DomainError("grpo_loss_and_grad: clip_eps outside (0,1)");
    grad.assign(params.values.size(), 0.0);
    GrpoLossStats stats;
    double inv_n = 1.0 / double(batch.size());
    Workspace ws_c, ws_u;
    for (size_t i = 0; i < batch.size(); ++i) {
        const GrpoItem& item = batch[i];
        if (!std::isfinite(item.old_logprob))
            throw NumericError("grpo_loss_and_grad: non-finite old log-prob at batch index " + std::to_string(i));
        bool guided = cfg.enabled && item.input.cond != kUncond;
        run_forward(params, item.input, ws_c);
        Field logits = ws_c.logits;
        if (guided) {
            DenoiserInput un = item.input;
            un.cond = kUncond;
            run_forward(params, un, ws_u);
            logits = ws_u.logits + cfg.scale * (ws_c.logits - ws_u.logits);
        }
        Field p = softmax_rows(logits);
        const int D = int(p.rows());

        // policy log-prob of the action under the (possibly guided) field
        double logp = 0.0;
        Field dlogp = -p;  // d logp / d logits, filled below
        for (int l = 0; l < D; ++l) {
            int tok = item.action[size_t(l)];
            logp += logits(l, tok) - row_logsumexp(logits, l);
            dlogp(l, tok) += 1.0;
        }
        double ratio = std::exp(logp - item.old_logprob);
        double lo = 1.0 - clip_eps, hi = 1.0 + clip_eps;
        double clipped_ratio = std::min(std::max(ratio, lo), hi);
        double surr = ratio * item.advantage;
        double surr_clip = clipped_ratio * item.advantage;
        bool clip_active = surr_clip < surr;  // min() selects the clipped branch
        double objective = clip_active ? surr_clip : surr;

        // exact KL(p || ref) averaged over positions, plus its logit gradient
        double kl = 0.0;
        Field dkl(D, p.cols());
        for (int l = 0; l < D; ++l) {
            double s = 0.0;
            for (Eigen::Index k = 0; k < p.cols(); ++k) {
                double q = item.ref_probs(l, k);
                double c = std::log(std::max(p(l, k), kProbFloor)) - std::log(std::max(q, kProbFloor));
                dkl(l, k) = c;  // temporarily store c
                s += p(l, k) * c;
            }
            kl += s;
            for (Eigen::Index k = 0; k < p.cols(); ++k) dkl(l, k) = p(l, k) * (dkl(l, k) - s) / D;
        }
        kl /= D;

        double item_loss = -objective + kl_weight * kl;
        if (!std::isfinite(item_loss))
            throw NumericError("grpo_loss_and_grad: non-finite loss at batch index " + std::to_string(i));
        stats.loss += inv_n * item_loss;
        stats.ratio_mean += inv_n * ratio;
        stats.clip_frac += clip_active ? inv_n : 0.0;
        stats.kl_mean += inv_n * kl;

        Field dlogits = kl_weight * dkl;
        if (!clip_active) dlogits -= (ratio * item.advantage) * dlogp;
        dlogits *= inv_n;
        if (guided) {
            Field dcond = cfg.scale * dlogits;
            run_backward(params, item.input, ws_c, dcond, grad);
            if (cfg.backprop_guided) {
                DenoiserInput un = item.input;
                un.cond = kUncond;
                Field duncond = (1.0 - cfg.scale) * dlogits;
                run_backward(params, un, ws_u, duncond, grad);
            }
        } else {
            run_backward(params, item.input, ws_c, dlogits, grad);
        }
    }
    return stats;
}

AdamState AdamState::zero(int64_t n) {
    AdamState s;
    s.m.assign(size_t(n), 0.0);
    s.v.assign(size_t(n), 0.0);
    return s;
}

void adamw_step(ModelParams& params, const std::vector<double>& grad, AdamState& state,
                const AdamConfig& cfg) {
    if (grad.size() != params.values.size() || state.m.size() != params.values.size())
        throw ShapeError("adamw_step: shape mismatch");
    for (double g : grad)
        if (!std::isfinite(g)) throw NumericError("adamw_step: non-finite gradient");
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
    for (size_t i = 0; i < params.values.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params.values[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * params.values[i]);
    }
}

double grad_norm(const std::vector<double>& grad) {
    double s = 0.0;
    for (double g : grad) s += g * g;
    return std::sqrt(s);
}

namespace {
constexpr char kMagic[4] = {'U', 'D', 'M', 'G'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ofstream& f, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xff;
    f.write(reinterpret_cast<char*>(b), 4);
}
uint32_t get_u32(std::ifstream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
    return v;
}
void put_u64(std::ofstream& f, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
    f.write(reinterpret_cast<char*>(b), 8);
}
uint64_t get_u64(std::ifstream& f) {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
}
}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    params.validate();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DomainError("save_checkpoint: cannot open " + path);
    f.write(kMagic, 4);
    put_u32(f, kVersion);
    put_u32(f, uint32_t(params.arch.vocab_size));
    put_u32(f, uint32_t(params.arch.seq_len));
    put_u32(f, uint32_t(params.arch.num_prompts));
    put_u32(f, uint32_t(params.arch.emb_dim));
    put_u32(f, uint32_t(params.arch.hidden_dim));
    put_u64(f, params.values.size());
    for (double w : params.values) {
        uint64_t bits;
        std::memcpy(&bits, &w, 8);
        put_u64(f, bits);
    }
    if (!f) throw DomainError("save_checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DomainError("load_checkpoint: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw DomainError("load_checkpoint: bad magic in " + path);
    uint32_t version = get_u32(f);
    if (version != kVersion) throw DomainError("load_checkpoint: unsupported version");
    ModelParams p;
    p.arch.vocab_size = int(get_u32(f));
    p.arch.seq_len = int(get_u32(f));
    p.arch.num_prompts = int(get_u32(f));
    p.arch.emb_dim = int(get_u32(f));
    p.arch.hidden_dim = int(get_u32(f));
    uint64_t n = get_u64(f);
    if (!f || n != uint64_t(p.arch.param_count()))
        throw DomainError("load_checkpoint: parameter count does not match architecture");
    p.values.resize(size_t(n));
    for (uint64_t i = 0; i < n; ++i) {
        uint64_t bits = get_u64(f);
        std::memcpy(&p.values[size_t(i)], &bits, 8);
    }
    if (!f) throw DomainError("load_checkpoint: truncated file " + path);
    return p;
}

}  // namespace udm
