#include "udm/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace udm {

double field_entropy(const Field& field) {
    double acc = 0.0;
    for (Eigen::Index l = 0; l < field.rows(); ++l)
        for (Eigen::Index k = 0; k < field.cols(); ++k) {
            double p = field(l, k);
            if (p > 0.0) acc -= p * std::log(p);
        }
    return acc / double(field.rows());
}

double token_marginal_tv(const std::vector<TokenSeq>& samples_a,
                         const std::vector<TokenSeq>& samples_b, int vocab_size) {
    if (samples_a.empty() || samples_b.empty())
        throw DomainError("token_marginal_tv: empty sample set");
    const size_t d = samples_a.front().size();
    if (samples_b.front().size() != d) throw ShapeError("token_marginal_tv: length mismatch");
    double acc = 0.0;
    std::vector<double> ha(static_cast<size_t>(vocab_size), 0.0);
    std::vector<double> hb(static_cast<size_t>(vocab_size), 0.0);
    for (size_t l = 0; l < d; ++l) {
        std::fill(ha.begin(), ha.end(), 0.0);
        std::fill(hb.begin(), hb.end(), 0.0);
        for (const TokenSeq& x : samples_a) ha[size_t(x[l])] += 1.0 / double(samples_a.size());
        for (const TokenSeq& x : samples_b) hb[size_t(x[l])] += 1.0 / double(samples_b.size());
        double l1 = 0.0;
        for (int k = 0; k < vocab_size; ++k) l1 += std::abs(ha[size_t(k)] - hb[size_t(k)]);
        acc += 0.5 * l1;
    }
    return acc / double(d);
}

FeatureMap FeatureMap::random(const SpaceSpec& space, int out_dim, uint64_t seed) {
    space.validate();
    if (out_dim < 1) throw DomainError("FeatureMap: out_dim must be >= 1");
    FeatureMap fm;
    fm.space = space;
    const int n = space.seq_len * space.vocab_size;
    fm.proj.resize(out_dim, n);
    Rng rng(seed);
    double scale = 1.0 / std::sqrt(double(space.seq_len));
    for (int i = 0; i < out_dim; ++i)
        for (int j = 0; j < n; ++j) fm.proj(i, j) = scale * rng.next_gauss();
    return fm;
}

Eigen::VectorXd FeatureMap::apply(const TokenSeq& x) const {
    if (!space.contains(x)) throw DomainError("FeatureMap: sequence invalid for space");
    // one-hot input: the product reduces to summing selected columns
    Eigen::VectorXd f = Eigen::VectorXd::Zero(proj.rows());
    for (int l = 0; l < space.seq_len; ++l)
        f += proj.col(l * space.vocab_size + x[size_t(l)]);
    return f;
}

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd lam = es.eigenvalues();
    for (Eigen::Index i = 0; i < lam.size(); ++i) lam(i) = lam(i) > 0.0 ? std::sqrt(lam(i)) : 0.0;
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

void moments(const Eigen::MatrixXd& feats, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    const Eigen::Index n = feats.rows();
    mu = feats.colwise().mean();
    Eigen::MatrixXd centered = feats.rowwise() - mu.transpose();
    cov = centered.transpose() * centered / double(n);
}

}  // namespace

double frechet_from_features(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b) {
    if (feats_a.rows() < 2 || feats_b.rows() < 2)
        throw DomainError("frechet_from_features: need at least 2 samples per set");
    if (feats_a.cols() != feats_b.cols())
        throw ShapeError("frechet_from_features: feature dimension mismatch");
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    moments(feats_a, mu_a, cov_a);
    moments(feats_b, mu_b, cov_b);
    // Tr((Sa Sb)^{1/2}) via the symmetric form sqrt(sqrt(Sa) Sb sqrt(Sa))
    Eigen::MatrixXd sa = psd_sqrt(cov_a);
    Eigen::MatrixXd cross = psd_sqrt(sa * cov_b * sa);
    double d = (mu_a - mu_b).squaredNorm() + (cov_a + cov_b).trace() - 2.0 * cross.trace();
    return d;
}

double frechet_feature_distance(const std::vector<TokenSeq>& samples_a,
                                const std::vector<TokenSeq>& samples_b, const FeatureMap& fmap) {
    if (samples_a.size() < 2 || samples_b.size() < 2)
        throw DomainError("frechet_feature_distance: need at least 2 samples per set");
    Eigen::MatrixXd fa(samples_a.size(), fmap.proj.rows());
    Eigen::MatrixXd fb(samples_b.size(), fmap.proj.rows());
    for (size_t i = 0; i < samples_a.size(); ++i) fa.row(Eigen::Index(i)) = fmap.apply(samples_a[i]);
    for (size_t i = 0; i < samples_b.size(); ++i) fb.row(Eigen::Index(i)) = fmap.apply(samples_b[i]);
    return frechet_from_features(fa, fb);
}

ProbeResult trajectory_probe(const ModelParams& params, const SyntheticTask& task,
                             const TimeGrid& grid, const NoiseSchedule& sched,
                             const ProbeConfig& cfg, Rng& rng) {
    task.validate();
    grid.validate();
    if (cfg.n_pairs < 2) throw DomainError("trajectory_probe: n_pairs must be >= 2");
    const int T = grid.num_steps();
    const SpaceSpec& space = task.space;
    FeatureMap fmap = FeatureMap::random(space, cfg.feature_dim, cfg.feature_seed);
    CfgSpec no_cfg;

    // predictions[family][knot][pair]
    const int kPretrain = 0, kBackward = 1, kForward = 2;
    std::vector<std::vector<std::vector<TokenSeq>>> preds(
        3, std::vector<std::vector<TokenSeq>>(size_t(T) + 1));
    std::vector<double> entropy_sum(size_t(T) + 1, 0.0);

    for (int i = 0; i < cfg.n_pairs; ++i) {
        Rng pair_rng = rng.child(uint64_t(i) + 1);
        int c = pair_rng.next_int(task.num_prompts());
        TokenSeq x1 = sample_clean(task, c, pair_rng);
        std::vector<TokenSeq> pre = build_pretrain_trajectory(x1, grid, sched, space, pair_rng);
        RolloutRecord rec = sample_rollout(params, c, grid, sched, no_cfg, pair_rng);
        for (int j = 0; j <= T; ++j) {
            double t = grid.t(j);
            TokenSeq fwd_state = reconstruct_forward_state(rec.clean, t, sched, space, pair_rng);
            const TokenSeq* states[3] = {&pre[size_t(j)], &rec.states[size_t(j)], &fwd_state};
            // common random numbers across families: the family comparison then
            // reflects field differences, not independent sampling noise
            Rng draw_rng = pair_rng.child(uint64_t(j) + 1);
            for (int fam = 0; fam < 3; ++fam) {
                Field f = policy_field(params, DenoiserInput{*states[fam], t, c}, no_cfg);
                if (fam == kBackward) entropy_sum[size_t(j)] += field_entropy(f);
                Rng fam_rng = draw_rng;
                preds[size_t(fam)][size_t(j)].push_back(sample_field(f, fam_rng));
            }
        }
    }

    ProbeResult result;
    result.rows.resize(size_t(T) + 1);
    for (int j = 0; j <= T; ++j) {
        ProbeRow& row = result.rows[size_t(j)];
        row.knot = j;
        row.t = grid.t(j);
        row.entropy_backward = entropy_sum[size_t(j)] / cfg.n_pairs;
        const auto& pre = preds[size_t(kPretrain)][size_t(j)];
        const auto& bwd = preds[size_t(kBackward)][size_t(j)];
        const auto& fwd = preds[size_t(kForward)][size_t(j)];
        row.frechet_fwd = frechet_feature_distance(fwd, pre, fmap);
        row.frechet_bwd = frechet_feature_distance(bwd, pre, fmap);
        row.tv_fwd = token_marginal_tv(fwd, pre, space.vocab_size);
        row.tv_bwd = token_marginal_tv(bwd, pre, space.vocab_size);
        std::vector<TokenSeq> half_a(pre.begin(), pre.begin() + pre.size() / 2);
        std::vector<TokenSeq> half_b(pre.begin() + pre.size() / 2, pre.end());
        row.frechet_self = frechet_feature_distance(half_a, half_b, fmap);
    }
    // near-uniform confidence at t=1 means the model has not been trained
    double lnk = std::log(double(space.vocab_size));
    result.warned_untrained = result.rows.back().entropy_backward > 0.95 * lnk;
    return result;
}

std::string probe_csv(const ProbeResult& result) {
    std::ostringstream out;
    out << "knot,t,entropy_backward,frechet_fwd,frechet_bwd,tv_fwd,tv_bwd\n";
    out.precision(17);
    for (const ProbeRow& r : result.rows)
        out << r.knot << "," << r.t << "," << r.entropy_backward << "," << r.frechet_fwd << ","
            << r.frechet_bwd << "," << r.tv_fwd << "," << r.tv_bwd << "\n";
    return out.str();
}

}  // namespace udm
