#pragma once

#include "udm/rollout.hpp"
#include "udm/task.hpp"

namespace udm {

// Mean over positions of -sum_k p log p (natural log).
double field_entropy(const Field& field);

// Mean over positions of half the L1 distance between per-position empirical
// token histograms. In [0, 1].
double token_marginal_tv(const std::vector<TokenSeq>& samples_a,
                         const std::vector<TokenSeq>& samples_b, int vocab_size);

// Fixed seeded random linear map from the one-hot encoded D x K sequence to a
// low-dimensional feature vector.
struct FeatureMap {
    SpaceSpec space;
    Eigen::MatrixXd proj;  // out_dim x (D*K)

    static FeatureMap random(const SpaceSpec& space, int out_dim, uint64_t seed);
    Eigen::VectorXd apply(const TokenSeq& x) const;
};

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), matrix square roots
// via symmetric eigendecomposition with negative eigenvalues clamped at 0.
// Columns are features, rows are samples.
double frechet_from_features(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b);

double frechet_feature_distance(const std::vector<TokenSeq>& samples_a,
                                const std::vector<TokenSeq>& samples_b, const FeatureMap& fmap);

struct ProbeRow {
    int knot = 0;
    double t = 0.0;
    double entropy_backward = 0.0;
    double frechet_fwd = 0.0;  // forward-trajectory predictions vs pretrain predictions
    double frechet_bwd = 0.0;
    double tv_fwd = 0.0;
    double tv_bwd = 0.0;
    double frechet_self = 0.0;  // pretrain half vs half, sampling-noise baseline
};

struct ProbeConfig {
    int n_pairs = 512;
    int feature_dim = 8;
    uint64_t feature_seed = 7;
};

struct ProbeResult {
    std::vector<ProbeRow> rows;  // one per grid knot
    bool warned_untrained = false;
};

// Builds the three trajectory families for n_pairs (prompt, sample) pairs,
// draws a model prediction for every family state at every grid knot, and
// reports entropy plus the divergence of each family's prediction set against
// the pretraining family's.
ProbeResult trajectory_probe(const ModelParams& params, const SyntheticTask& task,
                             const TimeGrid& grid, const NoiseSchedule& sched,
                             const ProbeConfig& cfg, Rng& rng);

std::string probe_csv(const ProbeResult& result);

}  // namespace udm
