#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "udm/rng.hpp"

namespace udm {

// Token ids over vocabulary [0, K); plays the roles of x_t, x_1, the
// intermediate prediction and the clean sample depending on the caller.
using TokenSeq = std::vector<int>;

// D x K row-stochastic table of per-position token probabilities.
using Field = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SpaceSpec {
    int vocab_size = 2;  // K
    int seq_len = 1;     // D

    void validate() const;
    bool contains(const TokenSeq& x) const;
};

enum class ScheduleKind { Linear, Cosine };

// Path parameter kappa: [0,1] -> [0,1], kappa(0)=0, kappa(1)=1, non-decreasing.
// t=0 is pure noise, t=1 is clean data.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Linear;

    double kappa(double t) const;
    double kappa_dot(double t) const;
};

// Uniform or custom knots t_0=0 < ... < t_T = 1.
struct TimeGrid {
    std::vector<double> knots;

    static TimeGrid uniform(int num_steps);
    int num_steps() const { return static_cast<int>(knots.size()) - 1; }
    double t(int j) const { return knots[j]; }
    double dt(int j) const { return knots[j + 1] - knots[j]; }
    void validate() const;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-token factor of the mixture path p_t(x|x1): kappa(t)*[x==x1] + (1-kappa(t))/K.
double forward_marginal_prob(int x1_tok, int x_tok, double t, const NoiseSchedule& sched,
                             const SpaceSpec& space);

// Draw x_t ~ p_t(.|x1): each position keeps x1 with probability kappa(t),
// otherwise resamples uniformly over [0, K).
TokenSeq forward_corrupt(const TokenSeq& x1, double t, const NoiseSchedule& sched,
                         const SpaceSpec& space, Rng& rng);

// Per-position jump rate of one Euler step: clamp(dt * kappa_dot / (1 - kappa), 0, 1).
// For linear kappa this is dt / (1 - t).
double jump_probability(double t, double dt, const NoiseSchedule& sched);

// Two-stage Euler update: positions disagreeing with x1_pred jump to it with
// probability jump_probability(t, dt); agreeing positions never move.
TokenSeq euler_step(const TokenSeq& x_t, const TokenSeq& x1_pred, double t, double dt,
                    const NoiseSchedule& sched, Rng& rng);

// Sum of log field[l][target[l]]. Probabilities are floored at 1e-12 before the
// log; an exact zero yields -infinity (never NaN).
double sequence_log_prob(const Field& field, const TokenSeq& target);

// Row-wise softmax of a logits table.
Field softmax_rows(const Field& logits);

// Sample one token per row of a normalized field.
TokenSeq sample_field(const Field& field, Rng& rng);

constexpr double kProbFloor = 1e-12;

}  // namespace udm
