#include "udm/core.hpp"

#include <cmath>
#include <limits>

namespace udm {

void SpaceSpec::validate() const {
    if (vocab_size < 2) throw DomainError("SpaceSpec: vocab_size must be >= 2");
    if (seq_len < 1) throw DomainError("SpaceSpec: seq_len must be >= 1");
}

bool SpaceSpec::contains(const TokenSeq& x) const {
    if (static_cast<int>(x.size()) != seq_len) return false;
    for (int tok : x)
        if (tok < 0 || tok >= vocab_size) return false;
    return true;
}

double NoiseSchedule::kappa(double t) const {
    switch (kind) {
        case ScheduleKind::Linear: return t;
        case ScheduleKind::Cosine: return 1.0 - std::cos(1.5707963267948966 * t);
    }
    return t;
}

double NoiseSchedule::kappa_dot(double t) const {
    switch (kind) {
        case ScheduleKind::Linear: return 1.0;
        case ScheduleKind::Cosine: return 1.5707963267948966 * std::sin(1.5707963267948966 * t);
    }
    return 1.0;
}

TimeGrid TimeGrid::uniform(int num_steps) {
    if (num_steps < 1) throw DomainError("TimeGrid: num_steps must be >= 1");
    TimeGrid g;
    g.knots.resize(num_steps + 1);
    for (int j = 0; j <= num_steps; ++j) g.knots[j] = static_cast<double>(j) / num_steps;
    g.knots.back() = 1.0;
    return g;
}

void TimeGrid::validate() const {
    if (knots.size() < 2) throw DomainError("TimeGrid: need at least two knots");
    if (knots.front() != 0.0 || knots.back() != 1.0)
        throw DomainError("TimeGrid: knots must span [0, 1]");
    for (size_t j = 1; j < knots.size(); ++j)
        if (knots[j] <= knots[j - 1]) throw DomainError("TimeGrid: knots must be strictly increasing");
}

double forward_marginal_prob(int x1_tok, int x_tok, double t, const NoiseSchedule& sched,
                             const SpaceSpec& space) {
    if (t < 0.0 || t > 1.0) throw DomainError("forward_marginal_prob: t outside [0,1]");
    if (x1_tok < 0 || x1_tok >= space.vocab_size || x_tok < 0 || x_tok >= space.vocab_size)
        throw DomainError("forward_marginal_prob: token id out of range");
    double k = sched.kappa(t);
    double p = (1.0 - k) / space.vocab_size;
    if (x_tok == x1_tok) p += k;
    return p;
}

TokenSeq forward_corrupt(const TokenSeq& x1, double t, const NoiseSchedule& sched,
                         const SpaceSpec& space, Rng& rng) {
    if (t < 0.0 || t > 1.0) throw DomainError("forward_corrupt: t outside [0,1]");
    if (!space.contains(x1)) throw DomainError("forward_corrupt: x1 invalid for space");
    double k = sched.kappa(t);
    TokenSeq out(x1.size());
    for (size_t l = 0; l < x1.size(); ++l) {
        if (rng.next_double() < k)
            out[l] = x1[l];
        else
            out[l] = rng.next_int(space.vocab_size);
    }
    return out;
}

double jump_probability(double t, double dt, const NoiseSchedule& sched) {
    if (t < 0.0 || t >= 1.0) {
        if (t == 1.0 && dt == 0.0) return 0.0;
        if (t >= 1.0) throw DomainError("jump_probability: degenerate time t >= 1");
        throw DomainError("jump_probability: t outside [0,1)");
    }
    if (dt < 0.0 || t + dt > 1.0 + 1e-12) throw DomainError("jump_probability: bad step size");
    if (dt == 0.0) return 0.0;
    double denom = 1.0 - sched.kappa(t);
    if (denom <= 0.0) return 1.0;
    double lam = dt * sched.kappa_dot(t) / denom;
    if (lam < 0.0) lam = 0.0;
    if (lam > 1.0) lam = 1.0;
    return lam;
}

TokenSeq euler_step(const TokenSeq& x_t, const TokenSeq& x1_pred, double t, double dt,
                    const NoiseSchedule& sched, Rng& rng) {
    if (x_t.size() != x1_pred.size()) throw ShapeError("euler_step: sequence length mismatch");
    double lam = jump_probability(t, dt, sched);
    TokenSeq out(x_t);
    for (size_t l = 0; l < x_t.size(); ++l) {
        if (x_t[l] != x1_pred[l] && rng.next_double() < lam) out[l] = x1_pred[l];
    }
    return out;
}

double sequence_log_prob(const Field& field, const TokenSeq& target) {
    if (field.rows() != static_cast<Eigen::Index>(target.size()))
        throw ShapeError("sequence_log_prob: field/target length mismatch");
    double acc = 0.0;
    for (Eigen::Index l = 0; l < field.rows(); ++l) {
        int tok = target[static_cast<size_t>(l)];
        if (tok < 0 || tok >= field.cols()) throw DomainError("sequence_log_prob: token out of range");
        double p = field(l, tok);
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        acc += std::log(p < kProbFloor ? kProbFloor : p);
    }
    return acc;
}

Field softmax_rows(const Field& logits) {
    Field out(logits.rows(), logits.cols());
    for (Eigen::Index l = 0; l < logits.rows(); ++l) {
        double m = logits.row(l).maxCoeff();
        double z = 0.0;
        for (Eigen::Index k = 0; k < logits.cols(); ++k) {
            out(l, k) = std::exp(logits(l, k) - m);
            z += out(l, k);
        }
        out.row(l) /= z;
    }
    return out;
}

TokenSeq sample_field(const Field& field, Rng& rng) {
    TokenSeq out(static_cast<size_t>(field.rows()));
    for (Eigen::Index l = 0; l < field.rows(); ++l) {
        double u = rng.next_double();
        double acc = 0.0;
        int pick = static_cast<int>(field.cols()) - 1;
        for (Eigen::Index k = 0; k < field.cols(); ++k) {
            acc += field(l, k);
            if (u < acc) {
                pick = static_cast<int>(k);
                break;
            }
        }
        out[static_cast<size_t>(l)] = pick;
    }
    return out;
}

}  // namespace udm
