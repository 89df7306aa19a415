#include <doctest.h>

#include <cmath>
#include <sstream>

#include "udm/analysis.hpp"

using namespace udm;

TEST_CASE("field entropy closed forms") {
    Field uniform = Field::Constant(6, 4, 0.25);
    CHECK(field_entropy(uniform) == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    Field point = Field::Zero(3, 5);
    point.col(2).setOnes();
    CHECK(field_entropy(point) == doctest::Approx(0.0).epsilon(1e-9));

    Field mixed(1, 2);
    mixed << 0.75, 0.25;
    double expect = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    CHECK(expect == doctest::Approx(0.562335).epsilon(1e-5));
    CHECK(field_entropy(mixed) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("token marginal TV") {
    std::vector<TokenSeq> a = {{0, 0}, {1, 1}};
    CHECK(token_marginal_tv(a, a, 3) == doctest::Approx(0.0));

    std::vector<TokenSeq> b = {{2, 2}, {2, 2}};
    CHECK(token_marginal_tv(a, b, 3) == doctest::Approx(1.0));  // disjoint support

    // position 0: {0,1} vs {0,2} -> half L1 = 1/2; position 1 identical
    std::vector<TokenSeq> c = {{0, 0}, {2, 1}};
    CHECK(token_marginal_tv(a, c, 3) == doctest::Approx(0.25));
}

TEST_CASE("frechet distance in closed form") {
    Rng rng(1);
    Eigen::MatrixXd x(200, 3);
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) x(i, j) = rng.next_gauss();
    CHECK(frechet_from_features(x, x) == doctest::Approx(0.0).epsilon(1e-9));

    // 1-d: (mu_a - mu_b)^2 + (sigma_a - sigma_b)^2
    Eigen::MatrixXd a(4, 1), b(4, 1);
    a << 0.0, 1.0, 2.0, 3.0;
    b << 10.0, 12.0, 14.0, 16.0;
    double mu_a = 1.5, sd_a = std::sqrt(1.25);
    double mu_b = 13.0, sd_b = std::sqrt(5.0);
    double expect = (mu_a - mu_b) * (mu_a - mu_b) + (sd_a - sd_b) * (sd_a - sd_b);
    CHECK(frechet_from_features(a, b) == doctest::Approx(expect).epsilon(1e-9));

    // symmetry and mean-shift monotonicity
    Eigen::MatrixXd near = x, far = x;
    near.col(0).array() += 0.5;
    far.col(0).array() += 3.0;
    CHECK(frechet_from_features(x, far) == doctest::Approx(frechet_from_features(far, x)).epsilon(1e-9));
    CHECK(frechet_from_features(x, far) > frechet_from_features(x, near));
    CHECK(frechet_from_features(x, near) > 0.0);
}

TEST_CASE("feature map is deterministic and linear over one-hots") {
    SpaceSpec space{5, 7};
    FeatureMap f1 = FeatureMap::random(space, 8, 42);
    FeatureMap f2 = FeatureMap::random(space, 8, 42);
    FeatureMap f3 = FeatureMap::random(space, 8, 43);
    CHECK((f1.proj - f2.proj).cwiseAbs().maxCoeff() == 0.0);
    CHECK((f1.proj - f3.proj).cwiseAbs().maxCoeff() > 0.0);

    TokenSeq x = {0, 4, 2, 1, 3, 0, 2};
    Eigen::VectorXd v = f1.apply(x);
    CHECK(v.size() == 8);
    // apply() picks exactly one projection column per position
    Eigen::VectorXd manual = Eigen::VectorXd::Zero(8);
    for (int l = 0; l < space.seq_len; ++l)
        manual += f1.proj.col(l * space.vocab_size + x[size_t(l)]);
    CHECK((v - manual).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("probe over an untrained model: shapes, warning, csv layout") {
    Arch a;
    a.vocab_size = 4;
    a.seq_len = 6;
    a.num_prompts = 2;
    a.emb_dim = 8;
    a.hidden_dim = 10;
    Rng init(2);
    ModelParams params = ModelParams::init(a, init);
    SyntheticTask task = SyntheticTask::defaults(4, 6, 2);
    TimeGrid grid = TimeGrid::uniform(6);
    NoiseSchedule sched{ScheduleKind::Linear};
    ProbeConfig cfg;
    cfg.n_pairs = 32;
    Rng rng(3);
    ProbeResult res = trajectory_probe(params, task, grid, sched, cfg, rng);
    CHECK(res.rows.size() == size_t(grid.num_steps() + 1));
    CHECK(res.rows.front().t == doctest::Approx(0.0));
    CHECK(res.rows.back().t == doctest::Approx(1.0));
    for (const ProbeRow& r : res.rows) {
        CHECK(r.entropy_backward >= 0.0);
        CHECK(r.entropy_backward <= std::log(4.0) + 1e-9);
        CHECK(r.frechet_fwd >= -1e-9);
        CHECK(r.frechet_bwd >= -1e-9);
        CHECK(r.tv_fwd >= 0.0);
        CHECK(r.tv_fwd <= 1.0);
    }
    // fresh init predicts near-uniformly at every t, so the trainedness check fires
    CHECK(res.warned_untrained);

    std::string csv = probe_csv(res);
    std::istringstream in(csv);
    std::string line;
    CHECK(std::getline(in, line));
    CHECK(line == "knot,t,entropy_backward,frechet_fwd,frechet_bwd,tv_fwd,tv_bwd");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == grid.num_steps() + 1);

    ProbeConfig bad;
    bad.n_pairs = 1;
    CHECK_THROWS_AS(trajectory_probe(params, task, grid, sched, bad, rng), DomainError);
}
