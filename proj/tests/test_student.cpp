#include <cmath>
#include <vector>

#include "doctest.h"

#include "cisr/errors.hpp"
#include "cisr/rng.hpp"
#include "cisr/sim.hpp"
#include "cisr/student.hpp"
#include "test_util.hpp"

using namespace cisr;

TEST_CASE("dual update matches the closed form") {
    // one constraint, B = 1/2: uniform start puts 1/4 on the multiplier and
    // 1/4 on the slack; a unit violation with eta = 1 gives B * e/(1 + e)
    const LagrangeState s0 = LagrangeState::uniform(1, 0.5);
    REQUIRE(s0.lambda.size() == 1);
    CHECK(s0.lambda[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(s0.slack() == doctest::Approx(0.25).epsilon(1e-15));

    const double e = std::exp(1.0);
    const LagrangeState up = dual_update_eg(s0, {1.0}, 1.0);
    CHECK(up.lambda[0] == doctest::Approx(0.5 * e / (1.0 + e)).epsilon(1e-12));

    const LagrangeState down = dual_update_eg(s0, {-1.0}, 1.0);
    CHECK(down.lambda[0] == doctest::Approx(0.5 / (1.0 + e)).epsilon(1e-12));

    // two constraints, B = 1: violated vs. neutral separates as e : 1
    const LagrangeState t0 = LagrangeState::uniform(2, 1.0);
    const LagrangeState t1 = dual_update_eg(t0, {1.0, 0.0}, 1.0);
    CHECK(t1.lambda[0] == doctest::Approx(e / (2.0 + e)).epsilon(1e-12));
    CHECK(t1.lambda[1] == doctest::Approx(1.0 / (2.0 + e)).epsilon(1e-12));
}

TEST_CASE("multipliers stay on the scaled simplex under random updates") {
    LagrangeState s = LagrangeState::uniform(3, 0.5);
    Rng rng(99);
    for (int i = 0; i < 10000; ++i) {
        std::vector<double> gaps(3);
        for (double& g : gaps) g = rng.next_double() * 4.0 - 2.0;
        s = dual_update_eg(s, gaps, 1.0);
        double sum = 0.0;
        for (double l : s.lambda) {
            CHECK(l >= 0.0);
            sum += l;
        }
        CHECK(sum <= 0.5 + 1e-12);
    }
}

TEST_CASE("constant gaps: average penalty approaches the best simplex vertex") {
    // under a constant gap vector the exponentiated-gradient average
    // converges to max(0, B * max_c g_c), the best vertex of the scaled
    // simplex including the slack corner
    const int T = 10000;
    {
        const std::vector<double> g = {0.7, -0.3};
        LagrangeState s = LagrangeState::uniform(2, 0.5);
        double avg = 0.0;
        for (int t = 0; t < T; ++t) {
            avg += s.lambda[0] * g[0] + s.lambda[1] * g[1];
            s = dual_update_eg(s, g, 1.0);
        }
        avg /= T;
        CHECK(avg == doctest::Approx(0.5 * 0.7).epsilon(0.02));
    }
    {
        const std::vector<double> g = {-0.5, -0.2};
        LagrangeState s = LagrangeState::uniform(2, 0.5);
        double avg = 0.0;
        for (int t = 0; t < T; ++t) {
            avg += s.lambda[0] * g[0] + s.lambda[1] * g[1];
            s = dual_update_eg(s, g, 1.0);
        }
        avg /= T;
        CHECK(std::abs(avg) <= 0.01);  // the slack corner wins
    }
}

TEST_CASE("persistent violation saturates the budget, persistent slack drains it") {
    LagrangeState hot = LagrangeState::uniform(1, 0.5);
    for (int i = 0; i < 200; ++i) hot = dual_update_eg(hot, {1.0}, 1.0);
    CHECK(hot.lambda[0] == doctest::Approx(0.5).epsilon(1e-6));
    // once the slack weight hits zero the mass is pinned at the bound
    CHECK(dual_update_eg(hot, {-1.0}, 1.0).lambda[0] == hot.lambda[0]);

    LagrangeState cold = LagrangeState::uniform(1, 0.5);
    for (int i = 0; i < 200; ++i) cold = dual_update_eg(cold, {-1.0}, 1.0);
    CHECK(cold.lambda[0] <= 1e-6);
}

TEST_CASE("dual update rejects corrupt inputs") {
    CHECK_THROWS_AS(LagrangeState::uniform(1, 0.0), DimensionMismatch);

    LagrangeState bad;
    bad.bound_B = 0.5;
    bad.lambda = {-0.1};
    CHECK_THROWS_AS(dual_update_eg(bad, {0.0}, 1.0), NegativeLambda);

    LagrangeState heavy;
    heavy.bound_B = 0.5;
    heavy.lambda = {0.4, 0.3};  // mass above the bound
    CHECK_THROWS_AS(dual_update_eg(heavy, {0.0, 0.0}, 1.0), NegativeLambda);

    const LagrangeState ok = LagrangeState::uniform(2, 0.5);
    CHECK_THROWS_AS(dual_update_eg(ok, {0.0}, 1.0), DimensionMismatch);
    CHECK_THROWS_AS(dual_update_eg(ok, {0.0, std::nan("")}, 1.0), DimensionMismatch);

    LagrangeState empty;
    empty.bound_B = 0.0;
    empty.lambda = {0.0};  // no multiplier mass and no slack
    CHECK_THROWS_AS(dual_update_eg(empty, {1.0}, 1.0), ZeroMassDegenerate);
}

TEST_CASE("training is bitwise deterministic for a fixed seed") {
    const TabularCMDP f = cisr_test::fork3(0.5);
    SolverConfig cfg;
    cfg.primal_steps_per_epoch = 200;
    TabularTrainEnv env_a(f), env_b(f);
    const TrainResult a = train_student(env_a, cfg, 2000, 123);
    const TrainResult b = train_student(env_b, cfg, 2000, 123);
    CHECK(a.state.logits == b.state.logits);
    CHECK(a.state.value_table == b.state.value_table);
    CHECK(a.duals.lambda == b.duals.lambda);
    CHECK(a.stats.training_failures == b.stats.training_failures);
}

TEST_CASE("the constraint steers the student away from the lucrative sink") {
    // unconstrained optimum walks into the unsafe sink (reward 2 beats 1);
    // with the visit budget the learner must settle at or below it
    const TabularCMDP f = cisr_test::fork3(0.5);
    SolverConfig cfg;
    cfg.bound_B = 3.0;  // the penalty must be able to overcome the reward edge
    cfg.primal_steps_per_epoch = 500;
    TabularTrainEnv env(f);
    const TrainResult res = train_student(env, cfg, 60000, 7);
    const TabularPolicy pi = res.state.policy();
    const double visits = exact_expected_visits(f, pi, f.unsafe);
    const double ret = exact_expected_return(f, pi);
    CHECK(visits <= 0.6);
    CHECK(ret >= 0.9);
}

TEST_CASE("training throws on empty budgets") {
    const TabularCMDP f = cisr_test::fork3(0.5);
    TabularTrainEnv env(f);
    SolverConfig cfg;
    CHECK_THROWS_AS(train_student(env, cfg, 0, 1), BudgetZero);
}

TEST_CASE("warm start copies tables and resets the scratch") {
    StudentState s = StudentState::fresh(3, 2);
    s.logits[0] = 0.7;
    s.value_table[5] = -0.3;
    s.steps_done = 999;
    const StudentState w = StudentState::warm_start(s);
    CHECK(w.logits == s.logits);
    CHECK(w.value_table == s.value_table);
    CHECK(w.steps_done == 0);
}

TEST_CASE("epoch logs accumulate the step budget") {
    const TabularCMDP f = cisr_test::fork3(0.5);
    SolverConfig cfg;
    cfg.primal_steps_per_epoch = 300;
    TabularTrainEnv env(f);
    const TrainResult res = train_student(env, cfg, 1000, 9);
    CHECK(res.stats.total_steps == 1000);
    CHECK(res.stats.epochs.size() == 4);  // ceil(1000 / 300)
    for (const EpochStats& ep : res.stats.epochs) {
        CHECK(ep.lambda.size() == 1);
        CHECK(ep.violation_gap.size() == 1);
        CHECK(ep.episodes > 0);
    }
}

TEST_CASE("feature evaluation reports the last constraint's gap") {
    // supervised corridor: constraints are [unsafe, trigger]; a policy that
    // never uses the shortcut has gap exactly -tau
    const TabularCMDP base = cisr_test::corridor6();
    std::vector<double> kernel(36, 0.0);
    for (int s = 0; s < 6; ++s) kernel[static_cast<std::size_t>(s) * 6] = 1.0;
    const Intervention iv =
        make_intervention("buffer", 6, {4, 5}, ResetMode::fixed_kernel, kernel, 0.1, 0.0);
    TabularTrainEnv env(base, iv);

    StudentState s = StudentState::fresh(6, 2);
    for (int st = 0; st < 6; ++st) {
        s.logits[static_cast<std::size_t>(st) * 2 + 0] = 25.0;  // always the safe action
        s.logits[static_cast<std::size_t>(st) * 2 + 1] = -25.0;
    }
    SolverConfig cfg;
    const PolicyFeatures feat = evaluate_features(env, s, cfg, 50, 5);
    CHECK(feat.violation_gap == doctest::Approx(-0.1).epsilon(1e-9));
    CHECK(feat.value_estimate == doctest::Approx(1.0).epsilon(1e-9));

    const PolicyFeatures again = evaluate_features(env, s, cfg, 50, 5);
    CHECK(feat.value_estimate == again.value_estimate);
    CHECK(feat.violation_gap == again.violation_gap);
}
