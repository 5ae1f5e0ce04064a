#include <vector>

#include "doctest.h"

#include "cisr/cmdp.hpp"
#include "cisr/errors.hpp"
#include "test_util.hpp"

using namespace cisr;

TEST_CASE("build_cmdp validates shapes and stochasticity") {
    std::vector<double> p(2 * 2 * 2, 0.0), r(2 * 2 * 2, 0.0);
    CHECK_THROWS_AS(build_cmdp(2, 2, 5, p, r, {1.0, 0.0}, {0, 1}, {0, 0}, 0.1),
                    NonStochasticRow);
    CHECK_THROWS_AS(build_cmdp(3, 2, 5, p, r, {1.0, 0.0, 0.0}, {0, 1, 1}, {0, 0, 0}, 0.1),
                    DimensionMismatch);

    // rows sum to 1 but the initial distribution does not
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) p[(s * 2 + a) * 2 + s] = 1.0;
    CHECK_THROWS_AS(build_cmdp(2, 2, 5, p, r, {0.4, 0.4}, {0, 1}, {0, 0}, 0.1),
                    NonStochasticRow);

    // unsafe states must be terminal unless explicitly allowed
    CHECK_THROWS_AS(build_cmdp(2, 2, 5, p, r, {1.0, 0.0}, {0, 0}, {0, 1}, 0.1),
                    UnsafeNotTerminal);
    CHECK_NOTHROW(build_cmdp(2, 2, 5, p, r, {1.0, 0.0}, {0, 0}, {0, 1}, 0.1, true));
    CHECK_THROWS_AS(build_cmdp(2, 2, 0, p, r, {1.0, 0.0}, {0, 1}, {0, 0}, 0.1),
                    DimensionMismatch);
}

TEST_CASE("tensor indexing round-trips") {
    const TabularCMDP m = cisr_test::chain2();
    CHECK(m.idx(0, 0, 1) == 1);
    CHECK(m.p(0, 0, 1) == 1.0);
    CHECK(m.p(0, 1, 0) == 1.0);
    CHECK(m.r(0, 0, 1) == 1.0);
    CHECK(m.is_terminal(1));
    CHECK_FALSE(m.is_terminal(0));
    CHECK_FALSE(m.is_unsafe(1));
}

TEST_CASE("policies are row-stochastic") {
    const TabularPolicy u = TabularPolicy::uniform(3, 4);
    for (int s = 0; s < 3; ++s) {
        double sum = 0.0;
        for (int a = 0; a < 4; ++a) sum += u.prob(s, a);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    const TabularPolicy d = TabularPolicy::deterministic(2, 3, {2, 0});
    CHECK(d.prob(0, 2) == 1.0);
    CHECK(d.prob(0, 0) == 0.0);
    CHECK(d.prob(1, 0) == 1.0);
}

TEST_CASE("exact evaluators reproduce hand-computed values") {
    const TabularCMDP m = cisr_test::chain2();
    const TabularPolicy go = TabularPolicy::deterministic(2, 2, {0, 0});
    const TabularPolicy stay = TabularPolicy::deterministic(2, 2, {1, 0});
    CHECK(exact_expected_return(m, go) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(exact_expected_return(m, stay) == doctest::Approx(0.0).epsilon(1e-12));

    const TabularCMDP f = cisr_test::fork3(0.5);
    const TabularPolicy risky = TabularPolicy::deterministic(3, 2, {1, 0, 0});
    CHECK(exact_expected_return(f, risky) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(exact_expected_visits(f, risky, std::vector<int>{2}) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(is_feasible(f, risky));
    const TabularPolicy safe = TabularPolicy::deterministic(3, 2, {0, 0, 0});
    CHECK(is_feasible(f, safe));

    // mixing the fork's first decision mixes the visit count linearly
    TabularPolicy mix = TabularPolicy::uniform(3, 2);
    CHECK(exact_expected_visits(f, mix, std::vector<int>{2}) ==
          doctest::Approx(0.5).epsilon(1e-12));
    CHECK(exact_expected_return(f, mix) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("terminal mass is counted once") {
    // entering the absorbing unsafe sink counts a single visit even though
    // the state is absorbing and the horizon is long
    const TabularCMDP f = cisr_test::fork3(0.5, 9);
    const TabularPolicy risky = TabularPolicy::deterministic(3, 2, {1, 0, 0});
    CHECK(exact_expected_visits(f, risky, std::vector<int>{2}) ==
          doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rollout is bitwise deterministic per seed") {
    const TabularCMDP f = cisr_test::fork3(0.5);
    const TabularPolicy mix = TabularPolicy::uniform(3, 2);
    const Trajectory a = rollout(f, mix, 42);
    const Trajectory b = rollout(f, mix, 42);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].state == b.steps[i].state);
        CHECK(a.steps[i].action == b.steps[i].action);
        CHECK(a.steps[i].reward == b.steps[i].reward);
    }
    CHECK(a.total_reward() == b.total_reward());
}

TEST_CASE("rollout stops at terminals and at the horizon") {
    const TabularCMDP m = cisr_test::chain2(5);
    const Trajectory goal = rollout(m, TabularPolicy::deterministic(2, 2, {0, 0}), 1);
    CHECK(goal.terminated_by == TerminationKind::goal);
    CHECK(goal.steps.size() == 1);
    CHECK(goal.total_reward() == 1.0);

    const Trajectory wander = rollout(m, TabularPolicy::deterministic(2, 2, {1, 0}), 1);
    CHECK(wander.terminated_by == TerminationKind::horizon);
    CHECK(wander.steps.size() == 5);

    const TabularCMDP f = cisr_test::fork3(0.5);
    const Trajectory bad = rollout(f, TabularPolicy::deterministic(3, 2, {1, 0, 0}), 1);
    CHECK(bad.terminated_by == TerminationKind::unsafe);
    CHECK(bad.visits(state_mask(3, {2})) == 1);
}

TEST_CASE("json serialization round-trips a model") {
    const TabularCMDP f = cisr_test::fork3(0.3);
    const TabularCMDP back = cmdp_from_json(cmdp_to_json(f));
    CHECK(back.n_states == f.n_states);
    CHECK(back.n_actions == f.n_actions);
    CHECK(back.horizon == f.horizon);
    CHECK(back.kappa == f.kappa);
    CHECK(back.transition == f.transition);
    CHECK(back.reward == f.reward);
    CHECK(back.initial_dist == f.initial_dist);
    CHECK(back.terminal == f.terminal);
    CHECK(back.unsafe == f.unsafe);
}
