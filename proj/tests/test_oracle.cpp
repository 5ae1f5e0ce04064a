#include <cmath>
#include <vector>

#include "doctest.h"

#include "cisr/errors.hpp"
#include "cisr/experiment.hpp"
#include "cisr/oracle.hpp"
#include "test_util.hpp"

using namespace cisr;

TEST_CASE("policy counting and the enumeration budget") {
    const TabularCMDP f = cisr_test::fork3(0.5);
    CHECK(count_deterministic_policies(f, {}) == 8);  // 2^3
    EnumerationBudget tight;
    tight.max_policies = 7;
    CHECK_THROWS_AS(count_deterministic_policies(f, tight), BudgetExceeded);
}

TEST_CASE("forward enumeration agrees with the backward evaluator") {
    // two independent code paths must produce identical numbers
    const TabularCMDP m = cisr_test::corridor6();
    const std::vector<std::vector<std::uint8_t>> targets = {m.unsafe, state_mask(6, {4, 5})};
    int seen = 0;
    enumerate_policy_stats(m, targets, {}, [&](const std::vector<int>& actions,
                                               const OracleStats& stats) {
        ++seen;
        const TabularPolicy pi = TabularPolicy::deterministic(6, 2, actions);
        CHECK(stats.expected_return ==
              doctest::Approx(exact_expected_return(m, pi)).epsilon(1e-12));
        CHECK(stats.set_visits[0] ==
              doctest::Approx(exact_expected_visits(m, pi, m.unsafe)).epsilon(1e-12));
        CHECK(stats.set_visits[1] ==
              doctest::Approx(exact_expected_visits(m, pi, targets[1])).epsilon(1e-12));
    });
    CHECK(seen == 64);
}

TEST_CASE("exact constrained optimum picks the safe path when the budget binds") {
    const OracleSolution tight = solve_exact(cisr_test::fork3(0.5));
    CHECK(tight.expected_return == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(tight.expected_unsafe_visits == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(tight.actions[0] == 0);

    const OracleSolution loose = solve_exact(cisr_test::fork3(1.5));
    CHECK(loose.expected_return == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(loose.actions[0] == 1);

    const OracleSolution corridor = solve_exact(cisr_test::corridor6(0.1));
    CHECK(corridor.expected_return == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(corridor.expected_unsafe_visits <= 0.1 + 1e-9);

    // an impossible budget reports NoFeasible
    std::vector<double> p(1 * 1 * 1, 1.0), r(1 * 1 * 1, 0.0);
    const TabularCMDP sit =
        build_cmdp(1, 1, 3, p, r, {1.0}, {1}, {1}, 0.0, true);
    CHECK_THROWS_AS(solve_exact(sit), NoFeasible);
}

TEST_CASE("unconstrained optimum bounds the constrained one") {
    CHECK(optimal_return_dp(cisr_test::fork3(0.5)) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(optimal_return_dp(cisr_test::corridor6()) == doctest::Approx(1.0).epsilon(1e-12));
    const TabularCMDP f = cisr_test::fork3(0.01);
    CHECK(solve_exact(f).expected_return <= optimal_return_dp(f) + 1e-12);
}

TEST_CASE("trajectory tree cross-checks both evaluators") {
    const TabularCMDP m = cisr_test::corridor6();
    const TabularPolicy pi = TabularPolicy::uniform(6, 2);
    const TreeEval tree = trajectory_tree_eval(m, pi, m.unsafe);
    CHECK(tree.expected_return == doctest::Approx(exact_expected_return(m, pi)).epsilon(1e-12));
    CHECK(tree.expected_visits ==
          doctest::Approx(exact_expected_visits(m, pi, m.unsafe)).epsilon(1e-12));
    REQUIRE(!tree.live_prob.empty());
    CHECK(tree.live_prob[0] == doctest::Approx(1.0).epsilon(1e-12));

    // the node guard trips on absurdly small budgets
    CHECK_THROWS_AS(trajectory_tree_eval(m, pi, m.unsafe, 4), BudgetExceeded);
}

TEST_CASE("monte carlo rollouts match the exact evaluator within noise") {
    const TabularCMDP m = cisr_test::corridor6();
    const TabularPolicy pi = TabularPolicy::uniform(6, 2);
    const double exact = exact_expected_return(m, pi);
    const int n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double ret = rollout(m, pi, static_cast<std::uint64_t>(i) + 1).total_reward();
        sum += ret;
        sumsq += ret * ret;
    }
    const double mean = sum / n;
    const double var = (sumsq - sum * sum / n) / (n - 1);
    const double se = std::sqrt(var / n);
    CHECK(std::abs(mean - exact) <= 3.0 * se + 1e-9);
}

TEST_CASE("eventual safety holds on every well-formed fixture") {
    for (const PropFixture& fx : verification_fixtures(true)) {
        CAPTURE(fx.name);
        const PropositionReport rep = verify_prop1(fx.base, fx.intervention, {}, 2000, 1);
        CHECK(rep.holds == fx.expect_prop1);
        if (fx.expect_prop1) {
            CHECK(rep.counterexamples.empty());
            CHECK_FALSE(rep.vacuous);
        }
        CHECK(rep.n_deterministic > 0);
        CHECK(rep.n_stochastic == 2000);
    }
}

TEST_CASE("learning safety fails exactly on the thin trigger") {
    for (const PropFixture& fx : verification_fixtures(true)) {
        CAPTURE(fx.name);
        const PropositionReport rep = verify_prop2(fx.base, fx.intervention);
        CHECK(rep.holds == fx.expect_prop2);
        CHECK(rep.premise_holds == fx.expect_prop2);
        if (!fx.expect_prop2) {
            REQUIRE(!rep.counterexamples.empty());
            // the counterexample really does pick up unsafe mass mid-episode
            CHECK(rep.counterexamples.front().unsafe_visits_induced > 1e-6);
        }
    }
}

TEST_CASE("the grid shortcut tempts the unconstrained optimum only") {
    const TabularCMDP grid = shortcut_grid3();
    REQUIRE(grid.n_states == 9);
    REQUIRE(grid.n_actions == 4);

    // risky two-step route: -0.1 + 0.7 * 0.9 + 0.3 * (-0.1)
    CHECK(optimal_return_dp(grid) == doctest::Approx(0.5).epsilon(1e-12));

    // the constrained optimum takes the six-step detour around the bottom
    const OracleSolution best = solve_exact(grid);
    CHECK(best.expected_return == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(best.expected_unsafe_visits <= 1e-12);

    // with a loose budget the oracle goes straight for the shortcut
    TabularCMDP loose = grid;
    loose.kappa = 0.5;
    const OracleSolution risky = solve_exact(loose);
    CHECK(risky.expected_return == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(risky.expected_unsafe_visits == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("built-in fixtures cover both reset families") {
    const auto fixtures = verification_fixtures(true);
    REQUIRE(fixtures.size() == 4);
    CHECK(fixtures[0].name == "corner_ring");
    CHECK(fixtures[1].name == "corner_restart");
    CHECK(fixtures[2].name == "corridor_shortcut");
    CHECK(fixtures[3].name == "thin_trigger");
    CHECK(verification_fixtures(false).size() == 3);
    CHECK(fixtures[0].intervention.mode == ResetMode::to_previous_state);
    CHECK(fixtures[1].intervention.mode == ResetMode::to_initial_distribution);
    CHECK(fixtures[2].intervention.mode == ResetMode::fixed_kernel);
}
