#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cisr/cmdp.hpp"
#include "cisr/intervention.hpp"

namespace cisr {

// Cap on |A|^|S| before exhaustive enumeration refuses to run.
struct EnumerationBudget {
    std::int64_t max_policies = 10'000'000;
};

// Exact per-policy quantities computed by the oracle's own forward-pass
// evaluator (deliberately a separate code path from the library's backward
// dynamic program, so the two can cross-check each other).
struct OracleStats {
    double expected_return = 0.0;
    std::vector<double> set_visits;  // one entry per requested target set
};

// Enumerates every deterministic stationary policy (actions indexed per
// state, state 0 least significant) and reports exact stats for each.
// Throws BudgetExceeded when |A|^|S| > budget.max_policies.
void enumerate_policy_stats(
    const TabularCMDP& cmdp, const std::vector<std::vector<std::uint8_t>>& target_sets,
    const EnumerationBudget& budget,
    const std::function<void(const std::vector<int>& actions, const OracleStats&)>& visit);

std::int64_t count_deterministic_policies(const TabularCMDP& cmdp,
                                          const EnumerationBudget& budget);

struct OracleSolution {
    std::vector<int> actions;
    double expected_return = 0.0;
    double expected_unsafe_visits = 0.0;
    std::int64_t n_enumerated = 0;
};

// Exact constrained optimum over deterministic stationary policies: maximal
// expected return subject to expected unsafe visits <= kappa + tol. Ties go
// to the lowest-numbered policy in enumeration order. Throws NoFeasible when
// no deterministic policy satisfies the budget.
OracleSolution solve_exact(const TabularCMDP& cmdp, const EnumerationBudget& budget = {},
                           double tol = 1e-9);

// Unconstrained exact optimum (backward induction over actions); an upper
// bound handy for sanity checks.
double optimal_return_dp(const TabularCMDP& cmdp);

struct PropCounterexample {
    bool stochastic = false;
    std::vector<int> actions;          // deterministic case
    std::vector<double> policy_probs;  // stochastic case (row-major)
    double unsafe_visits_base = 0.0;
    double unsafe_visits_induced = 0.0;
    double trigger_visits_induced = 0.0;
};

struct PropositionReport {
    bool holds = true;
    bool premise_holds = false;  // the checkable sufficient condition
    bool vacuous = false;        // no policy satisfied the left-hand side
    std::int64_t n_deterministic = 0;
    std::int64_t n_stochastic = 0;
    std::vector<PropCounterexample> counterexamples;  // capped at 16
    std::string summary;
};

// Eventual-safety check: every policy feasible in the induced model (both
// the unsafe budget kappa_i and the trigger budget tau) must satisfy the
// base model's unsafe budget kappa. Enumerates all deterministic policies
// and additionally samples `n_stochastic` random stochastic policies.
PropositionReport verify_prop1(const TabularCMDP& base, const Intervention& intervention,
                               const EnumerationBudget& budget = {},
                               std::int64_t n_stochastic = 10'000, std::uint64_t seed = 1,
                               double tol = 1e-9);

// Learning-safety check: when the trigger set blankets the unsafe set, the
// expected unsafe visits in the induced model must equal the initial mass
// already sitting on unsafe states, for every policy (tolerance 1e-10).
PropositionReport verify_prop2(const TabularCMDP& base, const Intervention& intervention,
                               const EnumerationBudget& budget = {}, double tol = 1e-10);

// Exhaustive trajectory-tree evaluation; independent of both evaluators
// above. Expands every trajectory prefix, so it requires a small model and
// horizon (node budget guards against misuse). live_prob[t] is the
// probability the episode still has a state at slot t.
struct TreeEval {
    double expected_return = 0.0;
    double expected_visits = 0.0;
    std::vector<double> live_prob;
};

TreeEval trajectory_tree_eval(const TabularCMDP& cmdp, const TabularPolicy& policy,
                              const std::vector<std::uint8_t>& target,
                              std::int64_t max_nodes = 50'000'000);

}  // namespace cisr
