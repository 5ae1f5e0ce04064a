#include "cisr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cisr/errors.hpp"
#include "cisr/rng.hpp"

namespace cisr {

namespace {

// Sparse view of a CMDP used by the brute-force evaluators: successor lists
// and expected one-step rewards per (s, a).
struct SparseModel {
    int n_states = 0;
    int n_actions = 0;
    int horizon = 0;
    std::vector<std::vector<std::pair<int, double>>> succ;  // [(s,a)] -> (s', p)
    std::vector<double> r_bar;                              // [(s,a)] expected reward
    std::vector<std::uint8_t> terminal;
    std::vector<double> initial;

    explicit SparseModel(const TabularCMDP& m)
        : n_states(m.n_states),
          n_actions(m.n_actions),
          horizon(m.horizon),
          succ(static_cast<std::size_t>(m.n_states) * m.n_actions),
          r_bar(static_cast<std::size_t>(m.n_states) * m.n_actions, 0.0),
          terminal(m.terminal),
          initial(m.initial_dist) {
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                const std::size_t sa = static_cast<std::size_t>(s) * m.n_actions + a;
                for (int s2 = 0; s2 < m.n_states; ++s2) {
                    const double p = m.p(s, a, s2);
                    if (p > 0.0) {
                        succ[sa].push_back({s2, p});
                        r_bar[sa] += p * m.r(s, a, s2);
                    }
                }
            }
    }

    // Forward pass for a deterministic policy: occupancy propagation that
    // accumulates expected return and visits of each target set in one sweep.
    OracleStats eval_deterministic(const std::vector<int>& actions,
                                   const std::vector<std::vector<std::uint8_t>>& targets,
                                   std::vector<double>& occ, std::vector<double>& next) const {
        OracleStats out;
        out.set_visits.assign(targets.size(), 0.0);
        occ = initial;
        for (int t = 0; t <= horizon; ++t) {
            for (int s = 0; s < n_states; ++s) {
                const double mass = occ[s];
                if (mass == 0.0) continue;
                for (std::size_t k = 0; k < targets.size(); ++k)
                    if (targets[k][s]) out.set_visits[k] += mass;
            }
            if (t == horizon) break;
            std::fill(next.begin(), next.end(), 0.0);
            for (int s = 0; s < n_states; ++s) {
                const double mass = occ[s];
                if (mass == 0.0 || terminal[s]) continue;
                const std::size_t sa = static_cast<std::size_t>(s) * n_actions + actions[s];
                out.expected_return += mass * r_bar[sa];
                for (const auto& [s2, p] : succ[sa]) next[s2] += mass * p;
            }
            std::swap(occ, next);
        }
        return out;
    }

    OracleStats eval_stochastic(const std::vector<double>& probs,
                                const std::vector<std::vector<std::uint8_t>>& targets) const {
        OracleStats out;
        out.set_visits.assign(targets.size(), 0.0);
        std::vector<double> occ = initial, next(n_states, 0.0);
        for (int t = 0; t <= horizon; ++t) {
            for (int s = 0; s < n_states; ++s) {
                const double mass = occ[s];
                if (mass == 0.0) continue;
                for (std::size_t k = 0; k < targets.size(); ++k)
                    if (targets[k][s]) out.set_visits[k] += mass;
            }
            if (t == horizon) break;
            std::fill(next.begin(), next.end(), 0.0);
            for (int s = 0; s < n_states; ++s) {
                const double mass = occ[s];
                if (mass == 0.0 || terminal[s]) continue;
                for (int a = 0; a < n_actions; ++a) {
                    const double w = mass * probs[static_cast<std::size_t>(s) * n_actions + a];
                    if (w == 0.0) continue;
                    const std::size_t sa = static_cast<std::size_t>(s) * n_actions + a;
                    out.expected_return += w * r_bar[sa];
                    for (const auto& [s2, p] : succ[sa]) next[s2] += w * p;
                }
            }
            std::swap(occ, next);
        }
        return out;
    }
};

std::int64_t policy_count_or_throw(int n_states, int n_actions, std::int64_t budget) {
    std::int64_t count = 1;
    for (int s = 0; s < n_states; ++s) {
        if (count > budget / n_actions + 1) {
            throw BudgetExceeded("enumeration: |A|^|S| exceeds the policy budget of " +
                                 std::to_string(budget));
        }
        count *= n_actions;
    }
    if (count > budget)
        throw BudgetExceeded("enumeration: " + std::to_string(count) +
                             " policies exceed the budget of " + std::to_string(budget));
    return count;
}

}  // namespace

std::int64_t count_deterministic_policies(const TabularCMDP& cmdp,
                                          const EnumerationBudget& budget) {
    return policy_count_or_throw(cmdp.n_states, cmdp.n_actions, budget.max_policies);
}

void enumerate_policy_stats(
    const TabularCMDP& cmdp, const std::vector<std::vector<std::uint8_t>>& target_sets,
    const EnumerationBudget& budget,
    const std::function<void(const std::vector<int>&, const OracleStats&)>& visit) {
    const std::int64_t total = policy_count_or_throw(cmdp.n_states, cmdp.n_actions,
                                                     budget.max_policies);
    const SparseModel model(cmdp);
    std::vector<int> actions(cmdp.n_states, 0);
    std::vector<double> occ(cmdp.n_states), next(cmdp.n_states);
    for (std::int64_t i = 0; i < total; ++i) {
        visit(actions, model.eval_deterministic(actions, target_sets, occ, next));
        // Increment the base-|A| counter; state 0 is the least significant digit.
        for (int s = 0; s < cmdp.n_states; ++s) {
            if (++actions[s] < cmdp.n_actions) break;
            actions[s] = 0;
        }
    }
}

OracleSolution solve_exact(const TabularCMDP& cmdp, const EnumerationBudget& budget, double tol) {
    OracleSolution best;
    bool found = false;
    enumerate_policy_stats(
        cmdp, {cmdp.unsafe}, budget, [&](const std::vector<int>& actions, const OracleStats& st) {
            ++best.n_enumerated;
            if (st.set_visits[0] > cmdp.kappa + tol) return;
            if (!found || st.expected_return > best.expected_return) {
                found = true;
                best.actions = actions;
                best.expected_return = st.expected_return;
                best.expected_unsafe_visits = st.set_visits[0];
            }
        });
    if (!found)
        throw NoFeasible("solve_exact: no deterministic policy meets the unsafe-visit budget");
    return best;
}

double optimal_return_dp(const TabularCMDP& cmdp) {
    const SparseModel model(cmdp);
    const int S = cmdp.n_states;
    std::vector<double> v_next(S, 0.0), v(S, 0.0);
    for (int t = cmdp.horizon - 1; t >= 0; --t) {
        for (int s = 0; s < S; ++s) {
            if (model.terminal[s]) {
                v[s] = 0.0;
                continue;
            }
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < cmdp.n_actions; ++a) {
                const std::size_t sa = static_cast<std::size_t>(s) * cmdp.n_actions + a;
                double q = model.r_bar[sa];
                for (const auto& [s2, p] : model.succ[sa]) q += p * v_next[s2];
                best = std::max(best, q);
            }
            v[s] = best;
        }
        std::swap(v, v_next);
    }
    double ret = 0.0;
    for (int s = 0; s < S; ++s) ret += cmdp.initial_dist[s] * v_next[s];
    return ret;
}

PropositionReport verify_prop1(const TabularCMDP& base, const Intervention& intervention,
                               const EnumerationBudget& budget, std::int64_t n_stochastic,
                               std::uint64_t seed, double tol) {
    const InducedCMDP induced = induce(base, intervention);
    const SparseModel base_model(base);
    const SparseModel induced_model(induced.cmdp);
    const std::vector<std::vector<std::uint8_t>> induced_targets = {base.unsafe,
                                                                    intervention.trigger};
    const std::vector<std::vector<std::uint8_t>> base_targets = {base.unsafe};

    PropositionReport report;
    report.premise_holds = check_eventual_safety(intervention, base.kappa);
    std::int64_t feasible_in_induced = 0;

    const std::int64_t total = policy_count_or_throw(base.n_states, base.n_actions,
                                                     budget.max_policies);
    std::vector<int> actions(base.n_states, 0);
    std::vector<double> occ(base.n_states), next(base.n_states);
    for (std::int64_t i = 0; i < total; ++i) {
        const OracleStats in_i = induced_model.eval_deterministic(actions, induced_targets, occ,
                                                                  next);
        ++report.n_deterministic;
        const bool feasible_i = in_i.set_visits[0] <= intervention.kappa_i + tol &&
                                in_i.set_visits[1] <= intervention.tau + tol;
        if (feasible_i) {
            ++feasible_in_induced;
            const OracleStats in_base = base_model.eval_deterministic(actions, base_targets, occ,
                                                                      next);
            if (in_base.set_visits[0] > base.kappa + tol) {
                report.holds = false;
                if (report.counterexamples.size() < 16) {
                    PropCounterexample ce;
                    ce.actions = actions;
                    ce.unsafe_visits_base = in_base.set_visits[0];
                    ce.unsafe_visits_induced = in_i.set_visits[0];
                    ce.trigger_visits_induced = in_i.set_visits[1];
                    report.counterexamples.push_back(std::move(ce));
                }
            }
        }
        for (int s = 0; s < base.n_states; ++s) {
            if (++actions[s] < base.n_actions) break;
            actions[s] = 0;
        }
    }

    Rng rng(seed);
    std::vector<double> probs(static_cast<std::size_t>(base.n_states) * base.n_actions);
    for (std::int64_t i = 0; i < n_stochastic; ++i) {
        for (int s = 0; s < base.n_states; ++s) {
            double sum = 0.0;
            double* row = probs.data() + static_cast<std::size_t>(s) * base.n_actions;
            for (int a = 0; a < base.n_actions; ++a) {
                double u;
                do {
                    u = rng.next_double();
                } while (u == 0.0);
                row[a] = -std::log(u);  // Dirichlet(1,...,1) via exponentials
                sum += row[a];
            }
            for (int a = 0; a < base.n_actions; ++a) row[a] /= sum;
        }
        const OracleStats in_i = induced_model.eval_stochastic(probs, induced_targets);
        ++report.n_stochastic;
        const bool feasible_i = in_i.set_visits[0] <= intervention.kappa_i + tol &&
                                in_i.set_visits[1] <= intervention.tau + tol;
        if (!feasible_i) continue;
        ++feasible_in_induced;
        const OracleStats in_base = base_model.eval_stochastic(probs, base_targets);
        if (in_base.set_visits[0] > base.kappa + tol) {
            report.holds = false;
            if (report.counterexamples.size() < 16) {
                PropCounterexample ce;
                ce.stochastic = true;
                ce.policy_probs = probs;
                ce.unsafe_visits_base = in_base.set_visits[0];
                ce.unsafe_visits_induced = in_i.set_visits[0];
                ce.trigger_visits_induced = in_i.set_visits[1];
                report.counterexamples.push_back(std::move(ce));
            }
        }
    }

    report.vacuous = feasible_in_induced == 0;
    report.summary = "eventual safety: checked " + std::to_string(report.n_deterministic) +
                     " deterministic + " + std::to_string(report.n_stochastic) +
                     " stochastic policies, " + std::to_string(report.counterexamples.size()) +
                     " counterexample(s)" + (report.vacuous ? " [vacuous]" : "") +
                     (report.premise_holds ? ", premise holds" : ", premise does not hold");
    return report;
}

PropositionReport verify_prop2(const TabularCMDP& base, const Intervention& intervention,
                               const EnumerationBudget& budget, double tol) {
    const InducedCMDP induced = induce(base, intervention);
    PropositionReport report;
    report.premise_holds = check_learning_safety(base, intervention);
    double initial_unsafe_mass = 0.0;
    for (int s = 0; s < base.n_states; ++s)
        if (base.unsafe[s]) initial_unsafe_mass += base.initial_dist[s];

    enumerate_policy_stats(
        induced.cmdp, {base.unsafe}, budget,
        [&](const std::vector<int>& actions, const OracleStats& st) {
            ++report.n_deterministic;
            if (st.set_visits[0] > initial_unsafe_mass + tol) {
                report.holds = false;
                if (report.counterexamples.size() < 16) {
                    PropCounterexample ce;
                    ce.actions = actions;
                    ce.unsafe_visits_induced = st.set_visits[0];
                    report.counterexamples.push_back(std::move(ce));
                }
            }
        });
    report.summary = "learning safety: checked " + std::to_string(report.n_deterministic) +
                     " deterministic policies against initial unsafe mass " +
                     std::to_string(initial_unsafe_mass) + ", " +
                     std::to_string(report.counterexamples.size()) + " counterexample(s)" +
                     (report.premise_holds ? ", premise holds" : ", premise does not hold");
    return report;
}

namespace {

struct TreeWalker {
    const TabularCMDP& m;
    const TabularPolicy& policy;
    const std::vector<std::uint8_t>& target;
    std::int64_t max_nodes;
    std::int64_t nodes = 0;
    TreeEval out;

    void walk(int s, int t, double prob, double reward_so_far, double visits_so_far) {
        if (++nodes > max_nodes)
            throw BudgetExceeded("trajectory_tree_eval: node budget exceeded");
        const double visits = visits_so_far + (target[s] ? 1.0 : 0.0);
        out.live_prob[t] += prob;
        if (m.is_terminal(s) || t == m.horizon) {
            out.expected_return += prob * reward_so_far;
            out.expected_visits += prob * visits;
            return;
        }
        for (int a = 0; a < m.n_actions; ++a) {
            const double pa = policy.prob(s, a);
            if (pa == 0.0) continue;
            for (int s2 = 0; s2 < m.n_states; ++s2) {
                const double p = m.p(s, a, s2);
                if (p == 0.0) continue;
                walk(s2, t + 1, prob * pa * p, reward_so_far + m.r(s, a, s2), visits);
            }
        }
    }
};

}  // namespace

TreeEval trajectory_tree_eval(const TabularCMDP& cmdp, const TabularPolicy& policy,
                              const std::vector<std::uint8_t>& target, std::int64_t max_nodes) {
    TreeWalker w{cmdp, policy, target, max_nodes, 0, {}};
    w.out.live_prob.assign(cmdp.horizon + 1, 0.0);
    for (int s = 0; s < cmdp.n_states; ++s)
        if (cmdp.initial_dist[s] > 0.0) w.walk(s, 0, cmdp.initial_dist[s], 0.0, 0.0);
    return w.out;
}

}  // namespace cisr
