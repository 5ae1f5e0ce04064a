#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cisr/rng.hpp"

namespace cisr {

// Finite-horizon tabular CMDP. Return is the undiscounted sum of rewards
// over at most `horizon` transitions; the safety budget `kappa` bounds the
// expected number of visits to `unsafe` states (the visit at t=0 counts).
//
// Dense |S|x|A|x|S| tensors, row-major. Dense is deliberate: every model this
// library touches is desk-scale, and dense rows keep the exact dynamic
// programs and the exhaustive verifier simple to audit.
struct TabularCMDP {
    int n_states = 0;
    int n_actions = 0;
    int horizon = 0;
    std::vector<double> transition;    // [s][a][s']
    std::vector<double> reward;        // [s][a][s']
    std::vector<double> initial_dist;  // [s]
    std::vector<std::uint8_t> terminal;
    std::vector<std::uint8_t> unsafe;
    double kappa = 0.0;

    std::size_t idx(int s, int a, int s2) const {
        return (static_cast<std::size_t>(s) * n_actions + a) * n_states + s2;
    }
    double p(int s, int a, int s2) const { return transition[idx(s, a, s2)]; }
    double r(int s, int a, int s2) const { return reward[idx(s, a, s2)]; }
    bool is_terminal(int s) const { return terminal[s] != 0; }
    bool is_unsafe(int s) const { return unsafe[s] != 0; }
};

// Validates shapes, row-stochasticity (tolerance 1e-9 per row) and the
// "unsafe states are terminal" convention, then returns the assembled model.
// `allow_unsafe_nonterminal` exists for intervention-induced models, where a
// rescue kernel may legitimately override the dynamics of an unsafe state.
TabularCMDP build_cmdp(int n_states, int n_actions, int horizon,
                       std::vector<double> transition, std::vector<double> reward,
                       std::vector<double> initial_dist,
                       std::vector<std::uint8_t> terminal, std::vector<std::uint8_t> unsafe,
                       double kappa, bool allow_unsafe_nonterminal = false);

// Stationary stochastic policy as a row-stochastic |S|x|A| matrix.
struct TabularPolicy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs;  // [s][a]

    double prob(int s, int a) const {
        return probs[static_cast<std::size_t>(s) * n_actions + a];
    }
    static TabularPolicy uniform(int n_states, int n_actions);
    static TabularPolicy deterministic(int n_states, int n_actions,
                                       const std::vector<int>& actions);
};

enum class TerminationKind { goal, unsafe, horizon, timeout };

const char* to_string(TerminationKind k);

struct TrajectoryStep {
    int state = 0;
    int action = 0;
    int next_state = 0;
    double reward = 0.0;
    bool intervention_triggered = false;
};

struct Trajectory {
    int initial_state = 0;
    std::vector<TrajectoryStep> steps;
    TerminationKind terminated_by = TerminationKind::horizon;

    double total_reward() const;
    // Number of time slots t with s_t in `member` (initial state included).
    int visits(const std::vector<std::uint8_t>& member) const;
};

// Exact evaluation results (or empirical estimates of the same quantities;
// the empirical path additionally fills episodes and success_rate).
struct PolicyStats {
    double expected_return = 0.0;
    double expected_unsafe_visits = 0.0;
    std::vector<double> trigger_visits;  // one entry per trigger set, if any
    double success_rate = 0.0;
    std::int64_t episodes = 0;
};

// Samples one episode. Stops on entering a terminal state or after
// `cmdp.horizon` transitions, whichever comes first. Bitwise deterministic
// for a fixed seed.
Trajectory rollout(const TabularCMDP& cmdp, const TabularPolicy& policy, std::uint64_t seed);

// Exact expected return by backward dynamic programming over (t, s).
double exact_expected_return(const TabularCMDP& cmdp, const TabularPolicy& policy);

// Exact expected count of visits to `target` (membership mask over states)
// via forward occupancy propagation. The initial state at t=0 is counted;
// mass entering a terminal state is counted once and then leaves the system,
// so an absorbing terminal contributes at most one visit per trajectory.
double exact_expected_visits(const TabularCMDP& cmdp, const TabularPolicy& policy,
                             const std::vector<std::uint8_t>& target);

// Convenience overload taking a state list.
double exact_expected_visits(const TabularCMDP& cmdp, const TabularPolicy& policy,
                             const std::vector<int>& target_states);

std::vector<std::uint8_t> state_mask(int n_states, const std::vector<int>& states);

// True iff exact expected unsafe visits <= kappa + tol.
bool is_feasible(const TabularCMDP& cmdp, const TabularPolicy& policy, double tol = 1e-9);

// Structured-text (JSON) serialization with sparse transition/reward triples.
// Meant for debugging dumps and for loading hand-written custom models.
std::string cmdp_to_json(const TabularCMDP& cmdp);
TabularCMDP cmdp_from_json(const std::string& text);

}  // namespace cisr
