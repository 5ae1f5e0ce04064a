#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cisr/cmdp.hpp"

namespace cisr {

// How a triggered intervention chooses the state it hands back to the agent.
// `to_previous_state` is history-dependent and therefore only available on
// the simulator path; exact dynamic programs use the intervention's fixed
// kernel instead (see nearest_safe_predecessor_kernel).
enum class ResetMode { fixed_kernel, to_initial_distribution, to_previous_state };

const char* to_string(ResetMode m);

// A trigger set plus a reset kernel: entering a trigger state hands control
// to the supervisor, which places the agent according to the kernel (or the
// history rule) with zero reward for the displaced transition. `tau` bounds
// the expected trigger visits per episode; `kappa_i` bounds expected unsafe
// visits while supervised.
struct Intervention {
    std::string name;
    std::vector<std::uint8_t> trigger;   // membership mask over states
    ResetMode mode = ResetMode::fixed_kernel;
    std::vector<double> reset_kernel;    // [s][s'], rows meaningful for trigger states
    double tau = 0.0;
    double kappa_i = 0.0;

    bool triggers(int s) const { return trigger[s] != 0; }
    const double* kernel_row(int s) const {
        return reset_kernel.data() + static_cast<std::size_t>(s) * trigger.size();
    }
    std::vector<int> trigger_states() const;
};

// Validates and assembles an intervention for an `n_states`-state model.
// Every trigger state must have a kernel row that is a distribution with
// zero mass on trigger states (ResetIntoTrigger otherwise).
Intervention make_intervention(std::string name, int n_states,
                               const std::vector<int>& trigger_states, ResetMode mode,
                               std::vector<double> reset_kernel, double tau, double kappa_i);

// Degenerate intervention with an empty trigger set: training under it is
// exactly training in the plain model with unsafe budget `kappa`.
Intervention make_identity_intervention(int n_states, double kappa);

// Kernel whose trigger rows all equal the model's initial distribution.
std::vector<double> kernel_from_initial(const TabularCMDP& base,
                                        const std::vector<std::uint8_t>& trigger);

// Markov stand-in for the to-previous-state rule: each trigger state's row
// spreads mass uniformly over its nearest non-trigger predecessors (breadth
// first over the reverse edges of the base dynamics).
std::vector<double> nearest_safe_predecessor_kernel(const TabularCMDP& base,
                                                    const std::vector<std::uint8_t>& trigger);

// One expectation constraint of the induced model: E[visits to member] <= tolerance.
struct ConstraintSpec {
    std::string name;
    std::vector<std::uint8_t> member;
    double tolerance = 0.0;
};

// The supervised model: base dynamics off the trigger set, reset kernel on
// it, rewards zeroed for transitions leaving trigger states. Carries both
// expectation constraints (unsafe budget kappa_i, trigger budget tau).
struct InducedCMDP {
    TabularCMDP cmdp;  // materialized tensors; trigger states are not terminal
    Intervention intervention;
    std::vector<ConstraintSpec> constraints;  // [0]: unsafe set, [1]: trigger set
};

InducedCMDP induce(const TabularCMDP& base, const Intervention& intervention);

// True iff the trigger set blankets the unsafe set: every unsafe state
// triggers, and no state outside the trigger set can reach an unsafe state
// in one step. Under this condition supervised learning cannot visit an
// unsafe state (beyond initial mass already on it).
bool check_learning_safety(const TabularCMDP& base, const Intervention& intervention);

// True iff tau + kappa_i <= kappa_base (+1e-12), the premise under which
// every policy feasible in the supervised model stays feasible unsupervised.
bool check_eventual_safety(const Intervention& intervention, double kappa_base);

// Eq-style feasibility in the induced model: both constraints within tol.
bool induced_feasible(const InducedCMDP& induced, const TabularPolicy& policy,
                      double tol = 1e-9);

}  // namespace cisr
