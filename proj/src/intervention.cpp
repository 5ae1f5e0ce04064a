#include "cisr/intervention.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "cisr/errors.hpp"

namespace cisr {

const char* to_string(ResetMode m) {
    switch (m) {
        case ResetMode::fixed_kernel: return "fixed_kernel";
        case ResetMode::to_initial_distribution: return "to_initial_distribution";
        case ResetMode::to_previous_state: return "to_previous_state";
    }
    return "?";
}

std::vector<int> Intervention::trigger_states() const {
    std::vector<int> out;
    for (int s = 0; s < static_cast<int>(trigger.size()); ++s)
        if (trigger[s]) out.push_back(s);
    return out;
}

namespace {

void validate_kernel(const std::vector<std::uint8_t>& trigger,
                     const std::vector<double>& kernel, const std::string& name) {
    const int n = static_cast<int>(trigger.size());
    if (kernel.size() != static_cast<std::size_t>(n) * n)
        throw DimensionMismatch("intervention '" + name + "': reset kernel has wrong size");
    for (int s = 0; s < n; ++s) {
        if (!trigger[s]) continue;
        const double* row = kernel.data() + static_cast<std::size_t>(s) * n;
        double sum = 0.0;
        for (int s2 = 0; s2 < n; ++s2) {
            if (row[s2] < 0.0 || !std::isfinite(row[s2]))
                throw NonStochasticRow("intervention '" + name + "': bad reset row for state " +
                                       std::to_string(s));
            if (row[s2] > 0.0 && trigger[s2])
                throw ResetIntoTrigger("intervention '" + name + "': reset from state " +
                                       std::to_string(s) + " puts mass on trigger state " +
                                       std::to_string(s2));
            sum += row[s2];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw NonStochasticRow("intervention '" + name + "': reset row for state " +
                                   std::to_string(s) + " sums to " + std::to_string(sum));
    }
}

}  // namespace

Intervention make_intervention(std::string name, int n_states,
                               const std::vector<int>& trigger_states, ResetMode mode,
                               std::vector<double> reset_kernel, double tau, double kappa_i) {
    if (n_states < 1) throw DimensionMismatch("make_intervention: need at least one state");
    if (tau < 0.0 || kappa_i < 0.0 || !std::isfinite(tau) || !std::isfinite(kappa_i))
        throw DimensionMismatch("make_intervention: tolerances must be finite and >= 0");
    Intervention iv;
    iv.name = std::move(name);
    iv.trigger.assign(n_states, 0);
    for (int s : trigger_states) {
        if (s < 0 || s >= n_states)
            throw TriggerOutOfRange("intervention '" + iv.name + "': trigger state " +
                                    std::to_string(s) + " out of range");
        iv.trigger[s] = 1;
    }
    iv.mode = mode;
    iv.tau = tau;
    iv.kappa_i = kappa_i;
    if (reset_kernel.empty())
        reset_kernel.assign(static_cast<std::size_t>(n_states) * n_states, 0.0);
    validate_kernel(iv.trigger, reset_kernel, iv.name);
    iv.reset_kernel = std::move(reset_kernel);
    return iv;
}

std::vector<double> kernel_from_initial(const TabularCMDP& base,
                                        const std::vector<std::uint8_t>& trigger) {
    const int n = base.n_states;
    std::vector<double> kernel(static_cast<std::size_t>(n) * n, 0.0);
    for (int s = 0; s < n; ++s) {
        if (!trigger[s]) continue;
        double* row = kernel.data() + static_cast<std::size_t>(s) * n;
        for (int s2 = 0; s2 < n; ++s2) row[s2] = base.initial_dist[s2];
    }
    return kernel;
}

std::vector<double> nearest_safe_predecessor_kernel(const TabularCMDP& base,
                                                    const std::vector<std::uint8_t>& trigger) {
    const int n = base.n_states;
    // Reverse adjacency of the dynamics support graph.
    std::vector<std::vector<int>> preds(n);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < base.n_actions; ++a) {
            const double* row = base.transition.data() + base.idx(s, a, 0);
            for (int s2 = 0; s2 < n; ++s2)
                if (row[s2] > 0.0 && s2 != s) preds[s2].push_back(s);
        }
    for (auto& p : preds) {
        std::sort(p.begin(), p.end());
        p.erase(std::unique(p.begin(), p.end()), p.end());
    }

    std::vector<double> kernel(static_cast<std::size_t>(n) * n, 0.0);
    for (int d = 0; d < n; ++d) {
        if (!trigger[d]) continue;
        // BFS outward over predecessor edges until a non-trigger layer shows up.
        std::vector<std::uint8_t> seen(n, 0);
        std::deque<int> frontier{d};
        seen[d] = 1;
        std::vector<int> found;
        while (!frontier.empty() && found.empty()) {
            std::deque<int> next;
            for (int s : frontier)
                for (int p : preds[s])
                    if (!seen[p]) {
                        seen[p] = 1;
                        if (!trigger[p])
                            found.push_back(p);
                        else
                            next.push_back(p);
                    }
            std::sort(found.begin(), found.end());
            frontier = std::move(next);
        }
        if (found.empty()) {
            // No predecessor outside the trigger set: the state cannot be
            // entered in the supervised model, so any valid row works.
            for (int s = 0; s < n; ++s)
                if (!trigger[s]) found.push_back(s);
            if (found.empty())
                throw ResetIntoTrigger(
                    "nearest_safe_predecessor_kernel: every state triggers, no reset target");
        }
        double* row = kernel.data() + static_cast<std::size_t>(d) * n;
        const double mass = 1.0 / static_cast<double>(found.size());
        for (int s : found) row[s] = mass;
    }
    return kernel;
}

InducedCMDP induce(const TabularCMDP& base, const Intervention& intervention) {
    if (intervention.trigger.size() != static_cast<std::size_t>(base.n_states))
        throw DimensionMismatch("induce: intervention built for a different state count");
    validate_kernel(intervention.trigger, intervention.reset_kernel, intervention.name);

    const int S = base.n_states, A = base.n_actions;
    std::vector<double> transition = base.transition;
    std::vector<double> reward = base.reward;
    std::vector<std::uint8_t> terminal = base.terminal;
    for (int s = 0; s < S; ++s) {
        if (!intervention.triggers(s)) continue;
        terminal[s] = 0;  // supervised states continue via the reset kernel
        const double* krow = intervention.kernel_row(s);
        for (int a = 0; a < A; ++a) {
            double* prow = transition.data() + base.idx(s, a, 0);
            double* rrow = reward.data() + base.idx(s, a, 0);
            for (int s2 = 0; s2 < S; ++s2) {
                prow[s2] = krow[s2];
                rrow[s2] = 0.0;
            }
        }
    }

    InducedCMDP out;
    out.cmdp = build_cmdp(S, A, base.horizon, std::move(transition), std::move(reward),
                          base.initial_dist, std::move(terminal), base.unsafe,
                          intervention.kappa_i, /*allow_unsafe_nonterminal=*/true);
    out.intervention = intervention;
    out.constraints = {{"unsafe", base.unsafe, intervention.kappa_i}};
    if (!intervention.trigger_states().empty())
        out.constraints.push_back(
            {"trigger:" + intervention.name, intervention.trigger, intervention.tau});
    return out;
}

Intervention make_identity_intervention(int n_states, double kappa) {
    return make_intervention("identity", n_states, {}, ResetMode::fixed_kernel, {}, 0.0, kappa);
}

bool check_learning_safety(const TabularCMDP& base, const Intervention& intervention) {
    if (intervention.trigger.size() != static_cast<std::size_t>(base.n_states))
        throw DimensionMismatch("check_learning_safety: state count mismatch");
    const int S = base.n_states;
    for (int s = 0; s < S; ++s)
        if (base.unsafe[s] && !intervention.triggers(s)) return false;
    for (int s = 0; s < S; ++s) {
        if (intervention.triggers(s) || base.is_terminal(s)) continue;
        for (int a = 0; a < base.n_actions; ++a) {
            const double* row = base.transition.data() + base.idx(s, a, 0);
            for (int s2 = 0; s2 < S; ++s2)
                if (row[s2] > 0.0 && base.unsafe[s2]) return false;
        }
    }
    return true;
}

bool check_eventual_safety(const Intervention& intervention, double kappa_base) {
    return intervention.tau + intervention.kappa_i <= kappa_base + 1e-12;
}

bool induced_feasible(const InducedCMDP& induced, const TabularPolicy& policy, double tol) {
    for (const auto& c : induced.constraints)
        if (exact_expected_visits(induced.cmdp, policy, c.member) > c.tolerance + tol)
            return false;
    return true;
}

}  // namespace cisr
