#include "cisr/cmdp.hpp"

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cisr/errors.hpp"

namespace cisr {

namespace {

constexpr double kRowTol = 1e-9;

void check_distribution_row(const double* row, int n, const std::string& what) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        if (row[i] < 0.0 || !std::isfinite(row[i]))
            throw NonStochasticRow(what + ": negative or non-finite mass");
        sum += row[i];
    }
    if (std::abs(sum - 1.0) > kRowTol)
        throw NonStochasticRow(what + ": mass sums to " + std::to_string(sum));
}

}  // namespace

TabularCMDP build_cmdp(int n_states, int n_actions, int horizon,
                       std::vector<double> transition, std::vector<double> reward,
                       std::vector<double> initial_dist,
                       std::vector<std::uint8_t> terminal, std::vector<std::uint8_t> unsafe,
                       double kappa, bool allow_unsafe_nonterminal) {
    if (n_states < 1 || n_actions < 1)
        throw DimensionMismatch("build_cmdp: need at least one state and one action");
    if (horizon < 1) throw DimensionMismatch("build_cmdp: horizon must be >= 1");
    const std::size_t tensor = static_cast<std::size_t>(n_states) * n_actions * n_states;
    if (transition.size() != tensor)
        throw DimensionMismatch("build_cmdp: transition tensor has wrong size");
    if (reward.size() != tensor) throw DimensionMismatch("build_cmdp: reward tensor has wrong size");
    if (initial_dist.size() != static_cast<std::size_t>(n_states))
        throw DimensionMismatch("build_cmdp: initial distribution has wrong size");
    if (terminal.size() != static_cast<std::size_t>(n_states) ||
        unsafe.size() != static_cast<std::size_t>(n_states))
        throw DimensionMismatch("build_cmdp: state mask has wrong size");
    if (kappa < 0.0 || !std::isfinite(kappa))
        throw DimensionMismatch("build_cmdp: safety budget must be finite and >= 0");

    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a)
            check_distribution_row(
                transition.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
                n_states, "transition row (s=" + std::to_string(s) + ",a=" + std::to_string(a) + ")");
    check_distribution_row(initial_dist.data(), n_states, "initial distribution");

    if (!allow_unsafe_nonterminal) {
        for (int s = 0; s < n_states; ++s)
            if (unsafe[s] && !terminal[s])
                throw UnsafeNotTerminal("build_cmdp: unsafe state " + std::to_string(s) +
                                        " is not terminal");
    }

    TabularCMDP m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.horizon = horizon;
    m.transition = std::move(transition);
    m.reward = std::move(reward);
    m.initial_dist = std::move(initial_dist);
    m.terminal = std::move(terminal);
    m.unsafe = std::move(unsafe);
    m.kappa = kappa;
    return m;
}

TabularPolicy TabularPolicy::uniform(int n_states, int n_actions) {
    TabularPolicy p;
    p.n_states = n_states;
    p.n_actions = n_actions;
    p.probs.assign(static_cast<std::size_t>(n_states) * n_actions, 1.0 / n_actions);
    return p;
}

TabularPolicy TabularPolicy::deterministic(int n_states, int n_actions,
                                           const std::vector<int>& actions) {
    if (actions.size() != static_cast<std::size_t>(n_states))
        throw DimensionMismatch("deterministic policy: one action per state required");
    TabularPolicy p;
    p.n_states = n_states;
    p.n_actions = n_actions;
    p.probs.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    for (int s = 0; s < n_states; ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions)
            throw DimensionMismatch("deterministic policy: action out of range");
        p.probs[static_cast<std::size_t>(s) * n_actions + actions[s]] = 1.0;
    }
    return p;
}

const char* to_string(TerminationKind k) {
    switch (k) {
        case TerminationKind::goal: return "goal";
        case TerminationKind::unsafe: return "unsafe";
        case TerminationKind::horizon: return "horizon";
        case TerminationKind::timeout: return "timeout";
    }
    return "?";
}

double Trajectory::total_reward() const {
    double sum = 0.0;
    for (const auto& st : steps) sum += st.reward;
    return sum;
}

int Trajectory::visits(const std::vector<std::uint8_t>& member) const {
    int count = member[initial_state] ? 1 : 0;
    for (const auto& st : steps)
        if (member[st.next_state]) ++count;
    return count;
}

Trajectory rollout(const TabularCMDP& cmdp, const TabularPolicy& policy, std::uint64_t seed) {
    if (policy.n_states != cmdp.n_states || policy.n_actions != cmdp.n_actions)
        throw DimensionMismatch("rollout: policy shape does not match model");
    Rng rng(seed);
    Trajectory traj;
    int s = static_cast<int>(rng.sample_row(cmdp.initial_dist));
    traj.initial_state = s;
    if (cmdp.is_terminal(s)) {
        traj.terminated_by = cmdp.is_unsafe(s) ? TerminationKind::unsafe : TerminationKind::goal;
        return traj;
    }
    for (int t = 0; t < cmdp.horizon; ++t) {
        const int a = static_cast<int>(
            rng.sample_row(policy.probs.data() + static_cast<std::size_t>(s) * cmdp.n_actions,
                           cmdp.n_actions));
        const int s2 = static_cast<int>(
            rng.sample_row(cmdp.transition.data() + cmdp.idx(s, a, 0), cmdp.n_states));
        traj.steps.push_back({s, a, s2, cmdp.r(s, a, s2), false});
        s = s2;
        if (cmdp.is_terminal(s)) {
            traj.terminated_by =
                cmdp.is_unsafe(s) ? TerminationKind::unsafe : TerminationKind::goal;
            return traj;
        }
    }
    traj.terminated_by = TerminationKind::horizon;
    return traj;
}

double exact_expected_return(const TabularCMDP& cmdp, const TabularPolicy& policy) {
    if (policy.n_states != cmdp.n_states || policy.n_actions != cmdp.n_actions)
        throw DimensionMismatch("exact_expected_return: policy shape does not match model");
    const int S = cmdp.n_states, A = cmdp.n_actions;
    std::vector<double> v_next(S, 0.0), v(S, 0.0);
    for (int t = cmdp.horizon - 1; t >= 0; --t) {
        for (int s = 0; s < S; ++s) {
            if (cmdp.is_terminal(s)) {
                v[s] = 0.0;
                continue;
            }
            double acc = 0.0;
            for (int a = 0; a < A; ++a) {
                const double pa = policy.prob(s, a);
                if (pa == 0.0) continue;
                const double* pr = cmdp.transition.data() + cmdp.idx(s, a, 0);
                const double* rr = cmdp.reward.data() + cmdp.idx(s, a, 0);
                double q = 0.0;
                for (int s2 = 0; s2 < S; ++s2)
                    if (pr[s2] > 0.0) q += pr[s2] * (rr[s2] + v_next[s2]);
                acc += pa * q;
            }
            v[s] = acc;
        }
        std::swap(v, v_next);
    }
    double ret = 0.0;
    for (int s = 0; s < S; ++s) ret += cmdp.initial_dist[s] * v_next[s];
    return ret;
}

double exact_expected_visits(const TabularCMDP& cmdp, const TabularPolicy& policy,
                             const std::vector<std::uint8_t>& target) {
    if (policy.n_states != cmdp.n_states || policy.n_actions != cmdp.n_actions)
        throw DimensionMismatch("exact_expected_visits: policy shape does not match model");
    if (target.size() != static_cast<std::size_t>(cmdp.n_states))
        throw DimensionMismatch("exact_expected_visits: target mask has wrong size");
    const int S = cmdp.n_states, A = cmdp.n_actions;
    // occ[t][s] = P(episode still live at t and s_t = s). Mass that enters a
    // terminal state is counted at its arrival slot and dropped afterwards.
    std::vector<double> occ = cmdp.initial_dist, next(S, 0.0);
    double visits = 0.0;
    for (int t = 0; t <= cmdp.horizon; ++t) {
        for (int s = 0; s < S; ++s)
            if (target[s]) visits += occ[s];
        if (t == cmdp.horizon) break;
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < S; ++s) {
            const double mass = occ[s];
            if (mass == 0.0 || cmdp.is_terminal(s)) continue;
            for (int a = 0; a < A; ++a) {
                const double pa = policy.prob(s, a);
                if (pa == 0.0) continue;
                const double w = mass * pa;
                const double* pr = cmdp.transition.data() + cmdp.idx(s, a, 0);
                for (int s2 = 0; s2 < S; ++s2)
                    if (pr[s2] > 0.0) next[s2] += w * pr[s2];
            }
        }
        std::swap(occ, next);
    }
    return visits;
}

double exact_expected_visits(const TabularCMDP& cmdp, const TabularPolicy& policy,
                             const std::vector<int>& target_states) {
    return exact_expected_visits(cmdp, policy, state_mask(cmdp.n_states, target_states));
}

std::vector<std::uint8_t> state_mask(int n_states, const std::vector<int>& states) {
    std::vector<std::uint8_t> mask(n_states, 0);
    for (int s : states) {
        if (s < 0 || s >= n_states) throw DimensionMismatch("state_mask: state out of range");
        mask[s] = 1;
    }
    return mask;
}

bool is_feasible(const TabularCMDP& cmdp, const TabularPolicy& policy, double tol) {
    return exact_expected_visits(cmdp, policy, cmdp.unsafe) <= cmdp.kappa + tol;
}

std::string cmdp_to_json(const TabularCMDP& m) {
    nlohmann::json j;
    j["format"] = "cisr-cmdp/v1";
    j["n_states"] = m.n_states;
    j["n_actions"] = m.n_actions;
    j["horizon"] = m.horizon;
    j["kappa"] = m.kappa;
    nlohmann::json init = nlohmann::json::array();
    for (int s = 0; s < m.n_states; ++s)
        if (m.initial_dist[s] > 0.0) init.push_back({s, m.initial_dist[s]});
    j["initial"] = std::move(init);
    nlohmann::json term = nlohmann::json::array(), uns = nlohmann::json::array();
    for (int s = 0; s < m.n_states; ++s) {
        if (m.terminal[s]) term.push_back(s);
        if (m.unsafe[s]) uns.push_back(s);
    }
    j["terminal"] = std::move(term);
    j["unsafe"] = std::move(uns);
    nlohmann::json trans = nlohmann::json::array(), rew = nlohmann::json::array();
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a)
            for (int s2 = 0; s2 < m.n_states; ++s2) {
                const double p = m.p(s, a, s2);
                if (p > 0.0) {
                    trans.push_back({s, a, s2, p});
                    const double r = m.r(s, a, s2);
                    if (r != 0.0) rew.push_back({s, a, s2, r});
                }
            }
    j["transitions"] = std::move(trans);
    j["rewards"] = std::move(rew);
    return j.dump(2);
}

TabularCMDP cmdp_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigInvalid(std::string("cmdp_from_json: ") + e.what());
    }
    try {
        if (j.value("format", std::string()) != "cisr-cmdp/v1")
            throw ConfigInvalid("cmdp_from_json: unknown format tag");
        const int S = j.at("n_states").get<int>();
        const int A = j.at("n_actions").get<int>();
        const int horizon = j.at("horizon").get<int>();
        const double kappa = j.value("kappa", 0.0);
        if (S < 1 || A < 1) throw DimensionMismatch("cmdp_from_json: bad dimensions");
        const std::size_t tensor = static_cast<std::size_t>(S) * A * S;
        std::vector<double> transition(tensor, 0.0), reward(tensor, 0.0), initial(S, 0.0);
        std::vector<std::uint8_t> terminal(S, 0), unsafe(S, 0);
        for (const auto& e : j.at("initial")) initial.at(e.at(0).get<int>()) = e.at(1).get<double>();
        for (const auto& s : j.at("terminal")) terminal.at(s.get<int>()) = 1;
        for (const auto& s : j.at("unsafe")) unsafe.at(s.get<int>()) = 1;
        auto flat = [&](const nlohmann::json& e) {
            const int s = e.at(0).get<int>(), a = e.at(1).get<int>(), s2 = e.at(2).get<int>();
            if (s < 0 || s >= S || a < 0 || a >= A || s2 < 0 || s2 >= S)
                throw DimensionMismatch("cmdp_from_json: triple index out of range");
            return (static_cast<std::size_t>(s) * A + a) * S + s2;
        };
        for (const auto& e : j.at("transitions")) transition[flat(e)] = e.at(3).get<double>();
        for (const auto& e : j.at("rewards")) reward[flat(e)] = e.at(3).get<double>();
        return build_cmdp(S, A, horizon, std::move(transition), std::move(reward),
                          std::move(initial), std::move(terminal), std::move(unsafe), kappa,
                          j.value("allow_unsafe_nonterminal", false));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigInvalid(std::string("cmdp_from_json: ") + e.what());
    }
}

}  // namespace cisr
