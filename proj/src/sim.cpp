#include "cisr/sim.hpp"

#include <algorithm>

#include "cisr/errors.hpp"

namespace cisr {

TabularTrainEnv::TabularTrainEnv(const TabularCMDP& base) : base_(base) {
    constraints_ = {{"unsafe", base_.unsafe, base_.kappa}};
}

TabularTrainEnv::TabularTrainEnv(const TabularCMDP& base, const Intervention& intervention)
    : base_(base), intervention_(intervention), has_intervention_(true) {
    if (intervention_.trigger.size() != static_cast<std::size_t>(base_.n_states))
        throw DimensionMismatch("TabularTrainEnv: intervention state count mismatch");
    const bool empty_trigger =
        std::none_of(intervention_.trigger.begin(), intervention_.trigger.end(),
                     [](std::uint8_t b) { return b != 0; });
    if (empty_trigger) {
        // Identity intervention: supervision never fires and the vacuous
        // trigger constraint is dropped so training matches the plain model.
        has_intervention_ = false;
        constraints_ = {{"unsafe", base_.unsafe, intervention_.kappa_i}};
        return;
    }
    constraints_ = {
        {"unsafe", base_.unsafe, intervention_.kappa_i},
        {"trigger:" + intervention_.name, intervention_.trigger, intervention_.tau},
    };
}

std::vector<std::uint8_t> TabularTrainEnv::hits_for(int s) const {
    std::vector<std::uint8_t> hits(constraints_.size(), 0);
    for (std::size_t c = 0; c < constraints_.size(); ++c) hits[c] = constraints_[c].member[s];
    return hits;
}

EnvReset TabularTrainEnv::reset(Rng& rng) {
    cur_ = static_cast<int>(rng.sample_row(base_.initial_dist));
    prev_ = cur_;
    steps_ = 0;
    episode_over_ = false;
    EnvReset out;
    out.state = cur_;
    out.constraint_hits = hits_for(cur_);
    out.failure = base_.is_unsafe(cur_);
    const bool triggered = has_intervention_ && intervention_.triggers(cur_);
    if (base_.is_terminal(cur_) && !triggered) {
        out.done = true;
        episode_over_ = true;
        out.termination = out.failure ? TerminationKind::unsafe : TerminationKind::goal;
    }
    return out;
}

EnvStep TabularTrainEnv::step(int action, Rng& rng) {
    if (episode_over_) throw DimensionMismatch("TabularTrainEnv::step called on finished episode");
    if (action < 0 || action >= base_.n_actions)
        throw DimensionMismatch("TabularTrainEnv::step: action out of range");

    EnvStep out;
    const bool supervised = has_intervention_ && intervention_.triggers(cur_);
    int next = 0;
    if (supervised) {
        // Supervisor displacement: the agent's action is immaterial, the
        // transition carries zero reward.
        out.triggered = true;
        if (intervention_.mode == ResetMode::to_previous_state && !intervention_.triggers(prev_)) {
            next = prev_;
        } else {
            // No usable history (episode started on a trigger state): fall
            // back to the intervention's fixed kernel row.
            next = static_cast<int>(
                rng.sample_row(intervention_.kernel_row(cur_), base_.n_states));
        }
        out.reward = 0.0;
    } else {
        next = static_cast<int>(
            rng.sample_row(base_.transition.data() + base_.idx(cur_, action, 0), base_.n_states));
        out.reward = base_.r(cur_, action, next);
    }

    if (!supervised) prev_ = cur_;  // the state to return to if `next` triggers
    cur_ = next;
    ++steps_;
    out.next_state = next;
    out.constraint_hits = hits_for(next);
    out.failure = base_.is_unsafe(next);

    const bool next_triggers = has_intervention_ && intervention_.triggers(next);
    if (base_.is_terminal(next) && !next_triggers) {
        out.done = true;
        out.termination = out.failure ? TerminationKind::unsafe : TerminationKind::goal;
    } else if (steps_ >= base_.horizon) {
        out.done = true;
        out.termination = TerminationKind::horizon;
    }
    episode_over_ = out.done;
    return out;
}

EpisodeStats run_episode(TrainEnv& env, const TabularPolicy& policy, Rng& rng) {
    EpisodeStats stats;
    stats.constraint_visits.assign(env.constraints().size(), 0.0);
    EnvReset start = env.reset(rng);
    for (std::size_t c = 0; c < stats.constraint_visits.size(); ++c)
        stats.constraint_visits[c] += start.constraint_hits[c];
    if (start.failure) ++stats.failures;
    if (start.done) {
        stats.termination = start.termination;
        return stats;
    }
    int s = start.state;
    while (true) {
        const int a = static_cast<int>(rng.sample_row(
            policy.probs.data() + static_cast<std::size_t>(s) * env.n_actions(), env.n_actions()));
        const EnvStep step = env.step(a, rng);
        stats.ret += step.reward;
        ++stats.steps;
        for (std::size_t c = 0; c < stats.constraint_visits.size(); ++c)
            stats.constraint_visits[c] += step.constraint_hits[c];
        if (step.failure) ++stats.failures;
        s = step.next_state;
        if (step.done) {
            stats.termination = step.termination;
            break;
        }
    }
    return stats;
}

namespace {

PolicyStats summarize(const std::vector<EpisodeStats>& episodes, std::size_t n_constraints) {
    PolicyStats out;
    out.trigger_visits.assign(n_constraints, 0.0);
    out.episodes = static_cast<std::int64_t>(episodes.size());
    if (episodes.empty()) return out;
    double failures = 0.0, goals = 0.0;
    for (const auto& ep : episodes) {
        out.expected_return += ep.ret;
        failures += ep.failures;
        if (ep.termination == TerminationKind::goal) goals += 1.0;
        for (std::size_t c = 0; c < n_constraints; ++c)
            out.trigger_visits[c] += ep.constraint_visits[c];
    }
    const double n = static_cast<double>(episodes.size());
    out.expected_return /= n;
    out.expected_unsafe_visits = failures / n;
    out.success_rate = goals / n;
    for (auto& v : out.trigger_visits) v /= n;
    return out;
}

}  // namespace

PolicyStats evaluate_policy_steps(TrainEnv& env, const TabularPolicy& policy,
                                  std::int64_t min_total_steps, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<EpisodeStats> episodes;
    std::int64_t consumed = 0;
    while (consumed < min_total_steps || episodes.empty()) {
        episodes.push_back(run_episode(env, policy, rng));
        consumed += episodes.back().steps;
        if (episodes.back().steps == 0 && consumed == 0 && episodes.size() > 4096)
            break;  // degenerate terminal-start model; avoid spinning forever
    }
    return summarize(episodes, env.constraints().size());
}

PolicyStats evaluate_policy_episodes(TrainEnv& env, const TabularPolicy& policy, int episodes,
                                     std::uint64_t seed) {
    Rng rng(seed);
    std::vector<EpisodeStats> eps;
    eps.reserve(episodes);
    for (int i = 0; i < episodes; ++i) eps.push_back(run_episode(env, policy, rng));
    return summarize(eps, env.constraints().size());
}

}  // namespace cisr
