#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "cisr/cmdp.hpp"
#include "cisr/intervention.hpp"

namespace cisr {

// Outcome of one environment step, as seen by a learner: which constraint
// sets the new state belongs to, whether the transition was a supervisor
// displacement, and whether an unsafe state was entered.
struct EnvStep {
    int next_state = 0;
    double reward = 0.0;
    bool triggered = false;
    bool failure = false;
    bool done = false;
    TerminationKind termination = TerminationKind::horizon;
    std::vector<std::uint8_t> constraint_hits;  // one flag per constraint
};

struct EnvReset {
    int state = 0;
    bool done = false;  // degenerate: initial state already terminal
    bool failure = false;
    TerminationKind termination = TerminationKind::goal;
    std::vector<std::uint8_t> constraint_hits;
};

// Minimal episodic interface the constrained learner trains against. The
// tabular implementation below wraps a CMDP plus an optional intervention;
// the continuous landing environment provides its own implementation on top
// of a state discretizer.
class TrainEnv {
  public:
    virtual ~TrainEnv() = default;
    virtual int n_states() const = 0;
    virtual int n_actions() const = 0;
    virtual int episode_horizon() const = 0;
    virtual const std::vector<ConstraintSpec>& constraints() const = 0;
    virtual EnvReset reset(Rng& rng) = 0;
    virtual EnvStep step(int action, Rng& rng) = 0;
};

// CMDP-backed environment. Without an intervention the single constraint is
// the unsafe-visit budget kappa. With one, entering a trigger state hands the
// next transition to the supervisor: the displaced transition has zero reward
// and its destination follows the reset rule (history-based for
// to_previous_state, kernel row otherwise).
class TabularTrainEnv final : public TrainEnv {
  public:
    explicit TabularTrainEnv(const TabularCMDP& base);
    TabularTrainEnv(const TabularCMDP& base, const Intervention& intervention);

    int n_states() const override { return base_.n_states; }
    int n_actions() const override { return base_.n_actions; }
    int episode_horizon() const override { return base_.horizon; }
    const std::vector<ConstraintSpec>& constraints() const override { return constraints_; }
    EnvReset reset(Rng& rng) override;
    EnvStep step(int action, Rng& rng) override;

    const TabularCMDP& base() const { return base_; }
    const Intervention* intervention() const { return has_intervention_ ? &intervention_ : nullptr; }

  private:
    std::vector<std::uint8_t> hits_for(int s) const;

    TabularCMDP base_;
    Intervention intervention_;
    bool has_intervention_ = false;
    std::vector<ConstraintSpec> constraints_;
    int cur_ = 0;
    int prev_ = 0;
    int steps_ = 0;
    bool episode_over_ = true;
};

// Empirical episode statistics gathered by an evaluator.
struct EpisodeStats {
    double ret = 0.0;
    int steps = 0;
    int failures = 0;
    std::vector<double> constraint_visits;
    TerminationKind termination = TerminationKind::horizon;
};

// Runs one full episode under `policy` (softmax rows already materialized as
// probabilities). Does not learn; used for feature estimates and deployment.
EpisodeStats run_episode(TrainEnv& env, const TabularPolicy& policy, Rng& rng);

// Deployment-style evaluation: runs whole episodes until at least
// `min_total_steps` environment steps have been consumed (always finishing
// the episode in progress), then averages per-episode quantities.
PolicyStats evaluate_policy_steps(TrainEnv& env, const TabularPolicy& policy,
                                  std::int64_t min_total_steps, std::uint64_t seed);

// Episode-count variant: exactly `episodes` episodes.
PolicyStats evaluate_policy_episodes(TrainEnv& env, const TabularPolicy& policy, int episodes,
                                     std::uint64_t seed);

}  // namespace cisr
