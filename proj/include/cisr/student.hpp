#pragma once

#include <cstdint>
#include <vector>

#include "cisr/sim.hpp"

namespace cisr {

// Hyperparameters of the Lagrangian student: an exponentiated-gradient
// ascent on the constraint multipliers wrapped around a tabular softmax
// advantage actor-critic on the penalized reward.
struct SolverConfig {
    double eta = 1.0;      // dual learning rate
    double bound_B = 0.5;  // total multiplier budget (simplex scale)
    int primal_steps_per_epoch = 1000;
    int epochs_per_unit = 10;
    double learning_rate = 0.05;        // policy logits step size
    double value_learning_rate = 0.2;   // critic step size
    double ent_coef = 0.05;             // entropy bonus weight
    double exploration_temperature = 1.0;
    int eval_rollouts = 50;  // episodes used by evaluate_features
};

// Multipliers live on the scaled simplex {sum(lambda) <= bound_B,
// lambda >= 0}; the remaining mass bound_B - sum(lambda) is an explicit
// slack coordinate that is carried through the update un-exponentiated.
struct LagrangeState {
    std::vector<double> lambda;
    double bound_B = 0.5;

    static LagrangeState uniform(int n_constraints, double bound_B);
    double slack() const;
};

// One multiplicative dual step. `gaps` holds (estimated visits - tolerance)
// per constraint. Weights: w_c = lambda_c * exp(eta * gap_c), slack weight
// w_0 = B - sum(lambda); the new multipliers are B * w_c / (w_0 + sum_j w_j).
// Throws NegativeLambda on corrupt input and ZeroMassDegenerate when every
// weight underflows to zero.
LagrangeState dual_update_eg(const LagrangeState& state, const std::vector<double>& gaps,
                             double eta);

// Learner tables. optimizer_scratch is transient (reset on transfer).
struct StudentState {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> logits;       // [s][a]
    std::vector<double> value_table;  // [s][a] action values
    std::uint64_t steps_done = 0;     // optimizer scratch

    static StudentState fresh(int n_states, int n_actions);
    // Copies policy and critic tables in, zeroes the optimizer scratch.
    static StudentState warm_start(const StudentState& previous);
    TabularPolicy policy(double temperature = 1.0) const;
};

// Per-epoch training log row.
struct EpochStats {
    int epoch = 0;
    double return_estimate = 0.0;
    std::vector<double> violation_gap;  // per constraint
    std::vector<double> lambda;         // per constraint
    std::int64_t training_failures = 0; // cumulative unsafe entries
    std::int64_t episodes = 0;
};

struct TrainingStats {
    std::vector<EpochStats> epochs;
    std::int64_t total_steps = 0;
    std::int64_t training_failures = 0;
};

struct TrainResult {
    StudentState state;
    LagrangeState duals;
    TrainingStats stats;
};

// Runs ceil(budget_steps / primal_steps_per_epoch) primal epochs with one
// dual update after each. The scalarized reward of a step into s' is
// r - sum_c lambda_c * [s' in C_c]; gap estimates come from episodes
// completed within the epoch. Throws BudgetZero for budget_steps < 1.
TrainResult train_student(TrainEnv& env, const SolverConfig& config, std::int64_t budget_steps,
                          std::uint64_t seed, const StudentState* warm_start = nullptr);

// Teacher-facing policy features: [0] empirical return estimate in the
// supervised model, [1] empirical trigger visits minus tau (the last
// constraint of the environment). Estimated from n_rollouts full episodes.
struct PolicyFeatures {
    double value_estimate = 0.0;
    double violation_gap = 0.0;
};

PolicyFeatures evaluate_features(TrainEnv& env, const StudentState& student,
                                 const SolverConfig& config, int n_rollouts, std::uint64_t seed);

}  // namespace cisr
