#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "cisr/cmdp.hpp"
#include "cisr/gp.hpp"
#include "cisr/intervention.hpp"
#include "cisr/sim.hpp"
#include "cisr/student.hpp"

namespace cisr {

// A reactive threshold-switching curriculum: K+1 intervention ids and K
// threshold pairs, 3K+1 scalars in total. The teacher walks the sequence
// left to right, advancing one slot whenever the student's features clear
// the current stage's thresholds.
struct CurriculumPolicyParams {
    std::vector<int> intervention_sequence;                    // K+1 ids
    std::vector<std::pair<double, double>> switch_thresholds;  // K of (return, gap)

    int max_switches() const { return static_cast<int>(switch_thresholds.size()); }
};

// Flat layout for the optimizer: [ret_0, gap_0, ..., ret_{K-1}, gap_{K-1},
// id_0, ..., id_K]. Ids are serialized as exact integers in doubles.
std::vector<double> params_to_vector(const CurriculumPolicyParams& params);
CurriculumPolicyParams params_from_vector(const std::vector<double>& flat, int max_switches);

// What the teacher sees after each interaction unit: the return estimate in
// the supervised model and the empirical trigger-visit gap (visits - tau).
struct TeacherObservation {
    double value_estimate = 0.0;
    double violation_gap = 0.0;
};

// Advances the stage iff stage < K and value >= ret-threshold and
// gap <= gap-threshold (both inclusive), then returns the id for the coming
// unit and the updated stage. Throws StageOutOfRange.
std::pair<int, int> decide_intervention(const CurriculumPolicyParams& params, int stage,
                                        const TeacherObservation& obs);

// Outer-loop knobs of one teaching round and the teacher's reward.
struct CISRConfig {
    int n_rounds = 20;           // optimization rounds after the initial design
    int units_per_student = 11;  // interaction units per round
    std::int64_t unit_steps = 10000;
    int max_switches = 2;            // K
    std::int64_t eval_horizon = 10000;  // deployment budget in the plain model
    double r_max = 6.0;
    std::int64_t horizon_T = 200;
    double kappa = 0.1;  // deployment failure budget per episode
};

struct RoundResult {
    CurriculumPolicyParams params;
    double final_value = 0.0;  // teacher reward of the deployed final policy
    std::vector<TeacherObservation> observations;  // one per unit
    std::int64_t training_failures = 0;
    std::vector<std::pair<int, int>> switch_log;  // (unit, id); first entry is unit 0
    PolicyStats deploy_stats;
    StudentState final_student;
};

// Deployment return, except a mean unsafe-visit rate beyond kappa collapses
// the reward to -2 * horizon_T * r_max.
double teacher_reward(const PolicyStats& final_policy_eval, const CISRConfig& config);

// Environment plumbing for a round: make_train(id) builds the supervised
// training environment for intervention `id`, make_deploy() the plain model
// the final policy is judged in.
struct RoundEnvs {
    std::function<std::unique_ptr<TrainEnv>(int)> make_train;
    std::function<std::unique_ptr<TrainEnv>()> make_deploy;
    int n_interventions = 0;
};

// Analysis hook, called after every interaction unit with the frozen student.
using UnitObserver =
    std::function<void(int unit, int intervention_id, const StudentState& student,
                       const TrainingStats& unit_stats)>;

// One student's curriculum: fresh student, then for each unit pick the
// intervention (threshold rule from the previous unit's features), train for
// unit_steps with policy and critic carried over, and evaluate features.
// Ends with a deployment evaluation in the plain model.
RoundResult run_round(const CurriculumPolicyParams& params, const RoundEnvs& envs,
                      const CISRConfig& config, const SolverConfig& solver_cfg,
                      std::uint64_t seed, const UnitObserver& observer = nullptr);
RoundResult run_round(const CurriculumPolicyParams& params, const TabularCMDP& base,
                      const std::vector<Intervention>& interventions, const CISRConfig& config,
                      const SolverConfig& solver_cfg, std::uint64_t seed);

// Bayesian-optimization side of the outer loop.
struct TeacherOptConfig {
    int init_count = 10;        // random curricula before the GP takes over
    int students_per_datum = 1; // round evaluations averaged into one target
    double ret_lo = 0.0, ret_hi = 6.0;   // box for return thresholds
    double gap_lo = -0.5, gap_hi = 0.5;  // box for gap thresholds
    GPHyperpriors priors;       // sized for 3K+1 dimensions
    UCBConfig ucb;
    int map_restarts = 4;
};

// The mixed search space for 3K+1 parameters over `n_interventions` ids.
ParamSpace curriculum_param_space(int max_switches, int n_interventions,
                                  const TeacherOptConfig& cfg);

struct OptRecord {
    int round = 0;
    bool from_ucb = false;  // false for the initial random design
    std::vector<double> raw_params;
    double value = 0.0;
    std::int64_t training_failures = 0;
};

struct OptimizeTrace {
    std::vector<OptRecord> records;
    std::vector<double> best_raw;
    double best_value = 0.0;
    GPModel dataset;        // raw relaxed inputs, raw targets
    GPHyperparams fitted;   // hyperparameters after the last MAP fit
};

// Generic GP-UCB loop: init_count space samples, then n_rounds proposals,
// each scored by `evaluate(raw, round) -> (value, training failures)`.
OptimizeTrace optimize_loop(
    const ParamSpace& space,
    const std::function<std::pair<double, std::int64_t>(const std::vector<double>&, int)>&
        evaluate,
    const TeacherOptConfig& cfg, int n_rounds, std::uint64_t seed);

struct OptimizeResult {
    CurriculumPolicyParams best_params;
    double best_value = 0.0;
    OptimizeTrace trace;
};

// Full curriculum induction: each datum is the mean teacher reward of
// students_per_datum independent rounds under the proposed parameters.
OptimizeResult cisr_optimize(const RoundEnvs& envs, const CISRConfig& config,
                             const SolverConfig& solver_cfg, const TeacherOptConfig& opt_cfg,
                             std::uint64_t seed);
OptimizeResult cisr_optimize(const TabularCMDP& base,
                             const std::vector<Intervention>& interventions,
                             const CISRConfig& config, const SolverConfig& solver_cfg,
                             const TeacherOptConfig& opt_cfg, std::uint64_t seed);

}  // namespace cisr
