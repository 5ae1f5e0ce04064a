#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cisr/config.hpp"
#include "cisr/oracle.hpp"
#include "cisr/teacher.hpp"

namespace cisr {

// One concrete environment family wired up for the curriculum driver. The
// factories own their model through shared pointers, so the bundle can be
// copied or moved freely.
struct EnvBundle {
    EnvironmentKind kind = EnvironmentKind::frozen_lake;
    RoundEnvs envs;                              // supervised training + deployment
    RoundEnvs plain_envs;                        // training directly in the real model
    std::vector<std::string> intervention_names;
    // Tabular side, set for frozen_lake and custom_cmdp, empty for lander.
    std::shared_ptr<const TabularCMDP> base;
    std::shared_ptr<const std::vector<Intervention>> interventions;
};

EnvBundle build_env_bundle(const ExperimentConfig& cfg);

// Index of `name` in the bundle's intervention names. Throws ConfigInvalid.
int intervention_index(const EnvBundle& bundle, const std::string& name);

// Per-unit analysis row for one student.
struct UnitRecord {
    int unit = 0;
    int intervention_id = 0;
    double value_estimate = 0.0;     // supervised return feature the teacher saw
    double violation_gap = 0.0;      // trigger visits minus tolerance
    std::int64_t unit_failures = 0;  // training failures inside this unit
    bool probed = false;             // deployment probe ran (unit_eval_steps > 0)
    double deploy_return = 0.0;
    double deploy_success = 0.0;
    double deploy_unsafe = 0.0;
};

struct StudentRunRecord {
    int student_id = 0;
    std::uint64_t seed = 0;
    std::vector<UnitRecord> units;
    std::vector<std::pair<int, int>> switch_log;  // (unit, id)
    std::int64_t training_failures = 0;
    double teacher_reward = 0.0;
    PolicyStats deploy_stats;
};

struct ExperimentResult {
    CurriculumPolicyParams params;  // curriculum that was actually run
    double params_value = 0.0;      // optimizer's estimate, when one produced them
    std::vector<StudentRunRecord> students;
    std::vector<std::string> files;  // everything written under output_dir
};

// Trains one student per seed under the configured curriculum mode and
// writes students.csv, final.csv and aggregate.csv under cfg.output_dir.
// `optimized` mode runs the teacher optimization inline first.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Single-student convenience used by the CLI: same pipeline, one seat.
StudentRunRecord run_single_student(const ExperimentConfig& cfg, const EnvBundle& bundle,
                                    const CurriculumPolicyParams& params, int student_index);

struct OptimizeOutput {
    CurriculumPolicyParams best_params;
    double best_value = 0.0;
    OptimizeTrace trace;
    std::vector<std::string> files;  // trace.csv and best_params.json
};

// Curriculum induction for the configured environment; writes trace.csv and
// best_params.json under cfg.output_dir.
OptimizeOutput optimize_teacher(const ExperimentConfig& cfg);

// The curriculum the configured mode asks for. For `optimized` this runs the
// optimizer (results land in *opt_out when given).
CurriculumPolicyParams resolve_params(const ExperimentConfig& cfg, const EnvBundle& bundle,
                                      OptimizeOutput* opt_out = nullptr);

// Small exactly-enumerable models paired with interventions for the safety
// verifiers. `include_broken` appends a fixture whose trigger set fails the
// blanket premise on purpose.
struct PropFixture {
    std::string name;
    TabularCMDP base;
    Intervention intervention;
    bool expect_prop1 = true;
    bool expect_prop2 = true;
};

std::vector<PropFixture> verification_fixtures(bool include_broken);

// 3x3 gridworld whose two-step route to the goal slips into the central
// hole w.p. 0.3 while a deterministic six-step detour is safe. Step cost
// 0.1, goal bonus 1: the risky route is worth 0.5, the detour 0.4, and with
// kappa 0.1 only the detour is feasible. Start 0, goal 2, hole 4.
TabularCMDP shortcut_grid3();

struct Aggregate {
    std::int64_t n = 0;
    double mean = 0.0;
    double sd = 0.0;      // sample standard deviation
    double ci95_lo = 0.0;  // normal-approximation interval
    double ci95_hi = 0.0;
};

Aggregate aggregate(const std::vector<double>& xs);

}  // namespace cisr
