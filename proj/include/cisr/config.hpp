#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cisr/cmdp.hpp"
#include "cisr/frozen_lake.hpp"
#include "cisr/intervention.hpp"
#include "cisr/lander.hpp"
#include "cisr/student.hpp"
#include "cisr/teacher.hpp"

namespace cisr {

enum class EnvironmentKind { frozen_lake, lander, custom_cmdp };
enum class PolicyMode { no_intervention, single_intervention, optimized, fixed_params };

const char* to_string(EnvironmentKind e);
const char* to_string(PolicyMode m);

// Inline tabular model plus intervention library for custom_cmdp configs.
struct CustomCMDPSpec {
    TabularCMDP cmdp;
    std::vector<Intervention> interventions;
};

// One experiment as the CLI sees it: which environment, which curriculum
// policy trains the students, and every module's knobs, all loadable from a
// single JSON file.
struct ExperimentConfig {
    EnvironmentKind environment = EnvironmentKind::frozen_lake;
    PolicyMode mode = PolicyMode::no_intervention;
    std::string intervention_name;  // single_intervention: resolved against the library
    std::string params_file;        // fixed_params
    int n_students = 10;
    std::uint64_t base_seed = 1;
    std::vector<std::uint64_t> seeds;  // explicit per-student seeds; else derived
    std::string output_dir = "out";
    std::string map_file;  // frozen lake override; empty uses the built-in map
    int workers = 1;
    // Budget of the analysis-only deployment evaluation after each unit;
    // 0 skips per-unit evaluation entirely.
    std::int64_t unit_eval_steps = 2000;

    FrozenLakeConfig flake;
    LanderConfig lander;
    SolverConfig solver;
    CISRConfig teacher;
    TeacherOptConfig opt;
    std::optional<CustomCMDPSpec> custom;
};

// Per-student seed: the explicit list when given, otherwise streams derived
// from the base seed.
std::uint64_t student_seed(const ExperimentConfig& cfg, int student_index);

// Gamma hyperpriors over [signal variance, one lengthscale per parameter,
// noise variance] on the normalized input scale. Return-threshold dims get
// one prior, gap-threshold dims another, intervention-id dims a third; the
// values differ per environment.
GPHyperpriors default_teacher_priors(EnvironmentKind env, int max_switches);

// Environment-appropriate defaults for every nested section.
ExperimentConfig default_experiment_config(EnvironmentKind env);

// Strict JSON parsing: unknown keys are rejected and every error names the
// offending field path. `origin` labels messages (usually the file name).
ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& origin);
ExperimentConfig load_experiment_config(const std::string& path);

// Curriculum parameter files round-trip exactly (shortest round-trip decimal
// serialization on write, exact parse on read).
void save_params_file(const std::string& path, const CurriculumPolicyParams& params,
                      double value);
std::pair<CurriculumPolicyParams, double> load_params_file(const std::string& path);

}  // namespace cisr
