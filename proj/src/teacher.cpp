#include "cisr/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cisr/errors.hpp"
#include "cisr/rng.hpp"
#include "cisr/sim.hpp"

namespace cisr {

std::vector<double> params_to_vector(const CurriculumPolicyParams& params) {
    const int K = params.max_switches();
    if (static_cast<int>(params.intervention_sequence.size()) != K + 1)
        throw ConfigInvalid("curriculum params: sequence must hold exactly K+1 ids");
    std::vector<double> flat;
    flat.reserve(3 * K + 1);
    for (const auto& [ret, gap] : params.switch_thresholds) {
        flat.push_back(ret);
        flat.push_back(gap);
    }
    for (int id : params.intervention_sequence) flat.push_back(static_cast<double>(id));
    return flat;
}

CurriculumPolicyParams params_from_vector(const std::vector<double>& flat, int max_switches) {
    const int K = max_switches;
    if (K < 0 || flat.size() != static_cast<std::size_t>(3 * K + 1))
        throw ConfigInvalid("curriculum params: flat vector must hold 3K+1 scalars");
    CurriculumPolicyParams p;
    for (int k = 0; k < K; ++k) p.switch_thresholds.emplace_back(flat[2 * k], flat[2 * k + 1]);
    for (int k = 0; k <= K; ++k)
        p.intervention_sequence.push_back(static_cast<int>(std::lround(flat[2 * K + k])));
    return p;
}

std::pair<int, int> decide_intervention(const CurriculumPolicyParams& params, int stage,
                                        const TeacherObservation& obs) {
    const int K = params.max_switches();
    if (static_cast<int>(params.intervention_sequence.size()) != K + 1)
        throw ConfigInvalid("decide_intervention: sequence must hold exactly K+1 ids");
    if (stage < 0 || stage > K)
        throw StageOutOfRange("decide_intervention: stage " + std::to_string(stage) +
                              " outside [0, " + std::to_string(K) + "]");
    int next = stage;
    if (stage < K && obs.value_estimate >= params.switch_thresholds[stage].first &&
        obs.violation_gap <= params.switch_thresholds[stage].second)
        next = stage + 1;
    return {params.intervention_sequence[next], next};
}

double teacher_reward(const PolicyStats& final_policy_eval, const CISRConfig& config) {
    if (final_policy_eval.expected_unsafe_visits > config.kappa)
        return -2.0 * static_cast<double>(config.horizon_T) * config.r_max;
    return final_policy_eval.expected_return;
}

RoundResult run_round(const CurriculumPolicyParams& params, const RoundEnvs& envs,
                      const CISRConfig& config, const SolverConfig& solver_cfg,
                      std::uint64_t seed, const UnitObserver& observer) {
    const int K = params.max_switches();
    if (static_cast<int>(params.intervention_sequence.size()) != K + 1)
        throw ConfigInvalid("run_round: sequence must hold exactly K+1 ids");
    for (int id : params.intervention_sequence)
        if (id < 0 || id >= envs.n_interventions)
            throw UnknownIntervention("run_round: intervention id " + std::to_string(id) +
                                      " not in the library of " +
                                      std::to_string(envs.n_interventions));

    RoundResult out;
    out.params = params;
    int stage = 0;
    int cur_id = -1;
    TeacherObservation obs;
    StudentState student;
    bool have_student = false;

    for (int unit = 0; unit < config.units_per_student; ++unit) {
        int id = params.intervention_sequence[0];
        if (unit > 0) std::tie(id, stage) = decide_intervention(params, stage, obs);
        if (id != cur_id) {
            out.switch_log.emplace_back(unit, id);
            cur_id = id;
        }

        const std::unique_ptr<TrainEnv> env = envs.make_train(id);
        const TrainResult tr =
            train_student(*env, solver_cfg, config.unit_steps,
                          derive_seed(seed, 1000 + static_cast<std::uint64_t>(unit)),
                          have_student ? &student : nullptr);
        student = tr.state;
        have_student = true;
        out.training_failures += tr.stats.training_failures;

        const PolicyFeatures phi = evaluate_features(
            *env, student, solver_cfg, solver_cfg.eval_rollouts,
            derive_seed(seed, 2000 + static_cast<std::uint64_t>(unit)));
        obs = {phi.value_estimate, phi.violation_gap};
        out.observations.push_back(obs);
        if (observer) observer(unit, id, student, tr.stats);
    }

    const std::unique_ptr<TrainEnv> deploy_env = envs.make_deploy();
    const TabularPolicy deployed = student.policy(solver_cfg.exploration_temperature);
    out.deploy_stats =
        evaluate_policy_steps(*deploy_env, deployed, config.eval_horizon, derive_seed(seed, 3000));
    out.final_value = teacher_reward(out.deploy_stats, config);
    out.final_student = std::move(student);
    return out;
}

RoundResult run_round(const CurriculumPolicyParams& params, const TabularCMDP& base,
                      const std::vector<Intervention>& interventions, const CISRConfig& config,
                      const SolverConfig& solver_cfg, std::uint64_t seed) {
    RoundEnvs envs;
    envs.n_interventions = static_cast<int>(interventions.size());
    envs.make_train = [&base, &interventions](int id) -> std::unique_ptr<TrainEnv> {
        return std::make_unique<TabularTrainEnv>(base, interventions[id]);
    };
    envs.make_deploy = [&base]() -> std::unique_ptr<TrainEnv> {
        return std::make_unique<TabularTrainEnv>(base);
    };
    return run_round(params, envs, config, solver_cfg, seed);
}

ParamSpace curriculum_param_space(int max_switches, int n_interventions,
                                  const TeacherOptConfig& cfg) {
    if (n_interventions < 1)
        throw EmptySpace("curriculum_param_space: need at least one intervention");
    ParamSpace space;
    for (int k = 0; k < max_switches; ++k) {
        space.dims.push_back(ParamDim::interval(cfg.ret_lo, cfg.ret_hi));
        space.dims.push_back(ParamDim::interval(cfg.gap_lo, cfg.gap_hi));
    }
    for (int k = 0; k <= max_switches; ++k)
        space.dims.push_back(ParamDim::choice(n_interventions));
    return space;
}

OptimizeTrace optimize_loop(
    const ParamSpace& space,
    const std::function<std::pair<double, std::int64_t>(const std::vector<double>&, int)>&
        evaluate,
    const TeacherOptConfig& cfg, int n_rounds, std::uint64_t seed) {
    if (cfg.init_count < 1 && n_rounds < 1)
        throw ConfigInvalid("optimize_loop: nothing to evaluate");
    if (cfg.priors.lengthscales.size() != space.dims.size())
        throw DimensionMismatch("optimize_loop: need one lengthscale prior per dimension");

    OptimizeTrace trace;
    trace.dataset.hyper.signal_variance = cfg.priors.signal_variance.mean();
    trace.dataset.hyper.noise_variance = cfg.priors.noise_variance.mean();
    trace.dataset.hyper.lengthscales.resize(space.dims.size());
    for (std::size_t d = 0; d < space.dims.size(); ++d)
        trace.dataset.hyper.lengthscales[d] = cfg.priors.lengthscales[d].mean();
    trace.best_value = -std::numeric_limits<double>::infinity();

    Rng rng(derive_seed(seed, 77));
    int round = 0;
    auto score = [&](const std::vector<double>& raw, bool from_ucb) {
        const auto [value, failures] = evaluate(raw, round);
        trace.dataset.add(space.relax(raw), value);
        OptRecord rec;
        rec.round = round;
        rec.from_ucb = from_ucb;
        rec.raw_params = raw;
        rec.value = value;
        rec.training_failures = failures;
        trace.records.push_back(std::move(rec));
        if (value > trace.best_value) {
            trace.best_value = value;
            trace.best_raw = raw;
        }
        ++round;
    };

    for (int i = 0; i < cfg.init_count; ++i) score(space.sample(rng), false);

    for (int r = 0; r < n_rounds; ++r) {
        std::vector<double> proposal;
        if (trace.dataset.size() == 0) {
            Rng prop_rng(derive_seed(seed, 500 + static_cast<std::uint64_t>(r)));
            proposal = space.sample(prop_rng);
        } else {
            GPModel scaled = normalize_dataset(trace.dataset);
            scaled.hyper = map_fit(scaled, cfg.priors, cfg.map_restarts,
                                   derive_seed(seed, 200 + static_cast<std::uint64_t>(r)));
            trace.fitted = scaled.hyper;
            proposal = ucb_propose(scaled, space, cfg.ucb,
                                   derive_seed(seed, 300 + static_cast<std::uint64_t>(r)));
        }
        score(proposal, true);
    }
    return trace;
}

OptimizeResult cisr_optimize(const RoundEnvs& envs, const CISRConfig& config,
                             const SolverConfig& solver_cfg, const TeacherOptConfig& opt_cfg,
                             std::uint64_t seed) {
    const ParamSpace space =
        curriculum_param_space(config.max_switches, envs.n_interventions, opt_cfg);

    auto evaluate = [&](const std::vector<double>& raw, int round) {
        const CurriculumPolicyParams params = params_from_vector(raw, config.max_switches);
        double value_sum = 0.0;
        std::int64_t failures = 0;
        const int n = std::max(1, opt_cfg.students_per_datum);
        for (int j = 0; j < n; ++j) {
            const std::uint64_t round_seed =
                derive_seed(seed, 10000 + 100 * static_cast<std::uint64_t>(round) +
                                      static_cast<std::uint64_t>(j));
            const RoundResult rr = run_round(params, envs, config, solver_cfg, round_seed);
            value_sum += rr.final_value;
            failures += rr.training_failures;
        }
        return std::make_pair(value_sum / n, failures);
    };

    OptimizeResult out;
    out.trace = optimize_loop(space, evaluate, opt_cfg, config.n_rounds, seed);
    out.best_value = out.trace.best_value;
    out.best_params = params_from_vector(out.trace.best_raw, config.max_switches);
    return out;
}

OptimizeResult cisr_optimize(const TabularCMDP& base,
                             const std::vector<Intervention>& interventions,
                             const CISRConfig& config, const SolverConfig& solver_cfg,
                             const TeacherOptConfig& opt_cfg, std::uint64_t seed) {
    RoundEnvs envs;
    envs.n_interventions = static_cast<int>(interventions.size());
    envs.make_train = [&base, &interventions](int id) -> std::unique_ptr<TrainEnv> {
        return std::make_unique<TabularTrainEnv>(base, interventions[id]);
    };
    envs.make_deploy = [&base]() -> std::unique_ptr<TrainEnv> {
        return std::make_unique<TabularTrainEnv>(base);
    };
    return cisr_optimize(envs, config, solver_cfg, opt_cfg, seed);
}

}  // namespace cisr
