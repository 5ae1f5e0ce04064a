#include "cisr/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <sstream>
#include <string>
#include <utility>

#include "cisr/csv.hpp"
#include "cisr/errors.hpp"
#include "cisr/frozen_lake.hpp"
#include "cisr/lander.hpp"

namespace cisr {

namespace fs = std::filesystem;

EnvBundle build_env_bundle(const ExperimentConfig& cfg) {
    EnvBundle b;
    b.kind = cfg.environment;
    switch (cfg.environment) {
        case EnvironmentKind::frozen_lake: {
            const GridMap map = cfg.map_file.empty() ? parse_map(default_flake_map_text())
                                                     : load_map_file(cfg.map_file);
            auto base = std::make_shared<const TabularCMDP>(build_flake_cmdp(map, cfg.flake));
            auto ivs = std::make_shared<const std::vector<Intervention>>(
                make_flake_interventions(map, *base).library());
            b.base = base;
            b.interventions = ivs;
            b.intervention_names = FrozenLakeInterventions::names();
            b.envs.n_interventions = static_cast<int>(ivs->size());
            b.envs.make_train = [base, ivs](int id) -> std::unique_ptr<TrainEnv> {
                return std::make_unique<TabularTrainEnv>(*base, ivs->at(static_cast<std::size_t>(id)));
            };
            b.envs.make_deploy = [base]() -> std::unique_ptr<TrainEnv> {
                return std::make_unique<TabularTrainEnv>(*base);
            };
            break;
        }
        case EnvironmentKind::custom_cmdp: {
            if (!cfg.custom)
                throw ConfigInvalid("custom_cmdp environment needs a custom model section");
            auto base = std::make_shared<const TabularCMDP>(cfg.custom->cmdp);
            auto ivs =
                std::make_shared<const std::vector<Intervention>>(cfg.custom->interventions);
            b.base = base;
            b.interventions = ivs;
            for (const Intervention& iv : *ivs) b.intervention_names.push_back(iv.name);
            b.envs.n_interventions = static_cast<int>(ivs->size());
            b.envs.make_train = [base, ivs](int id) -> std::unique_ptr<TrainEnv> {
                return std::make_unique<TabularTrainEnv>(*base, ivs->at(static_cast<std::size_t>(id)));
            };
            b.envs.make_deploy = [base]() -> std::unique_ptr<TrainEnv> {
                return std::make_unique<TabularTrainEnv>(*base);
            };
            break;
        }
        case EnvironmentKind::lander: {
            const LanderConfig lc = cfg.lander;
            auto lib = std::make_shared<const std::vector<FunnelIntervention>>(
                build_lander_interventions().library());
            b.intervention_names = LanderInterventions::names();
            b.envs.n_interventions = static_cast<int>(lib->size());
            b.envs.make_train = [lc, lib](int id) -> std::unique_ptr<TrainEnv> {
                return std::make_unique<LanderTrainEnv>(lc, lib->at(static_cast<std::size_t>(id)));
            };
            b.envs.make_deploy = [lc]() -> std::unique_ptr<TrainEnv> {
                return std::make_unique<LanderTrainEnv>(lc, true);
            };
            break;
        }
    }
    // Training directly in the real model: one pseudo-id, same deployment.
    b.plain_envs.n_interventions = 1;
    b.plain_envs.make_deploy = b.envs.make_deploy;
    if (cfg.environment == EnvironmentKind::lander) {
        const LanderConfig lc = cfg.lander;
        b.plain_envs.make_train = [lc](int) -> std::unique_ptr<TrainEnv> {
            return std::make_unique<LanderTrainEnv>(lc);
        };
    } else {
        auto base = b.base;
        b.plain_envs.make_train = [base](int) -> std::unique_ptr<TrainEnv> {
            return std::make_unique<TabularTrainEnv>(*base);
        };
    }
    return b;
}

int intervention_index(const EnvBundle& bundle, const std::string& name) {
    for (std::size_t i = 0; i < bundle.intervention_names.size(); ++i)
        if (bundle.intervention_names[i] == name) return static_cast<int>(i);
    std::string known;
    for (const auto& n : bundle.intervention_names) {
        if (!known.empty()) known += ", ";
        known += n;
    }
    throw ConfigInvalid("unknown intervention '" + name + "' (have: " + known + ")");
}

namespace {

void check_params_fit(const CurriculumPolicyParams& params, const EnvBundle& bundle) {
    for (int id : params.intervention_sequence)
        if (id < 0 || id >= bundle.envs.n_interventions)
            throw ConfigInvalid("curriculum uses intervention id " + std::to_string(id) +
                                " but the environment has " +
                                std::to_string(bundle.envs.n_interventions));
    if (params.intervention_sequence.size() != params.switch_thresholds.size() + 1)
        throw ConfigInvalid("curriculum needs one more intervention id than thresholds");
}

std::string fmt_u64(std::uint64_t v) { return std::to_string(v); }

std::string switch_log_text(const std::vector<std::pair<int, int>>& log) {
    std::string out;
    for (const auto& [unit, id] : log) {
        if (!out.empty()) out += "|";
        out += std::to_string(unit) + ":" + std::to_string(id);
    }
    return out;
}

double trigger_total(const PolicyStats& stats) {
    // Constraint 0 is always the unsafe set; anything after it is a trigger.
    double total = 0.0;
    for (std::size_t c = 1; c < stats.trigger_visits.size(); ++c) total += stats.trigger_visits[c];
    return total;
}

}  // namespace

CurriculumPolicyParams resolve_params(const ExperimentConfig& cfg, const EnvBundle& bundle,
                                      OptimizeOutput* opt_out) {
    CurriculumPolicyParams params;
    switch (cfg.mode) {
        case PolicyMode::no_intervention:
            params.intervention_sequence = {0};
            return params;  // runs against plain_envs, id 0 is the real model
        case PolicyMode::single_intervention:
            params.intervention_sequence = {intervention_index(bundle, cfg.intervention_name)};
            return params;
        case PolicyMode::fixed_params: {
            auto [loaded, value] = load_params_file(cfg.params_file);
            check_params_fit(loaded, bundle);
            if (opt_out) {
                opt_out->best_params = loaded;
                opt_out->best_value = value;
            }
            return loaded;
        }
        case PolicyMode::optimized: {
            OptimizeOutput out = optimize_teacher(cfg);
            check_params_fit(out.best_params, bundle);
            params = out.best_params;
            if (opt_out) *opt_out = std::move(out);
            return params;
        }
    }
    throw ConfigInvalid("unhandled policy mode");
}

StudentRunRecord run_single_student(const ExperimentConfig& cfg, const EnvBundle& bundle,
                                    const CurriculumPolicyParams& params, int student_index) {
    StudentRunRecord rec;
    rec.student_id = student_index;
    rec.seed = student_seed(cfg, student_index);
    const RoundEnvs& envs =
        cfg.mode == PolicyMode::no_intervention ? bundle.plain_envs : bundle.envs;

    std::vector<UnitRecord> units;
    const UnitObserver observer = [&](int unit, int intervention_id, const StudentState& student,
                                      const TrainingStats& unit_stats) {
        UnitRecord u;
        u.unit = unit;
        u.intervention_id = intervention_id;
        u.unit_failures = unit_stats.training_failures;
        if (cfg.unit_eval_steps > 0) {
            auto deploy_env = envs.make_deploy();
            const PolicyStats ps =
                evaluate_policy_steps(*deploy_env, student.policy(), cfg.unit_eval_steps,
                                      derive_seed(rec.seed, 50000 + static_cast<std::uint64_t>(unit)));
            u.probed = true;
            u.deploy_return = ps.expected_return;
            u.deploy_success = ps.success_rate;
            u.deploy_unsafe = ps.expected_unsafe_visits;
        }
        units.push_back(u);
    };

    const RoundResult rr = run_round(params, envs, cfg.teacher, cfg.solver, rec.seed, observer);
    for (std::size_t u = 0; u < units.size() && u < rr.observations.size(); ++u) {
        units[u].value_estimate = rr.observations[u].value_estimate;
        units[u].violation_gap = rr.observations[u].violation_gap;
    }
    rec.units = std::move(units);
    rec.switch_log = rr.switch_log;
    rec.training_failures = rr.training_failures;
    rec.teacher_reward = rr.final_value;
    rec.deploy_stats = rr.deploy_stats;
    return rec;
}

Aggregate aggregate(const std::vector<double>& xs) {
    Aggregate a;
    a.n = static_cast<std::int64_t>(xs.size());
    if (xs.empty()) return a;
    double sum = 0.0;
    for (double x : xs) sum += x;
    a.mean = sum / static_cast<double>(a.n);
    if (a.n > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.sd = std::sqrt(ss / static_cast<double>(a.n - 1));
    }
    const double half = 1.959963984540054 * a.sd / std::sqrt(static_cast<double>(a.n));
    a.ci95_lo = a.mean - half;
    a.ci95_hi = a.mean + half;
    return a;
}

namespace {

std::string intervention_label(const ExperimentConfig& cfg, const EnvBundle& bundle, int id) {
    if (cfg.mode == PolicyMode::no_intervention) return "none";
    return bundle.intervention_names.at(static_cast<std::size_t>(id));
}

void write_experiment_files(const ExperimentConfig& cfg, const EnvBundle& bundle,
                            ExperimentResult& out) {
    fs::create_directories(cfg.output_dir);
    const std::string students_path = (fs::path(cfg.output_dir) / "students.csv").string();
    const std::string final_path = (fs::path(cfg.output_dir) / "final.csv").string();
    const std::string agg_path = (fs::path(cfg.output_dir) / "aggregate.csv").string();

    {
        CsvFile f(students_path, "cisr.units.v1",
                  {"student", "seed", "unit", "intervention_id", "intervention",
                   "value_estimate", "violation_gap", "unit_failures", "deploy_return",
                   "deploy_success_rate", "deploy_unsafe_visits"});
        for (const StudentRunRecord& rec : out.students)
            for (const UnitRecord& u : rec.units)
                f.row({format_int(rec.student_id), fmt_u64(rec.seed), format_int(u.unit),
                       format_int(u.intervention_id),
                       intervention_label(cfg, bundle, u.intervention_id),
                       format_double(u.value_estimate), format_double(u.violation_gap),
                       format_int(u.unit_failures),
                       u.probed ? format_double(u.deploy_return) : std::string(),
                       u.probed ? format_double(u.deploy_success) : std::string(),
                       u.probed ? format_double(u.deploy_unsafe) : std::string()});
        f.close();
    }
    {
        CsvFile f(final_path, "cisr.final.v1",
                  {"student", "seed", "training_failures", "teacher_reward", "deploy_return",
                   "deploy_success_rate", "deploy_unsafe_visits", "deploy_trigger_visits",
                   "deploy_episodes", "switches", "switch_log"});
        for (const StudentRunRecord& rec : out.students) {
            const int switches =
                rec.switch_log.empty() ? 0 : static_cast<int>(rec.switch_log.size()) - 1;
            f.row({format_int(rec.student_id), fmt_u64(rec.seed),
                   format_int(rec.training_failures), format_double(rec.teacher_reward),
                   format_double(rec.deploy_stats.expected_return),
                   format_double(rec.deploy_stats.success_rate),
                   format_double(rec.deploy_stats.expected_unsafe_visits),
                   format_double(trigger_total(rec.deploy_stats)),
                   format_int(rec.deploy_stats.episodes), format_int(switches),
                   switch_log_text(rec.switch_log)});
        }
        f.close();
    }
    {
        std::vector<double> reward, ret, success, unsafe, failures;
        for (const StudentRunRecord& rec : out.students) {
            reward.push_back(rec.teacher_reward);
            ret.push_back(rec.deploy_stats.expected_return);
            success.push_back(rec.deploy_stats.success_rate);
            unsafe.push_back(rec.deploy_stats.expected_unsafe_visits);
            failures.push_back(static_cast<double>(rec.training_failures));
        }
        CsvFile f(agg_path, "cisr.aggregate.v1",
                  {"metric", "n", "mean", "sd", "ci95_lo", "ci95_hi"});
        const auto emit = [&](const char* name, const std::vector<double>& xs) {
            const Aggregate a = aggregate(xs);
            f.row({name, format_int(a.n), format_double(a.mean), format_double(a.sd),
                   format_double(a.ci95_lo), format_double(a.ci95_hi)});
        };
        emit("teacher_reward", reward);
        emit("deploy_return", ret);
        emit("deploy_success_rate", success);
        emit("deploy_unsafe_visits", unsafe);
        emit("training_failures", failures);
        f.close();
    }
    out.files.push_back(students_path);
    out.files.push_back(final_path);
    out.files.push_back(agg_path);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    const EnvBundle bundle = build_env_bundle(cfg);
    if (cfg.mode != PolicyMode::no_intervention && bundle.envs.n_interventions < 1)
        throw ConfigInvalid("this environment defines no interventions");

    ExperimentResult out;
    OptimizeOutput opt;
    out.params = resolve_params(cfg, bundle, &opt);
    out.params_value = opt.best_value;
    out.files = opt.files;

    out.students.resize(static_cast<std::size_t>(cfg.n_students));
    if (cfg.workers <= 1) {
        for (int i = 0; i < cfg.n_students; ++i)
            out.students[static_cast<std::size_t>(i)] =
                run_single_student(cfg, bundle, out.params, i);
    } else {
        int next = 0;
        while (next < cfg.n_students) {
            std::vector<std::pair<int, std::future<StudentRunRecord>>> batch;
            for (int k = 0; k < cfg.workers && next < cfg.n_students; ++k, ++next)
                batch.emplace_back(next, std::async(std::launch::async, [&cfg, &bundle, &out,
                                                                         i = next] {
                                       return run_single_student(cfg, bundle, out.params, i);
                                   }));
            for (auto& [i, fut] : batch) out.students[static_cast<std::size_t>(i)] = fut.get();
        }
    }

    write_experiment_files(cfg, bundle, out);
    return out;
}

OptimizeOutput optimize_teacher(const ExperimentConfig& cfg) {
    const EnvBundle bundle = build_env_bundle(cfg);
    if (bundle.envs.n_interventions < 1)
        throw ConfigInvalid("teacher optimization needs at least one intervention");

    const OptimizeResult res =
        cisr_optimize(bundle.envs, cfg.teacher, cfg.solver, cfg.opt, cfg.base_seed);

    OptimizeOutput out;
    out.best_params = res.best_params;
    out.best_value = res.best_value;
    out.trace = res.trace;

    fs::create_directories(cfg.output_dir);
    const std::string trace_path = (fs::path(cfg.output_dir) / "trace.csv").string();
    const std::string params_path = (fs::path(cfg.output_dir) / "best_params.json").string();

    const int dims = 3 * cfg.teacher.max_switches + 1;
    std::vector<std::string> header = {"round", "source", "value", "training_failures"};
    for (int d = 0; d < dims; ++d) header.push_back("p" + std::to_string(d));
    CsvFile f(trace_path, "cisr.trace.v1", header);
    for (const OptRecord& r : out.trace.records) {
        std::vector<std::string> cells = {format_int(r.round), r.from_ucb ? "ucb" : "random",
                                          format_double(r.value), format_int(r.training_failures)};
        for (double v : r.raw_params) cells.push_back(format_double(v));
        f.row(cells);
    }
    f.close();
    save_params_file(params_path, out.best_params, out.best_value);
    out.files = {trace_path, params_path};
    return out;
}

std::vector<PropFixture> verification_fixtures(bool include_broken) {
    std::vector<PropFixture> out;

    FrozenLakeConfig fc;
    fc.horizon = 10;
    const GridMap corner = parse_map("FFH\nFFF\nSFG\n");
    const TabularCMDP corner_base = build_flake_cmdp(corner, fc);

    const auto ring_states = [&](int radius) {
        const std::vector<int> dist = hole_distance(corner);
        std::vector<int> trigger;
        for (int s = 0; s < corner.size(); ++s)
            if (dist[static_cast<std::size_t>(s)] <= radius) trigger.push_back(s);
        return trigger;
    };
    const auto mask_of = [&](const std::vector<int>& states) {
        std::vector<std::uint8_t> mask(static_cast<std::size_t>(corner.size()), 0);
        for (int s : states) mask[static_cast<std::size_t>(s)] = 1;
        return mask;
    };

    {
        PropFixture fx;
        fx.name = "corner_ring";
        fx.base = corner_base;
        const std::vector<int> trigger = ring_states(1);
        fx.intervention = make_intervention(
            "ring1", corner.size(), trigger, ResetMode::to_previous_state,
            nearest_safe_predecessor_kernel(corner_base, mask_of(trigger)), 0.1, 0.0);
        out.push_back(std::move(fx));
    }
    {
        PropFixture fx;
        fx.name = "corner_restart";
        fx.base = corner_base;
        const std::vector<int> trigger = ring_states(1);
        fx.intervention = make_intervention(
            "restart1", corner.size(), trigger, ResetMode::to_initial_distribution,
            kernel_from_initial(corner_base, mask_of(trigger)), 0.1, 0.0);
        out.push_back(std::move(fx));
    }
    {
        // Six-state corridor with a risky shortcut: 0 -> 1 -> 2 -> goal 3,
        // the shortcut action enters buffer 4, and from the buffer it reaches
        // the goal w.p. 0.7 or the unsafe sink 5 w.p. 0.3.
        const int n = 6, m = 2, goal = 3, buffer = 4, sink = 5;
        std::vector<double> p(static_cast<std::size_t>(n) * m * n, 0.0);
        std::vector<double> r(p.size(), 0.0);
        const auto at = [&](int s, int a, int t) -> double& {
            return p[static_cast<std::size_t>((s * m + a) * n + t)];
        };
        at(0, 0, 1) = 1.0;
        at(0, 1, 1) = 1.0;
        at(1, 0, 2) = 1.0;
        at(1, 1, buffer) = 1.0;
        at(2, 0, goal) = 1.0;
        at(2, 1, buffer) = 1.0;
        at(buffer, 0, 2) = 1.0;
        at(buffer, 1, goal) = 0.7;
        at(buffer, 1, sink) = 0.3;
        for (int a = 0; a < m; ++a) {
            at(goal, a, goal) = 1.0;
            at(sink, a, sink) = 1.0;
        }
        for (int s = 0; s < n; ++s)
            for (int a = 0; a < m; ++a)
                for (int t = 0; t < n; ++t)
                    if (t == goal) r[static_cast<std::size_t>((s * m + a) * n + t)] = 1.0;
        std::vector<double> init(static_cast<std::size_t>(n), 0.0);
        init[0] = 1.0;
        std::vector<std::uint8_t> terminal(static_cast<std::size_t>(n), 0);
        terminal[static_cast<std::size_t>(goal)] = 1;
        terminal[static_cast<std::size_t>(sink)] = 1;
        std::vector<std::uint8_t> unsafe(static_cast<std::size_t>(n), 0);
        unsafe[static_cast<std::size_t>(sink)] = 1;

        PropFixture fx;
        fx.name = "corridor_shortcut";
        fx.base = build_cmdp(n, m, 10, std::move(p), std::move(r), std::move(init), terminal,
                             unsafe, 0.1);
        std::vector<double> kernel(static_cast<std::size_t>(n) * n, 0.0);
        for (int s = 0; s < n; ++s) kernel[static_cast<std::size_t>(s) * n] = 1.0;
        fx.intervention = make_intervention("buffer_reset", n, {buffer, sink},
                                            ResetMode::fixed_kernel, std::move(kernel), 0.1, 0.0);
        out.push_back(std::move(fx));
    }
    if (include_broken) {
        // Trigger set equal to the unsafe set itself: no protective ring, so
        // one-step entry from outside is possible and learning safety fails.
        PropFixture fx;
        fx.name = "thin_trigger";
        fx.base = corner_base;
        const std::vector<int> trigger = corner.holes();
        fx.intervention = make_intervention(
            "thin", corner.size(), trigger, ResetMode::to_previous_state,
            nearest_safe_predecessor_kernel(corner_base, mask_of(trigger)), 0.1, 0.0);
        fx.expect_prop2 = false;
        out.push_back(std::move(fx));
    }
    return out;
}

TabularCMDP shortcut_grid3() {
    const int n = 9, m = 4, goal = 2, hole = 4;
    std::vector<double> p(static_cast<std::size_t>(n) * m * n, 0.0);
    std::vector<double> r(p.size(), 0.0);
    const auto at = [&](int s, int a, int t) -> double& {
        return p[static_cast<std::size_t>((s * m + a) * n + t)];
    };
    const int drow[] = {-1, 0, 0, 1};  // up, right, left, down
    const int dcol[] = {0, 1, -1, 0};
    for (int s = 0; s < n; ++s) {
        if (s == goal || s == hole) {
            for (int a = 0; a < m; ++a) at(s, a, s) = 1.0;
            continue;
        }
        for (int a = 0; a < m; ++a) {
            const int row = s / 3 + drow[a];
            const int col = s % 3 + dcol[a];
            const bool off = row < 0 || row > 2 || col < 0 || col > 2;
            at(s, a, off ? s : row * 3 + col) = 1.0;
        }
    }
    // The shortcut: going right from the top middle cell slips into the
    // hole three times out of ten instead of entering the goal.
    at(1, 1, goal) = 0.7;
    at(1, 1, hole) = 0.3;
    for (int s = 0; s < n; ++s) {
        if (s == goal || s == hole) continue;
        for (int a = 0; a < m; ++a)
            for (int t = 0; t < n; ++t)
                r[static_cast<std::size_t>((s * m + a) * n + t)] = t == goal ? 0.9 : -0.1;
    }
    std::vector<double> init(static_cast<std::size_t>(n), 0.0);
    init[0] = 1.0;
    std::vector<std::uint8_t> terminal(static_cast<std::size_t>(n), 0);
    terminal[static_cast<std::size_t>(goal)] = 1;
    terminal[static_cast<std::size_t>(hole)] = 1;
    std::vector<std::uint8_t> unsafe(static_cast<std::size_t>(n), 0);
    unsafe[static_cast<std::size_t>(hole)] = 1;
    return build_cmdp(n, m, 10, std::move(p), std::move(r), std::move(init), terminal, unsafe,
                      0.1);
}

}  // namespace cisr
