#include <cstdint>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cisr/config.hpp"
#include "cisr/errors.hpp"
#include "cisr/experiment.hpp"
#include "cisr/oracle.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string env = "frozen_lake";
    std::string out;
    std::string map_file;
    std::string mode;
    std::string intervention;
    std::string params_file;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int students = 0;
    int workers = 0;
};

cisr::EnvironmentKind parse_env(const std::string& name) {
    if (name == "frozen_lake") return cisr::EnvironmentKind::frozen_lake;
    if (name == "lander") return cisr::EnvironmentKind::lander;
    if (name == "custom_cmdp") return cisr::EnvironmentKind::custom_cmdp;
    throw cisr::ConfigInvalid("unknown environment '" + name + "'");
}

cisr::ExperimentConfig make_config(const CommonOpts& o) {
    cisr::ExperimentConfig cfg = o.config_path.empty()
                                     ? cisr::default_experiment_config(parse_env(o.env))
                                     : cisr::load_experiment_config(o.config_path);
    if (!o.mode.empty()) {
        if (o.mode == "no_intervention") cfg.mode = cisr::PolicyMode::no_intervention;
        else if (o.mode == "single_intervention") cfg.mode = cisr::PolicyMode::single_intervention;
        else if (o.mode == "optimized") cfg.mode = cisr::PolicyMode::optimized;
        else if (o.mode == "fixed_params") cfg.mode = cisr::PolicyMode::fixed_params;
        else throw cisr::ConfigInvalid("unknown mode '" + o.mode + "'");
    }
    if (!o.intervention.empty()) {
        cfg.intervention_name = o.intervention;
        if (o.mode.empty() && cfg.mode == cisr::PolicyMode::no_intervention)
            cfg.mode = cisr::PolicyMode::single_intervention;
    }
    if (!o.params_file.empty()) {
        cfg.params_file = o.params_file;
        if (o.mode.empty()) cfg.mode = cisr::PolicyMode::fixed_params;
    }
    if (o.seed_set) {
        cfg.base_seed = o.seed;
        cfg.seeds.clear();
    }
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (!o.map_file.empty()) cfg.map_file = o.map_file;
    if (o.students > 0) {
        if (!cfg.seeds.empty() && cfg.seeds.size() != 1 &&
            cfg.seeds.size() != static_cast<std::size_t>(o.students))
            throw cisr::ConfigInvalid("--students conflicts with the config's seed list");
        cfg.n_students = o.students;
    }
    if (o.workers > 0) cfg.workers = o.workers;
    if (cfg.mode == cisr::PolicyMode::single_intervention && cfg.intervention_name.empty())
        throw cisr::ConfigInvalid("single_intervention mode needs --intervention");
    if (cfg.mode == cisr::PolicyMode::fixed_params && cfg.params_file.empty())
        throw cisr::ConfigInvalid("fixed_params mode needs --params");
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool with_policy) {
    cmd->add_option("--config", o.config_path, "JSON experiment config");
    cmd->add_option("--env", o.env, "environment when no config file is given")
        ->check(CLI::IsMember({"frozen_lake", "lander", "custom_cmdp"}));
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--map", o.map_file, "grid map file (frozen_lake)");
    cmd->add_option_function<std::uint64_t>(
           "--seed", [&o](const std::uint64_t& v) { o.seed = v; o.seed_set = true; },
           "master seed");
    cmd->add_option("--workers", o.workers, "parallel students");
    if (with_policy) {
        cmd->add_option("--mode", o.mode, "curriculum mode")
            ->check(CLI::IsMember(
                {"no_intervention", "single_intervention", "optimized", "fixed_params"}));
        cmd->add_option("--intervention", o.intervention,
                        "intervention name for single_intervention");
        cmd->add_option("--params", o.params_file, "curriculum parameter file");
    }
}

void print_student_line(const cisr::StudentRunRecord& rec) {
    std::cout << "student " << rec.student_id << " seed " << rec.seed << " failures "
              << rec.training_failures << " teacher_reward " << rec.teacher_reward
              << " deploy_return " << rec.deploy_stats.expected_return << " success_rate "
              << rec.deploy_stats.success_rate << "\n";
}

int do_experiment(const cisr::ExperimentConfig& cfg) {
    const cisr::ExperimentResult res = cisr::run_experiment(cfg);
    for (const auto& rec : res.students) print_student_line(rec);
    std::vector<double> rewards, failures;
    for (const auto& rec : res.students) {
        rewards.push_back(rec.teacher_reward);
        failures.push_back(static_cast<double>(rec.training_failures));
    }
    const cisr::Aggregate agg = cisr::aggregate(rewards);
    const cisr::Aggregate fagg = cisr::aggregate(failures);
    std::cout << "teacher_reward mean " << agg.mean << " sd " << agg.sd << " ci95 ["
              << agg.ci95_lo << ", " << agg.ci95_hi << "]\n";
    std::cout << "training_failures mean " << fagg.mean << "\n";
    for (const std::string& f : res.files) std::cout << "wrote " << f << "\n";
    return 0;
}

int do_optimize(const cisr::ExperimentConfig& cfg) {
    const cisr::OptimizeOutput out = cisr::optimize_teacher(cfg);
    std::cout << "best_value " << out.best_value << "\n";
    std::cout << "sequence";
    for (int id : out.best_params.intervention_sequence) std::cout << " " << id;
    std::cout << "\nthresholds";
    for (const auto& [ret, gap] : out.best_params.switch_thresholds)
        std::cout << " (" << ret << ", " << gap << ")";
    std::cout << "\n";
    for (const std::string& f : out.files) std::cout << "wrote " << f << "\n";
    return 0;
}

int report_props(const std::string& label, const cisr::PropositionReport& r1,
                 const cisr::PropositionReport& r2, bool expect1, bool expect2) {
    int bad = 0;
    const auto line = [&](const char* prop, const cisr::PropositionReport& rep, bool expect) {
        const bool ok = rep.holds == expect;
        if (!ok) ++bad;
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << label << " " << prop
                  << (expect ? "" : " (violation expected)") << ": " << rep.summary << "\n";
    };
    line("eventual-safety", r1, expect1);
    line("learning-safety", r2, expect2);
    return bad;
}

int do_verify(const std::string& config_path, std::int64_t n_stochastic, std::uint64_t seed) {
    int bad = 0;
    if (config_path.empty()) {
        for (const cisr::PropFixture& fx : cisr::verification_fixtures(true)) {
            const auto r1 =
                cisr::verify_prop1(fx.base, fx.intervention, {}, n_stochastic, seed);
            const auto r2 = cisr::verify_prop2(fx.base, fx.intervention);
            bad += report_props(fx.name, r1, r2, fx.expect_prop1, fx.expect_prop2);
        }
    } else {
        const cisr::ExperimentConfig cfg = cisr::load_experiment_config(config_path);
        if (cfg.environment == cisr::EnvironmentKind::lander)
            throw cisr::ConfigInvalid(
                "verification enumerates policies and needs a finite-state model");
        const cisr::EnvBundle bundle = cisr::build_env_bundle(cfg);
        for (std::size_t i = 0; i < bundle.interventions->size(); ++i) {
            const cisr::Intervention& iv = (*bundle.interventions)[i];
            const auto r1 = cisr::verify_prop1(*bundle.base, iv, {}, n_stochastic, seed);
            const auto r2 = cisr::verify_prop2(*bundle.base, iv);
            bad += report_props(bundle.intervention_names[i], r1, r2, true, true);
        }
    }
    if (bad > 0) {
        std::cout << bad << " check(s) did not match expectations\n";
        return 3;
    }
    std::cout << "all checks passed\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"curriculum induction for safe reinforcement learning"};
    app.require_subcommand(1);

    CommonOpts train_o, run_o, opt_o, eval_o;
    std::string verify_config;
    std::int64_t verify_stochastic = 10'000;
    std::uint64_t verify_seed = 1;

    CLI::App* train = app.add_subcommand("train-student", "train one student and report it");
    add_common(train, train_o, true);
    CLI::App* run = app.add_subcommand("run-experiment", "train a cohort and write CSV results");
    add_common(run, run_o, true);
    run->add_option("--students", run_o.students, "number of students");
    CLI::App* opt = app.add_subcommand("optimize-teacher", "optimize the curriculum policy");
    add_common(opt, opt_o, false);
    CLI::App* eval = app.add_subcommand("eval", "evaluate a saved curriculum parameter file");
    add_common(eval, eval_o, false);
    eval->add_option("--params", eval_o.params_file, "curriculum parameter file")->required();
    eval->add_option("--students", eval_o.students, "number of students");
    CLI::App* verify =
        app.add_subcommand("verify-props", "brute-force the two safety propositions");
    verify->add_option("--config", verify_config,
                       "verify the configured environment's interventions instead of the "
                       "built-in fixtures");
    verify->add_option("--stochastic", verify_stochastic, "random stochastic policies per check");
    verify->add_option("--seed", verify_seed, "seed for the stochastic policies");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (app.got_subcommand(train)) {
            cisr::ExperimentConfig cfg = make_config(train_o);
            cfg.n_students = 1;
            return do_experiment(cfg);
        }
        if (app.got_subcommand(run)) return do_experiment(make_config(run_o));
        if (app.got_subcommand(opt)) return do_optimize(make_config(opt_o));
        if (app.got_subcommand(eval)) {
            CommonOpts o = eval_o;
            o.mode = "fixed_params";
            return do_experiment(make_config(o));
        }
        if (app.got_subcommand(verify))
            return do_verify(verify_config, verify_stochastic, verify_seed);
    } catch (const cisr::ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cisr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
