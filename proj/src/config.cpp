#include "cisr/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "json.hpp"

#include "cisr/errors.hpp"

namespace cisr {

using nlohmann::json;

const char* to_string(EnvironmentKind e) {
    switch (e) {
        case EnvironmentKind::frozen_lake: return "frozen_lake";
        case EnvironmentKind::lander: return "lander";
        case EnvironmentKind::custom_cmdp: return "custom_cmdp";
    }
    return "?";
}

const char* to_string(PolicyMode m) {
    switch (m) {
        case PolicyMode::no_intervention: return "no_intervention";
        case PolicyMode::single_intervention: return "single_intervention";
        case PolicyMode::optimized: return "optimized";
        case PolicyMode::fixed_params: return "fixed_params";
    }
    return "?";
}

std::uint64_t student_seed(const ExperimentConfig& cfg, int student_index) {
    const auto i = static_cast<std::size_t>(student_index);
    if (cfg.seeds.size() == static_cast<std::size_t>(cfg.n_students)) return cfg.seeds[i];
    if (cfg.seeds.size() == 1) return derive_seed(cfg.seeds[0], i);
    return derive_seed(cfg.base_seed, i);
}

GPHyperpriors default_teacher_priors(EnvironmentKind env, int max_switches) {
    const bool heavy = env == EnvironmentKind::lander;
    const double ret_m = heavy ? 20.0 : 1.0;
    const double ret_v = heavy ? 4.0 : 1.0;
    const double gap_m = heavy ? 1.0 : 0.05;
    const double gap_v = heavy ? 0.3 : 0.02;
    GPHyperpriors out;
    out.signal_variance = GammaPrior::from_mean_var(1.0, 0.2);
    for (int k = 0; k < max_switches; ++k) {
        out.lengthscales.push_back(GammaPrior::from_mean_var(ret_m, ret_v));
        out.lengthscales.push_back(GammaPrior::from_mean_var(gap_m, gap_v));
    }
    for (int k = 0; k <= max_switches; ++k)
        out.lengthscales.push_back(GammaPrior::from_mean_var(0.2, 0.2));
    out.noise_variance = GammaPrior::from_mean_var(0.01, 0.1);
    return out;
}

ExperimentConfig default_experiment_config(EnvironmentKind env) {
    ExperimentConfig cfg;
    cfg.environment = env;
    switch (env) {
        case EnvironmentKind::frozen_lake:
        case EnvironmentKind::custom_cmdp:
            cfg.teacher.n_rounds = 20;
            cfg.opt.init_count = 10;
            cfg.opt.students_per_datum = 1;
            cfg.unit_eval_steps = 2000;
            break;
        case EnvironmentKind::lander:
            cfg.solver.bound_B = 120.0;
            cfg.solver.ent_coef = 0.001;
            cfg.teacher.units_per_student = 15;
            cfg.teacher.unit_steps = 100000;
            cfg.teacher.max_switches = 1;
            cfg.teacher.eval_horizon = 200000;
            cfg.teacher.r_max = 100.0;
            cfg.teacher.horizon_T = 500;
            cfg.teacher.kappa = 0.1;
            cfg.teacher.n_rounds = 10;
            cfg.opt.init_count = 4;
            cfg.opt.students_per_datum = 10;
            cfg.opt.ret_lo = -100.0;
            cfg.opt.ret_hi = 200.0;
            cfg.opt.gap_lo = -0.1;
            cfg.opt.gap_hi = 20.0;
            cfg.unit_eval_steps = 0;
            break;
    }
    cfg.opt.priors = default_teacher_priors(env, cfg.teacher.max_switches);
    return cfg;
}

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& path,
                       const std::string& what) {
    throw ConfigInvalid(origin + ": " + path + ": " + what);
}

std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

void check_keys(const json& j, const std::string& origin, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) fail(origin, join_path(path, it.key()), "unknown key");
    }
}

double as_num(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_number()) fail(origin, path, "expected a number");
    return j.get<double>();
}

int as_int(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_number_integer()) fail(origin, path, "expected an integer");
    return j.get<int>();
}

std::int64_t as_i64(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_number_integer()) fail(origin, path, "expected an integer");
    return j.get<std::int64_t>();
}

std::uint64_t as_u64(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_number_integer() || (j.is_number_integer() && j.get<std::int64_t>() < 0 &&
                                   !j.is_number_unsigned()))
        fail(origin, path, "expected a nonnegative integer");
    return j.get<std::uint64_t>();
}

bool as_bool(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_boolean()) fail(origin, path, "expected a boolean");
    return j.get<bool>();
}

std::string as_str(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_string()) fail(origin, path, "expected a string");
    return j.get<std::string>();
}

void parse_solver(const json& j, SolverConfig& s, const std::string& origin,
                  const std::string& path) {
    check_keys(j, origin, path,
               {"eta", "bound_B", "primal_steps_per_epoch", "epochs_per_unit", "learning_rate",
                "value_learning_rate", "ent_coef", "exploration_temperature", "eval_rollouts"});
    if (j.contains("eta")) s.eta = as_num(j["eta"], origin, join_path(path, "eta"));
    if (j.contains("bound_B")) s.bound_B = as_num(j["bound_B"], origin, join_path(path, "bound_B"));
    if (j.contains("primal_steps_per_epoch"))
        s.primal_steps_per_epoch =
            as_int(j["primal_steps_per_epoch"], origin, join_path(path, "primal_steps_per_epoch"));
    if (j.contains("epochs_per_unit"))
        s.epochs_per_unit = as_int(j["epochs_per_unit"], origin, join_path(path, "epochs_per_unit"));
    if (j.contains("learning_rate"))
        s.learning_rate = as_num(j["learning_rate"], origin, join_path(path, "learning_rate"));
    if (j.contains("value_learning_rate"))
        s.value_learning_rate =
            as_num(j["value_learning_rate"], origin, join_path(path, "value_learning_rate"));
    if (j.contains("ent_coef")) s.ent_coef = as_num(j["ent_coef"], origin, join_path(path, "ent_coef"));
    if (j.contains("exploration_temperature"))
        s.exploration_temperature = as_num(j["exploration_temperature"], origin,
                                           join_path(path, "exploration_temperature"));
    if (j.contains("eval_rollouts"))
        s.eval_rollouts = as_int(j["eval_rollouts"], origin, join_path(path, "eval_rollouts"));
    if (s.eta <= 0.0) fail(origin, join_path(path, "eta"), "must be positive");
    if (s.bound_B <= 0.0) fail(origin, join_path(path, "bound_B"), "must be positive");
    if (s.primal_steps_per_epoch < 1)
        fail(origin, join_path(path, "primal_steps_per_epoch"), "must be >= 1");
    if (s.epochs_per_unit < 1) fail(origin, join_path(path, "epochs_per_unit"), "must be >= 1");
    if (s.eval_rollouts < 1) fail(origin, join_path(path, "eval_rollouts"), "must be >= 1");
}

void parse_teacher(const json& j, CISRConfig& t, const std::string& origin,
                   const std::string& path) {
    check_keys(j, origin, path,
               {"n_rounds", "units_per_student", "unit_steps", "max_switches", "eval_horizon",
                "r_max", "horizon_T", "kappa"});
    if (j.contains("n_rounds")) t.n_rounds = as_int(j["n_rounds"], origin, join_path(path, "n_rounds"));
    if (j.contains("units_per_student"))
        t.units_per_student =
            as_int(j["units_per_student"], origin, join_path(path, "units_per_student"));
    if (j.contains("unit_steps"))
        t.unit_steps = as_i64(j["unit_steps"], origin, join_path(path, "unit_steps"));
    if (j.contains("max_switches"))
        t.max_switches = as_int(j["max_switches"], origin, join_path(path, "max_switches"));
    if (j.contains("eval_horizon"))
        t.eval_horizon = as_i64(j["eval_horizon"], origin, join_path(path, "eval_horizon"));
    if (j.contains("r_max")) t.r_max = as_num(j["r_max"], origin, join_path(path, "r_max"));
    if (j.contains("horizon_T"))
        t.horizon_T = as_i64(j["horizon_T"], origin, join_path(path, "horizon_T"));
    if (j.contains("kappa")) t.kappa = as_num(j["kappa"], origin, join_path(path, "kappa"));
    if (t.n_rounds < 0) fail(origin, join_path(path, "n_rounds"), "must be >= 0");
    if (t.units_per_student < 1) fail(origin, join_path(path, "units_per_student"), "must be >= 1");
    if (t.unit_steps < 1) fail(origin, join_path(path, "unit_steps"), "must be >= 1");
    if (t.max_switches < 0) fail(origin, join_path(path, "max_switches"), "must be >= 0");
    if (t.eval_horizon < 1) fail(origin, join_path(path, "eval_horizon"), "must be >= 1");
}

GammaPrior parse_prior_pair(const json& j, const std::string& origin, const std::string& path) {
    if (!j.is_array() || j.size() != 2)
        fail(origin, path, "expected [mean, variance]");
    const double mean = as_num(j[0], origin, path + "[0]");
    const double var = as_num(j[1], origin, path + "[1]");
    if (mean <= 0.0 || var <= 0.0) fail(origin, path, "mean and variance must be positive");
    return GammaPrior::from_mean_var(mean, var);
}

void parse_optimizer(const json& j, TeacherOptConfig& o, bool& priors_given,
                     const std::string& origin, const std::string& path) {
    check_keys(j, origin, path,
               {"init_count", "students_per_datum", "ret_lo", "ret_hi", "gap_lo", "gap_hi",
                "map_restarts", "ucb", "priors"});
    if (j.contains("init_count"))
        o.init_count = as_int(j["init_count"], origin, join_path(path, "init_count"));
    if (j.contains("students_per_datum"))
        o.students_per_datum =
            as_int(j["students_per_datum"], origin, join_path(path, "students_per_datum"));
    if (j.contains("ret_lo")) o.ret_lo = as_num(j["ret_lo"], origin, join_path(path, "ret_lo"));
    if (j.contains("ret_hi")) o.ret_hi = as_num(j["ret_hi"], origin, join_path(path, "ret_hi"));
    if (j.contains("gap_lo")) o.gap_lo = as_num(j["gap_lo"], origin, join_path(path, "gap_lo"));
    if (j.contains("gap_hi")) o.gap_hi = as_num(j["gap_hi"], origin, join_path(path, "gap_hi"));
    if (j.contains("map_restarts"))
        o.map_restarts = as_int(j["map_restarts"], origin, join_path(path, "map_restarts"));
    if (j.contains("ucb")) {
        const json& u = j["ucb"];
        const std::string upath = join_path(path, "ucb");
        check_keys(u, origin, upath, {"beta", "candidate_count", "restarts", "local_search_iters"});
        if (u.contains("beta")) o.ucb.beta = as_num(u["beta"], origin, join_path(upath, "beta"));
        if (u.contains("candidate_count"))
            o.ucb.candidate_count =
                as_int(u["candidate_count"], origin, join_path(upath, "candidate_count"));
        if (u.contains("restarts"))
            o.ucb.restarts = as_int(u["restarts"], origin, join_path(upath, "restarts"));
        if (u.contains("local_search_iters"))
            o.ucb.local_search_iters =
                as_int(u["local_search_iters"], origin, join_path(upath, "local_search_iters"));
    }
    if (j.contains("priors")) {
        const json& p = j["priors"];
        const std::string ppath = join_path(path, "priors");
        check_keys(p, origin, ppath, {"signal_variance", "lengthscales", "noise_variance"});
        if (!p.contains("signal_variance") || !p.contains("lengthscales") ||
            !p.contains("noise_variance"))
            fail(origin, ppath, "needs signal_variance, lengthscales and noise_variance");
        GPHyperpriors priors;
        priors.signal_variance =
            parse_prior_pair(p["signal_variance"], origin, join_path(ppath, "signal_variance"));
        const json& ls = p["lengthscales"];
        if (!ls.is_array()) fail(origin, join_path(ppath, "lengthscales"), "expected an array");
        for (std::size_t i = 0; i < ls.size(); ++i)
            priors.lengthscales.push_back(parse_prior_pair(
                ls[i], origin, join_path(ppath, "lengthscales") + "[" + std::to_string(i) + "]"));
        priors.noise_variance =
            parse_prior_pair(p["noise_variance"], origin, join_path(ppath, "noise_variance"));
        o.priors = std::move(priors);
        priors_given = true;
    }
    if (o.init_count < 1) fail(origin, join_path(path, "init_count"), "must be >= 1");
    if (o.students_per_datum < 1)
        fail(origin, join_path(path, "students_per_datum"), "must be >= 1");
    if (!(o.ret_lo < o.ret_hi)) fail(origin, join_path(path, "ret_lo"), "need ret_lo < ret_hi");
    if (!(o.gap_lo < o.gap_hi)) fail(origin, join_path(path, "gap_lo"), "need gap_lo < gap_hi");
}

void parse_flake(const json& j, FrozenLakeConfig& f, const std::string& origin,
                 const std::string& path) {
    check_keys(j, origin, path,
               {"p_intended", "p_orthogonal", "goal_reward", "step_reward", "kappa", "horizon"});
    if (j.contains("p_intended"))
        f.p_intended = as_num(j["p_intended"], origin, join_path(path, "p_intended"));
    if (j.contains("p_orthogonal"))
        f.p_orthogonal = as_num(j["p_orthogonal"], origin, join_path(path, "p_orthogonal"));
    if (j.contains("goal_reward"))
        f.goal_reward = as_num(j["goal_reward"], origin, join_path(path, "goal_reward"));
    if (j.contains("step_reward"))
        f.step_reward = as_num(j["step_reward"], origin, join_path(path, "step_reward"));
    if (j.contains("kappa")) f.kappa = as_num(j["kappa"], origin, join_path(path, "kappa"));
    if (j.contains("horizon")) f.horizon = as_int(j["horizon"], origin, join_path(path, "horizon"));
    if (f.horizon < 1) fail(origin, join_path(path, "horizon"), "must be >= 1");
}

void parse_lander(const json& j, LanderConfig& l, const std::string& origin,
                  const std::string& path) {
    check_keys(j, origin, path,
               {"gravity",        "main_thrust",   "side_thrust",     "side_torque",
                "angular_damping", "dt",           "reward_land",     "cost_main",
                "cost_side",      "crash_reward",  "timeout_reward",  "timeout_train",
                "timeout_deploy", "land_speed_max", "land_angle_max", "shaping_coef",
                "trigger_magnitude_form", "kappa", "tiles_x",         "tiles_y",
                "tiles_ydot",     "tiles_alpha",   "start_y",         "narrow_tau",
                "wide_tau"});
    const auto num = [&](const char* key, double& target) {
        if (j.contains(key)) target = as_num(j[key], origin, join_path(path, key));
    };
    const auto integer = [&](const char* key, int& target) {
        if (j.contains(key)) target = as_int(j[key], origin, join_path(path, key));
    };
    num("gravity", l.gravity);
    num("main_thrust", l.main_thrust);
    num("side_thrust", l.side_thrust);
    num("side_torque", l.side_torque);
    num("angular_damping", l.angular_damping);
    num("dt", l.dt);
    num("reward_land", l.reward_land);
    num("cost_main", l.cost_main);
    num("cost_side", l.cost_side);
    num("crash_reward", l.crash_reward);
    num("timeout_reward", l.timeout_reward);
    integer("timeout_train", l.timeout_train);
    integer("timeout_deploy", l.timeout_deploy);
    num("land_speed_max", l.land_speed_max);
    num("land_angle_max", l.land_angle_max);
    num("shaping_coef", l.shaping_coef);
    if (j.contains("trigger_magnitude_form"))
        l.trigger_magnitude_form = as_bool(j["trigger_magnitude_form"], origin,
                                           join_path(path, "trigger_magnitude_form"));
    num("kappa", l.kappa);
    integer("tiles_x", l.tiles_x);
    integer("tiles_y", l.tiles_y);
    integer("tiles_ydot", l.tiles_ydot);
    integer("tiles_alpha", l.tiles_alpha);
    num("start_y", l.start_y);
    if (l.timeout_train < 1) fail(origin, join_path(path, "timeout_train"), "must be >= 1");
    if (l.timeout_deploy < 1) fail(origin, join_path(path, "timeout_deploy"), "must be >= 1");
    if (l.dt <= 0.0) fail(origin, join_path(path, "dt"), "must be positive");
}

std::vector<double> parse_tensor3(const json& j, int n_states, int n_actions,
                                  const std::string& origin, const std::string& path) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_states) * n_actions * n_states);
    if (!j.is_array() || static_cast<int>(j.size()) != n_states)
        fail(origin, path, "expected " + std::to_string(n_states) + " state rows");
    for (int s = 0; s < n_states; ++s) {
        const json& row_a = j[s];
        if (!row_a.is_array() || static_cast<int>(row_a.size()) != n_actions)
            fail(origin, path + "[" + std::to_string(s) + "]",
                 "expected " + std::to_string(n_actions) + " action rows");
        for (int a = 0; a < n_actions; ++a) {
            const json& row_s = row_a[a];
            if (!row_s.is_array() || static_cast<int>(row_s.size()) != n_states)
                fail(origin, path + "[" + std::to_string(s) + "][" + std::to_string(a) + "]",
                     "expected " + std::to_string(n_states) + " entries");
            for (int t = 0; t < n_states; ++t)
                out.push_back(as_num(row_s[t], origin,
                                     path + "[" + std::to_string(s) + "][" + std::to_string(a) +
                                         "][" + std::to_string(t) + "]"));
        }
    }
    return out;
}

std::vector<std::uint8_t> parse_state_set(const json& j, int n_states, const std::string& origin,
                                          const std::string& path) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n_states), 0);
    if (!j.is_array()) fail(origin, path, "expected an array of state ids");
    for (std::size_t i = 0; i < j.size(); ++i) {
        const int s = as_int(j[i], origin, path + "[" + std::to_string(i) + "]");
        if (s < 0 || s >= n_states)
            fail(origin, path + "[" + std::to_string(i) + "]", "state id out of range");
        mask[static_cast<std::size_t>(s)] = 1;
    }
    return mask;
}

CustomCMDPSpec parse_custom(const json& j, const std::string& origin, const std::string& path) {
    check_keys(j, origin, path,
               {"n_states", "n_actions", "horizon", "kappa", "transition", "reward",
                "initial_dist", "terminal", "unsafe", "interventions"});
    for (const char* key : {"n_states", "n_actions", "horizon", "transition", "initial_dist",
                            "terminal", "unsafe"})
        if (!j.contains(key)) fail(origin, join_path(path, key), "missing");
    const int n = as_int(j["n_states"], origin, join_path(path, "n_states"));
    const int m = as_int(j["n_actions"], origin, join_path(path, "n_actions"));
    const int horizon = as_int(j["horizon"], origin, join_path(path, "horizon"));
    if (n < 1 || m < 1 || horizon < 1)
        fail(origin, path, "n_states, n_actions and horizon must be >= 1");
    const double kappa =
        j.contains("kappa") ? as_num(j["kappa"], origin, join_path(path, "kappa")) : 0.0;

    std::vector<double> transition =
        parse_tensor3(j["transition"], n, m, origin, join_path(path, "transition"));
    std::vector<double> reward;
    if (j.contains("reward")) {
        if (j["reward"].is_number()) {
            reward.assign(static_cast<std::size_t>(n) * m * n,
                          as_num(j["reward"], origin, join_path(path, "reward")));
        } else {
            reward = parse_tensor3(j["reward"], n, m, origin, join_path(path, "reward"));
        }
    } else {
        reward.assign(static_cast<std::size_t>(n) * m * n, 0.0);
    }

    const json& init = j["initial_dist"];
    std::vector<double> initial_dist(static_cast<std::size_t>(n), 0.0);
    if (init.is_number_integer()) {
        const int s = init.get<int>();
        if (s < 0 || s >= n) fail(origin, join_path(path, "initial_dist"), "state id out of range");
        initial_dist[static_cast<std::size_t>(s)] = 1.0;
    } else if (init.is_array() && static_cast<int>(init.size()) == n) {
        for (int s = 0; s < n; ++s)
            initial_dist[static_cast<std::size_t>(s)] = as_num(
                init[s], origin, join_path(path, "initial_dist") + "[" + std::to_string(s) + "]");
    } else {
        fail(origin, join_path(path, "initial_dist"),
             "expected a state id or an array of " + std::to_string(n) + " probabilities");
    }

    const auto terminal = parse_state_set(j["terminal"], n, origin, join_path(path, "terminal"));
    const auto unsafe = parse_state_set(j["unsafe"], n, origin, join_path(path, "unsafe"));

    CustomCMDPSpec spec;
    try {
        spec.cmdp = build_cmdp(n, m, horizon, std::move(transition), std::move(reward),
                               std::move(initial_dist), terminal, unsafe, kappa);
    } catch (const Error& e) {
        fail(origin, path, std::string("invalid model: ") + e.what());
    }

    if (j.contains("interventions")) {
        const json& ivs = j["interventions"];
        if (!ivs.is_array()) fail(origin, join_path(path, "interventions"), "expected an array");
        for (std::size_t i = 0; i < ivs.size(); ++i) {
            const json& v = ivs[i];
            const std::string vpath =
                join_path(path, "interventions") + "[" + std::to_string(i) + "]";
            check_keys(v, origin, vpath, {"name", "trigger", "mode", "kernel", "tau", "kappa_i"});
            for (const char* key : {"name", "trigger"})
                if (!v.contains(key)) fail(origin, join_path(vpath, key), "missing");
            const std::string name = as_str(v["name"], origin, join_path(vpath, "name"));
            const auto trig_mask =
                parse_state_set(v["trigger"], n, origin, join_path(vpath, "trigger"));
            std::vector<int> trig_states;
            for (int s = 0; s < n; ++s)
                if (trig_mask[static_cast<std::size_t>(s)]) trig_states.push_back(s);

            ResetMode mode = ResetMode::to_previous_state;
            if (v.contains("mode")) {
                const std::string ms = as_str(v["mode"], origin, join_path(vpath, "mode"));
                if (ms == "to_previous_state") mode = ResetMode::to_previous_state;
                else if (ms == "to_initial_distribution") mode = ResetMode::to_initial_distribution;
                else if (ms == "fixed_kernel") mode = ResetMode::fixed_kernel;
                else fail(origin, join_path(vpath, "mode"), "unknown reset mode '" + ms + "'");
            }
            const double tau =
                v.contains("tau") ? as_num(v["tau"], origin, join_path(vpath, "tau")) : 0.0;
            const double kappa_i =
                v.contains("kappa_i") ? as_num(v["kappa_i"], origin, join_path(vpath, "kappa_i"))
                                      : 0.0;

            std::vector<double> kernel;
            try {
                if (v.contains("kernel") && v["kernel"].is_array()) {
                    const json& rows = v["kernel"];
                    if (static_cast<int>(rows.size()) != n)
                        fail(origin, join_path(vpath, "kernel"),
                             "expected " + std::to_string(n) + " rows");
                    for (int s = 0; s < n; ++s) {
                        const json& row = rows[s];
                        if (!row.is_array() || static_cast<int>(row.size()) != n)
                            fail(origin,
                                 join_path(vpath, "kernel") + "[" + std::to_string(s) + "]",
                                 "expected " + std::to_string(n) + " entries");
                        for (int t = 0; t < n; ++t)
                            kernel.push_back(as_num(row[t], origin,
                                                    join_path(vpath, "kernel") + "[" +
                                                        std::to_string(s) + "][" +
                                                        std::to_string(t) + "]"));
                    }
                } else if (v.contains("kernel") && v["kernel"].is_string()) {
                    const std::string ks = as_str(v["kernel"], origin, join_path(vpath, "kernel"));
                    if (ks == "nearest_safe_predecessor")
                        kernel = nearest_safe_predecessor_kernel(spec.cmdp, trig_mask);
                    else if (ks == "from_initial")
                        kernel = kernel_from_initial(spec.cmdp, trig_mask);
                    else
                        fail(origin, join_path(vpath, "kernel"), "unknown kernel '" + ks + "'");
                } else if (mode == ResetMode::to_initial_distribution) {
                    kernel = kernel_from_initial(spec.cmdp, trig_mask);
                } else {
                    kernel = nearest_safe_predecessor_kernel(spec.cmdp, trig_mask);
                }
                spec.interventions.push_back(
                    make_intervention(name, n, trig_states, mode, std::move(kernel), tau, kappa_i));
            } catch (const ConfigInvalid&) {
                throw;
            } catch (const Error& e) {
                fail(origin, vpath, std::string("invalid intervention: ") + e.what());
            }
        }
    }
    return spec;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& origin) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigInvalid(origin + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigInvalid(origin + ": top level must be an object");

    check_keys(j, origin, "",
               {"environment", "policy_mode", "n_students", "seed", "seeds", "output_dir",
                "map_file", "workers", "unit_eval_steps", "frozen_lake", "lander", "student",
                "teacher", "optimizer", "custom"});

    EnvironmentKind env = EnvironmentKind::frozen_lake;
    if (j.contains("environment")) {
        const std::string es = as_str(j["environment"], origin, "environment");
        if (es == "frozen_lake") env = EnvironmentKind::frozen_lake;
        else if (es == "lander") env = EnvironmentKind::lander;
        else if (es == "custom_cmdp") env = EnvironmentKind::custom_cmdp;
        else fail(origin, "environment", "unknown environment '" + es + "'");
    }
    ExperimentConfig cfg = default_experiment_config(env);

    if (j.contains("policy_mode")) {
        const json& pm = j["policy_mode"];
        std::string mode_str;
        if (pm.is_string()) {
            mode_str = pm.get<std::string>();
        } else if (pm.is_object()) {
            check_keys(pm, origin, "policy_mode", {"mode", "intervention", "file"});
            if (!pm.contains("mode")) fail(origin, "policy_mode.mode", "missing");
            mode_str = as_str(pm["mode"], origin, "policy_mode.mode");
            if (pm.contains("intervention"))
                cfg.intervention_name =
                    as_str(pm["intervention"], origin, "policy_mode.intervention");
            if (pm.contains("file")) cfg.params_file = as_str(pm["file"], origin, "policy_mode.file");
        } else {
            fail(origin, "policy_mode", "expected a string or an object");
        }
        if (mode_str == "no_intervention") cfg.mode = PolicyMode::no_intervention;
        else if (mode_str == "single_intervention") cfg.mode = PolicyMode::single_intervention;
        else if (mode_str == "optimized") cfg.mode = PolicyMode::optimized;
        else if (mode_str == "fixed_params") cfg.mode = PolicyMode::fixed_params;
        else fail(origin, "policy_mode", "unknown mode '" + mode_str + "'");
        if (cfg.mode == PolicyMode::single_intervention && cfg.intervention_name.empty())
            fail(origin, "policy_mode.intervention", "required for single_intervention");
        if (cfg.mode == PolicyMode::fixed_params && cfg.params_file.empty())
            fail(origin, "policy_mode.file", "required for fixed_params");
    }

    if (j.contains("n_students")) {
        cfg.n_students = as_int(j["n_students"], origin, "n_students");
        if (cfg.n_students < 1) fail(origin, "n_students", "must be >= 1");
    }
    if (j.contains("seed")) cfg.base_seed = as_u64(j["seed"], origin, "seed");
    if (j.contains("seeds")) {
        const json& seeds = j["seeds"];
        if (!seeds.is_array()) fail(origin, "seeds", "expected an array");
        for (std::size_t i = 0; i < seeds.size(); ++i)
            cfg.seeds.push_back(as_u64(seeds[i], origin, "seeds[" + std::to_string(i) + "]"));
        if (cfg.seeds.size() != 1 && cfg.seeds.size() != static_cast<std::size_t>(cfg.n_students))
            fail(origin, "seeds", "length must be 1 or n_students");
    }
    if (j.contains("output_dir")) cfg.output_dir = as_str(j["output_dir"], origin, "output_dir");
    if (j.contains("map_file")) cfg.map_file = as_str(j["map_file"], origin, "map_file");
    if (j.contains("workers")) {
        cfg.workers = as_int(j["workers"], origin, "workers");
        if (cfg.workers < 1) fail(origin, "workers", "must be >= 1");
    }
    if (j.contains("unit_eval_steps")) {
        cfg.unit_eval_steps = as_i64(j["unit_eval_steps"], origin, "unit_eval_steps");
        if (cfg.unit_eval_steps < 0) fail(origin, "unit_eval_steps", "must be >= 0");
    }

    if (j.contains("frozen_lake")) parse_flake(j["frozen_lake"], cfg.flake, origin, "frozen_lake");
    if (j.contains("lander")) parse_lander(j["lander"], cfg.lander, origin, "lander");
    if (j.contains("student")) parse_solver(j["student"], cfg.solver, origin, "student");
    if (j.contains("teacher")) parse_teacher(j["teacher"], cfg.teacher, origin, "teacher");

    bool priors_given = false;
    if (j.contains("optimizer"))
        parse_optimizer(j["optimizer"], cfg.opt, priors_given, origin, "optimizer");
    if (!priors_given)
        cfg.opt.priors = default_teacher_priors(env, cfg.teacher.max_switches);
    const std::size_t want_dims = static_cast<std::size_t>(3 * cfg.teacher.max_switches + 1);
    if (cfg.opt.priors.lengthscales.size() != want_dims)
        fail(origin, "optimizer.priors.lengthscales",
             "need exactly " + std::to_string(want_dims) + " entries for max_switches = " +
                 std::to_string(cfg.teacher.max_switches));

    if (env == EnvironmentKind::custom_cmdp) {
        if (!j.contains("custom")) fail(origin, "custom", "required for custom_cmdp");
        cfg.custom = parse_custom(j["custom"], origin, "custom");
    } else if (j.contains("custom")) {
        fail(origin, "custom", "only valid with environment = custom_cmdp");
    }

    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigInvalid(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_experiment_config(buf.str(), path);
}

void save_params_file(const std::string& path, const CurriculumPolicyParams& params,
                      double value) {
    json j;
    j["max_switches"] = params.max_switches();
    j["intervention_sequence"] = params.intervention_sequence;
    json thresholds = json::array();
    for (const auto& [ret, gap] : params.switch_thresholds)
        thresholds.push_back(json::array({ret, gap}));
    j["switch_thresholds"] = std::move(thresholds);
    j["value"] = value;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigInvalid(path + ": cannot open params file for writing");
    out << j.dump(2) << "\n";
}

std::pair<CurriculumPolicyParams, double> load_params_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigInvalid(path + ": cannot open params file");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigInvalid(path + ": not valid JSON: " + e.what());
    }
    check_keys(j, path, "", {"max_switches", "intervention_sequence", "switch_thresholds", "value"});
    for (const char* key : {"max_switches", "intervention_sequence", "switch_thresholds"})
        if (!j.contains(key)) fail(path, key, "missing");
    const int K = as_int(j["max_switches"], path, "max_switches");
    if (K < 0) fail(path, "max_switches", "must be >= 0");
    CurriculumPolicyParams params;
    const json& seq = j["intervention_sequence"];
    if (!seq.is_array() || static_cast<int>(seq.size()) != K + 1)
        fail(path, "intervention_sequence", "expected " + std::to_string(K + 1) + " ids");
    for (std::size_t i = 0; i < seq.size(); ++i)
        params.intervention_sequence.push_back(
            as_int(seq[i], path, "intervention_sequence[" + std::to_string(i) + "]"));
    const json& th = j["switch_thresholds"];
    if (!th.is_array() || static_cast<int>(th.size()) != K)
        fail(path, "switch_thresholds", "expected " + std::to_string(K) + " pairs");
    for (std::size_t i = 0; i < th.size(); ++i) {
        const json& pair = th[i];
        const std::string ppath = "switch_thresholds[" + std::to_string(i) + "]";
        if (!pair.is_array() || pair.size() != 2) fail(path, ppath, "expected [return, gap]");
        params.switch_thresholds.emplace_back(as_num(pair[0], path, ppath + "[0]"),
                                              as_num(pair[1], path, ppath + "[1]"));
    }
    const double value = j.contains("value") ? as_num(j["value"], path, "value") : 0.0;
    return {params, value};
}

}  // namespace cisr
