#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cisr/config.hpp"
#include "cisr/errors.hpp"
#include "cisr/experiment.hpp"
#include "cisr/gp.hpp"
#include "cisr/oracle.hpp"
#include "cisr/student.hpp"

namespace py = pybind11;
using namespace cisr;

namespace {

py::dict stats_dict(const PolicyStats& s) {
    py::dict d;
    d["expected_return"] = s.expected_return;
    d["success_rate"] = s.success_rate;
    d["expected_unsafe_visits"] = s.expected_unsafe_visits;
    d["episodes"] = s.episodes;
    d["trigger_visits"] = s.trigger_visits;
    return d;
}

py::dict params_dict(const CurriculumPolicyParams& p) {
    py::dict d;
    d["intervention_sequence"] = p.intervention_sequence;
    py::list thresholds;
    for (const auto& [ret, gap] : p.switch_thresholds)
        thresholds.append(py::make_tuple(ret, gap));
    d["switch_thresholds"] = std::move(thresholds);
    return d;
}

ExperimentConfig config_from_json(const std::string& json_text, const std::string& output_dir) {
    ExperimentConfig cfg = parse_experiment_config(json_text, "<python>");
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    return cfg;
}

py::dict report_dict(const std::string& name, const char* prop, const PropositionReport& r) {
    py::dict d;
    d["name"] = name;
    d["proposition"] = prop;
    d["holds"] = r.holds;
    d["premise_holds"] = r.premise_holds;
    d["n_deterministic"] = r.n_deterministic;
    d["n_stochastic"] = r.n_stochastic;
    d["counterexamples"] = static_cast<std::int64_t>(r.counterexamples.size());
    d["summary"] = r.summary;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "curriculum induction for safe reinforcement learning";

    py::register_exception<Error>(m, "CisrError");

    m.def(
        "run_experiment",
        [](const std::string& config_json, const std::string& output_dir) {
            const ExperimentConfig cfg = config_from_json(config_json, output_dir);
            ExperimentResult res;
            {
                py::gil_scoped_release release;
                res = run_experiment(cfg);
            }
            py::dict d;
            d["params"] = params_dict(res.params);
            d["params_value"] = res.params_value;
            d["files"] = res.files;
            py::list students;
            for (const StudentRunRecord& rec : res.students) {
                py::dict s;
                s["student_id"] = rec.student_id;
                s["seed"] = rec.seed;
                s["training_failures"] = rec.training_failures;
                s["teacher_reward"] = rec.teacher_reward;
                s["switch_log"] = rec.switch_log;
                s["deploy"] = stats_dict(rec.deploy_stats);
                students.append(std::move(s));
            }
            d["students"] = std::move(students);
            return d;
        },
        py::arg("config_json"), py::arg("output_dir") = std::string(),
        "Train a cohort under the configured curriculum mode and write csv results.");

    m.def(
        "optimize_teacher",
        [](const std::string& config_json, const std::string& output_dir) {
            const ExperimentConfig cfg = config_from_json(config_json, output_dir);
            OptimizeOutput out;
            {
                py::gil_scoped_release release;
                out = optimize_teacher(cfg);
            }
            py::dict d;
            d["best_params"] = params_dict(out.best_params);
            d["best_value"] = out.best_value;
            d["rounds"] = static_cast<std::int64_t>(out.trace.records.size());
            d["files"] = out.files;
            return d;
        },
        py::arg("config_json"), py::arg("output_dir") = std::string(),
        "Run the curriculum optimization and write trace.csv and best_params.json.");

    m.def(
        "verify_props",
        [](const std::string& config_json, std::int64_t n_stochastic, std::uint64_t seed,
           bool include_broken) {
            py::list out;
            if (config_json.empty()) {
                for (const PropFixture& fx : verification_fixtures(include_broken)) {
                    const auto r1 = verify_prop1(fx.base, fx.intervention, {}, n_stochastic, seed);
                    const auto r2 = verify_prop2(fx.base, fx.intervention);
                    py::dict d1 = report_dict(fx.name, "eventual_safety", r1);
                    d1["expected"] = fx.expect_prop1;
                    py::dict d2 = report_dict(fx.name, "learning_safety", r2);
                    d2["expected"] = fx.expect_prop2;
                    out.append(std::move(d1));
                    out.append(std::move(d2));
                }
                return out;
            }
            const ExperimentConfig cfg = config_from_json(config_json, "");
            if (cfg.environment == EnvironmentKind::lander)
                throw ConfigInvalid("verification enumerates policies and needs a finite-state model");
            const EnvBundle bundle = build_env_bundle(cfg);
            for (std::size_t i = 0; i < bundle.interventions->size(); ++i) {
                const Intervention& iv = (*bundle.interventions)[i];
                const auto r1 = verify_prop1(*bundle.base, iv, {}, n_stochastic, seed);
                const auto r2 = verify_prop2(*bundle.base, iv);
                py::dict d1 = report_dict(bundle.intervention_names[i], "eventual_safety", r1);
                d1["expected"] = true;
                py::dict d2 = report_dict(bundle.intervention_names[i], "learning_safety", r2);
                d2["expected"] = true;
                out.append(std::move(d1));
                out.append(std::move(d2));
            }
            return out;
        },
        py::arg("config_json") = std::string(), py::arg("n_stochastic") = 10'000,
        py::arg("seed") = 1, py::arg("include_broken") = true,
        "Brute-force both safety propositions on the built-in fixtures or a configured model.");

    m.def(
        "dual_update",
        [](const std::vector<double>& lambdas, double bound, double eta,
           const std::vector<double>& gaps) {
            LagrangeState state;
            state.lambda = lambdas;
            state.bound_B = bound;
            return dual_update_eg(state, gaps, eta).lambda;
        },
        py::arg("lambdas"), py::arg("bound"), py::arg("eta"), py::arg("gaps"),
        "One exponentiated-gradient step on the scaled simplex with explicit slack.");

    m.def(
        "gp_posterior",
        [](const std::vector<std::vector<double>>& inputs, const std::vector<double>& targets,
           const std::vector<double>& query, double signal_variance,
           const std::vector<double>& lengthscales, double noise_variance) {
            GPModel model;
            model.inputs = inputs;
            model.targets = targets;
            model.hyper.signal_variance = signal_variance;
            model.hyper.lengthscales = lengthscales;
            model.hyper.noise_variance = noise_variance;
            const auto [mean, var] = gp_posterior(model, query);
            return py::make_tuple(mean, var);
        },
        py::arg("inputs"), py::arg("targets"), py::arg("query"), py::arg("signal_variance"),
        py::arg("lengthscales"), py::arg("noise_variance"),
        "Exact GP posterior mean and variance under a squared-exponential kernel.");

    m.def(
        "solve_exact",
        [](const std::string& config_json) {
            const ExperimentConfig cfg = config_from_json(config_json, "");
            if (!cfg.custom) throw ConfigInvalid("solve_exact needs a custom_cmdp config");
            const OracleSolution sol = solve_exact(cfg.custom->cmdp);
            py::dict d;
            d["actions"] = sol.actions;
            d["expected_return"] = sol.expected_return;
            d["expected_unsafe_visits"] = sol.expected_unsafe_visits;
            d["n_enumerated"] = sol.n_enumerated;
            return d;
        },
        py::arg("config_json"),
        "Exact constrained optimum over deterministic policies for an inline model.");
}
