#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"

#include "cisr/config.hpp"
#include "cisr/csv.hpp"
#include "cisr/errors.hpp"
#include "cisr/experiment.hpp"
#include "cisr/rng.hpp"
#include "test_util.hpp"

using namespace cisr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& leaf) {
    const fs::path dir = fs::temp_directory_path() / "cisr_harness" / leaf;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

// Parsing must throw ConfigInvalid and name the offending field path.
void expect_config_error(const std::string& json_text, const std::string& needle) {
    try {
        parse_experiment_config(json_text, "t");
        FAIL_CHECK("no error for " << json_text);
    } catch (const ConfigInvalid& e) {
        const std::string msg = e.what();
        CHECK_MESSAGE(msg.find(needle) != std::string::npos,
                      "expected '" << needle << "' in '" << msg << "'");
    }
}

// Corridor with a risky shortcut as an inline model, plus one reset-to-start
// intervention covering the buffer and the sink.
std::string corridor_json() {
    const TabularCMDP m = cisr_test::corridor6();
    std::string p = "[";
    for (int s = 0; s < m.n_states; ++s) {
        p += s ? ",[" : "[";
        for (int a = 0; a < m.n_actions; ++a) {
            p += a ? ",[" : "[";
            for (int t = 0; t < m.n_states; ++t) {
                if (t) p += ",";
                p += format_double(m.p(s, a, t));
            }
            p += "]";
        }
        p += "]";
    }
    p += "]";
    std::string kernel = "[";
    for (int s = 0; s < m.n_states; ++s) {
        kernel += s ? ",[1,0,0,0,0,0]" : "[1,0,0,0,0,0]";
    }
    kernel += "]";
    return std::string("{") +
           "\"environment\":\"custom_cmdp\"," +
           "\"policy_mode\":{\"mode\":\"single_intervention\",\"intervention\":\"buffer\"}," +
           "\"n_students\":2,\"seed\":9,\"unit_eval_steps\":200," +
           "\"teacher\":{\"units_per_student\":3,\"unit_steps\":400,\"max_switches\":1," +
           "\"eval_horizon\":500,\"r_max\":1.0,\"horizon_T\":10,\"kappa\":0.1}," +
           "\"student\":{\"primal_steps_per_epoch\":200}," +
           "\"custom\":{\"n_states\":6,\"n_actions\":2,\"horizon\":10,\"kappa\":0.1," +
           "\"transition\":" + p + ",\"reward\":0.0,\"initial_dist\":0," +
           "\"terminal\":[3,5],\"unsafe\":[5]," +
           "\"interventions\":[{\"name\":\"buffer\",\"trigger\":[4,5]," +
           "\"mode\":\"fixed_kernel\",\"kernel\":" + kernel +
           ",\"tau\":0.1,\"kappa_i\":0.0}]}}";
}

}  // namespace

TEST_CASE("doubles serialize to the shortest exact round trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.5) == "1.5");
    CHECK(format_double(-0.25) == "-0.25");
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(6.0) == "6");
    for (double v : {1.0 / 3.0, 0.1 + 0.2, -1.2345678901234567e-8, 2e300}) {
        const std::string text = format_double(v);
        CHECK(std::strtod(text.c_str(), nullptr) == v);
    }
    CHECK(format_int(-42) == "-42");
    CHECK(format_int(0) == "0");
    CHECK(format_int(1234567890123456789LL) == "1234567890123456789");
}

TEST_CASE("csv cells are quoted only when they need it") {
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("") == "");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_escape("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("csv files carry a schema line and enforce row arity") {
    const fs::path dir = fresh_dir("csv");
    const fs::path path = dir / "t.csv";
    {
        CsvFile f(path, "test.v1", {"a", "b"});
        f.row({"1", "x,y"});
        f.row({"2", ""});
        CHECK_THROWS_AS(f.row({"only-one"}), ConfigInvalid);
        CHECK(f.rows_written() == 2);
        f.close();
        CHECK_THROWS_AS(f.row({"3", "z"}), ConfigInvalid);
        f.close();  // idempotent
    }
    CHECK(cisr_test::read_file(path.string()) == "#schema=test.v1\na,b\n1,\"x,y\"\n2,\n");

    const std::string meta = cisr_test::read_file(path.string() + ".meta.json");
    CHECK(meta.find("\"schema\": \"test.v1\"") != std::string::npos);
    CHECK(meta.find("\"rows\": 2") != std::string::npos);

    CHECK_THROWS_AS(CsvFile(dir / "bad.csv", "x", {}), ConfigInvalid);
}

TEST_CASE("aggregate matches the normal approximation interval") {
    const Aggregate a = aggregate({1.0, 2.0, 3.0});
    CHECK(a.n == 3);
    CHECK(a.mean == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(a.sd == doctest::Approx(1.0).epsilon(1e-12));
    const double half = 1.959963984540054 / std::sqrt(3.0);
    CHECK(std::abs(a.ci95_lo - (2.0 - half)) <= 1e-12);
    CHECK(std::abs(a.ci95_hi - (2.0 + half)) <= 1e-12);

    const Aggregate empty = aggregate({});
    CHECK(empty.n == 0);
    CHECK(empty.mean == 0.0);

    const Aggregate one = aggregate({4.5});
    CHECK(one.n == 1);
    CHECK(one.mean == 4.5);
    CHECK(one.sd == 0.0);
    CHECK(one.ci95_lo == 4.5);
    CHECK(one.ci95_hi == 4.5);
}

TEST_CASE("an empty config yields the frozen lake defaults") {
    const ExperimentConfig cfg = parse_experiment_config("{}", "t");
    CHECK(cfg.environment == EnvironmentKind::frozen_lake);
    CHECK(cfg.mode == PolicyMode::no_intervention);
    CHECK(cfg.n_students == 10);
    CHECK(cfg.base_seed == 1);
    CHECK(cfg.seeds.empty());
    CHECK(cfg.unit_eval_steps == 2000);
    CHECK(cfg.teacher.max_switches == 2);
    CHECK(cfg.teacher.n_rounds == 20);
    CHECK(cfg.solver.bound_B == 0.5);
    CHECK(cfg.opt.init_count == 10);
    CHECK(cfg.opt.students_per_datum == 1);
    CHECK(cfg.opt.priors.lengthscales.size() == 7);
}

TEST_CASE("the lander defaults override the tabular ones") {
    const ExperimentConfig cfg = parse_experiment_config("{\"environment\":\"lander\"}", "t");
    CHECK(cfg.environment == EnvironmentKind::lander);
    CHECK(cfg.solver.bound_B == 120.0);
    CHECK(cfg.teacher.max_switches == 1);
    CHECK(cfg.teacher.units_per_student == 15);
    CHECK(cfg.teacher.r_max == 100.0);
    CHECK(cfg.teacher.kappa == 0.1);
    CHECK(cfg.opt.students_per_datum == 10);
    CHECK(cfg.opt.ret_hi == 200.0);
    CHECK(cfg.unit_eval_steps == 0);
    CHECK(cfg.opt.priors.lengthscales.size() == 4);
}

TEST_CASE("hyperprior defaults follow the per-dimension band structure") {
    const GPHyperpriors p = default_teacher_priors(EnvironmentKind::frozen_lake, 2);
    REQUIRE(p.lengthscales.size() == 7);
    CHECK(std::abs(p.signal_variance.mean() - 1.0) <= 1e-12);
    CHECK(std::abs(p.signal_variance.variance() - 0.2) <= 1e-12);
    for (int k = 0; k < 2; ++k) {
        CHECK(std::abs(p.lengthscales[2 * k].mean() - 1.0) <= 1e-12);
        CHECK(std::abs(p.lengthscales[2 * k].variance() - 1.0) <= 1e-12);
        CHECK(std::abs(p.lengthscales[2 * k + 1].mean() - 0.05) <= 1e-12);
        CHECK(std::abs(p.lengthscales[2 * k + 1].variance() - 0.02) <= 1e-12);
    }
    for (int i = 4; i < 7; ++i) {
        CHECK(std::abs(p.lengthscales[i].mean() - 0.2) <= 1e-12);
        CHECK(std::abs(p.lengthscales[i].variance() - 0.2) <= 1e-12);
    }
    CHECK(std::abs(p.noise_variance.mean() - 0.01) <= 1e-12);

    const GPHyperpriors heavy = default_teacher_priors(EnvironmentKind::lander, 1);
    REQUIRE(heavy.lengthscales.size() == 4);
    CHECK(std::abs(heavy.lengthscales[0].mean() - 20.0) <= 1e-12);
    CHECK(std::abs(heavy.lengthscales[0].variance() - 4.0) <= 1e-12);
    CHECK(std::abs(heavy.lengthscales[1].mean() - 1.0) <= 1e-12);
    CHECK(std::abs(heavy.lengthscales[1].variance() - 0.3) <= 1e-12);
}

TEST_CASE("unknown keys are rejected with their full field path") {
    expect_config_error("{\"bogus\":1}", "bogus: unknown key");
    expect_config_error("{\"teacher\":{\"bogus\":1}}", "teacher.bogus: unknown key");
    expect_config_error("{\"lander\":{\"thrust\":1}}", "lander.thrust: unknown key");
    expect_config_error("{\"optimizer\":{\"ucb\":{\"betah\":1}}}",
                        "optimizer.ucb.betah: unknown key");
    expect_config_error("{\"environment\":\"moon\"}", "unknown environment");
    expect_config_error("not json", "not valid JSON");
    expect_config_error("[1,2]", "top level must be an object");
    expect_config_error("{\"teacher\":{\"unit_steps\":0}}", "teacher.unit_steps");
    expect_config_error("{\"student\":{\"eta\":-1.0}}", "student.eta");
    expect_config_error("{\"frozen_lake\":{\"horizon\":0}}", "frozen_lake.horizon");
    expect_config_error("{\"n_students\":0}", "n_students");
    expect_config_error("{\"custom\":{}}", "only valid with environment = custom_cmdp");
    expect_config_error("{\"environment\":\"custom_cmdp\"}", "custom: required");
    // Prior lists must match the switch count implied by the teacher section.
    expect_config_error(
        "{\"optimizer\":{\"priors\":{\"signal_variance\":[1,0.2],"
        "\"lengthscales\":[[1,1]],\"noise_variance\":[0.01,0.1]}}}",
        "optimizer.priors.lengthscales");
    CHECK_THROWS_AS(load_experiment_config("/nonexistent/cfg.json"), ConfigInvalid);
}

TEST_CASE("policy mode parses both the string and the object form") {
    CHECK(parse_experiment_config("{\"policy_mode\":\"optimized\"}", "t").mode ==
          PolicyMode::optimized);
    const ExperimentConfig single = parse_experiment_config(
        "{\"policy_mode\":{\"mode\":\"single_intervention\",\"intervention\":\"SR1\"}}", "t");
    CHECK(single.mode == PolicyMode::single_intervention);
    CHECK(single.intervention_name == "SR1");
    const ExperimentConfig fixed = parse_experiment_config(
        "{\"policy_mode\":{\"mode\":\"fixed_params\",\"file\":\"p.json\"}}", "t");
    CHECK(fixed.mode == PolicyMode::fixed_params);
    CHECK(fixed.params_file == "p.json");

    expect_config_error("{\"policy_mode\":\"sideways\"}", "unknown mode");
    expect_config_error("{\"policy_mode\":7}", "expected a string or an object");
    expect_config_error("{\"policy_mode\":{\"mode\":\"single_intervention\"}}",
                        "policy_mode.intervention: required");
    expect_config_error("{\"policy_mode\":{\"mode\":\"fixed_params\"}}",
                        "policy_mode.file: required");
}

TEST_CASE("per-student seeds use the explicit list when one is given") {
    ExperimentConfig cfg = parse_experiment_config(
        "{\"n_students\":3,\"seeds\":[7,8,9]}", "t");
    CHECK(student_seed(cfg, 0) == 7);
    CHECK(student_seed(cfg, 1) == 8);
    CHECK(student_seed(cfg, 2) == 9);

    cfg = parse_experiment_config("{\"n_students\":3,\"seeds\":[5]}", "t");
    CHECK(student_seed(cfg, 1) == derive_seed(5, 1));

    cfg = parse_experiment_config("{\"n_students\":3,\"seed\":11}", "t");
    CHECK(student_seed(cfg, 2) == derive_seed(11, 2));

    expect_config_error("{\"n_students\":3,\"seeds\":[1,2]}", "length must be 1 or n_students");
    expect_config_error("{\"seeds\":\"nope\"}", "seeds: expected an array");
}

TEST_CASE("curriculum parameter files round trip exactly") {
    const fs::path dir = fresh_dir("params");
    const fs::path path = dir / "p.json";

    CurriculumPolicyParams params;
    params.intervention_sequence = {0, 2, 1};
    params.switch_thresholds = {{0.12345678901234567, -1.5e-7}, {3.0, 0.25}};
    const double value = 1.2345678901234567;
    save_params_file(path.string(), params, value);

    const auto [loaded, loaded_value] = load_params_file(path.string());
    CHECK(loaded.intervention_sequence == params.intervention_sequence);
    REQUIRE(loaded.switch_thresholds.size() == 2);
    CHECK(loaded.switch_thresholds[0].first == params.switch_thresholds[0].first);
    CHECK(loaded.switch_thresholds[0].second == params.switch_thresholds[0].second);
    CHECK(loaded.switch_thresholds[1] == params.switch_thresholds[1]);
    CHECK(loaded_value == value);

    write_text(dir / "bad.json",
               "{\"max_switches\":2,\"intervention_sequence\":[0,1],"
               "\"switch_thresholds\":[[1,0],[2,0]],\"value\":0}");
    CHECK_THROWS_AS(load_params_file((dir / "bad.json").string()), ConfigInvalid);
    CHECK_THROWS_AS(load_params_file((dir / "missing.json").string()), ConfigInvalid);
}

TEST_CASE("inline tabular models load with their interventions") {
    const ExperimentConfig cfg = parse_experiment_config(corridor_json(), "t");
    REQUIRE(cfg.custom.has_value());
    CHECK(cfg.custom->cmdp.n_states == 6);
    CHECK(cfg.custom->cmdp.horizon == 10);
    CHECK(cfg.custom->cmdp.kappa == 0.1);
    REQUIRE(cfg.custom->interventions.size() == 1);
    CHECK(cfg.custom->interventions[0].name == "buffer");
    CHECK(cfg.custom->interventions[0].tau == 0.1);

    const EnvBundle bundle = build_env_bundle(cfg);
    CHECK(bundle.envs.n_interventions == 1);
    CHECK(bundle.intervention_names == std::vector<std::string>{"buffer"});
    CHECK(intervention_index(bundle, "buffer") == 0);
    CHECK_THROWS_AS(intervention_index(bundle, "nope"), ConfigInvalid);

    const EnvBundle flake = build_env_bundle(parse_experiment_config("{}", "t"));
    CHECK(flake.intervention_names == std::vector<std::string>{"SR1", "SR2", "HR"});
    CHECK(intervention_index(flake, "SR2") == 1);
}

TEST_CASE("rerunning an experiment reproduces every csv byte") {
    const fs::path dir = fresh_dir("rerun");
    ExperimentConfig cfg = parse_experiment_config(corridor_json(), "t");

    cfg.output_dir = (dir / "a").string();
    const ExperimentResult first = run_experiment(cfg);
    cfg.output_dir = (dir / "b").string();
    const ExperimentResult second = run_experiment(cfg);

    REQUIRE(first.files.size() == 3);
    CHECK(first.students.size() == 2);
    CHECK(first.students[0].units.size() == 3);
    CHECK(first.students[0].units[0].probed);
    for (const char* name : {"students.csv", "final.csv", "aggregate.csv"}) {
        const std::string a = cisr_test::read_file((dir / "a" / name).string());
        const std::string b = cisr_test::read_file((dir / "b" / name).string());
        REQUIRE(!a.empty());
        CHECK(a == b);
    }
    CHECK(cisr_test::read_file((dir / "a" / "students.csv").string())
              .rfind("#schema=cisr.units.v1\n", 0) == 0);
    CHECK(cisr_test::read_file((dir / "a" / "final.csv").string())
              .rfind("#schema=cisr.final.v1\n", 0) == 0);
}

TEST_CASE("the command line writes the same csv bodies as the library") {
    const char* cli = std::getenv("CISR_CLI");
    if (cli == nullptr) {
        MESSAGE("CISR_CLI not set, skipping (ctest sets it)");
        return;
    }

    const fs::path dir = fresh_dir("cli");
    const fs::path cfg_path = dir / "cfg.json";
    write_text(cfg_path, corridor_json());

    const auto run = [&](const std::string& out) {
        const std::string cmd = std::string(cli) + " run-experiment --config " +
                                cfg_path.string() + " --out " + out + " >/dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    REQUIRE(run((dir / "x").string()) == 0);
    REQUIRE(run((dir / "y").string()) == 0);

    ExperimentConfig cfg = parse_experiment_config(corridor_json(), "t");
    cfg.output_dir = (dir / "lib").string();
    run_experiment(cfg);

    for (const char* name : {"students.csv", "final.csv", "aggregate.csv"}) {
        const std::string x = cisr_test::read_file((dir / "x" / name).string());
        REQUIRE(!x.empty());
        CHECK(x == cisr_test::read_file((dir / "y" / name).string()));
        CHECK(x == cisr_test::read_file((dir / "lib" / name).string()));
    }

    const std::string verify_cmd =
        std::string(cli) + " verify-props --stochastic 50 --seed 3 >/dev/null 2>&1";
    CHECK(std::system(verify_cmd.c_str()) == 0);
}
