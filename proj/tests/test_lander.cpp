#include <cmath>
#include <vector>

#include "doctest.h"

#include "cisr/errors.hpp"
#include "cisr/lander.hpp"
#include "cisr/rng.hpp"

using namespace cisr;

namespace {

LanderState at(double x, double y, double x_dot = 0.0, double y_dot = 0.0, double alpha = 0.0) {
    LanderState s;
    s.x = x;
    s.y = y;
    s.x_dot = x_dot;
    s.y_dot = y_dot;
    s.alpha = alpha;
    return s;
}

struct RescueCase {
    double x0, y0, a, a_prime, x1, y1;
};

// Frozen against the two wedge lines and the over-pad drop; the last pad row
// lands below ground on purpose (the environment, not the pure placement,
// keeps a clearance above the surface).
const RescueCase kRescues[] = {
    {0.5, 0.4, 20.0, 100.0, 0.20693069306930692, 0.6930693069306909},
    {0.25, 0.05, 20.0, 100.0, 0.200990099009901, 0.0990099009900991},
    {0.9, 2.0, 20.0, 100.0, 0.2267326732673267, 2.6732673267326703},
    {0.35, 0.001, 20.0, 100.0, 0.20149504950495048, 0.14950495049504686},
    {0.7, 1.3, 20.0, 100.0, 0.21782178217821782, 1.782178217821781},
    {-0.5, 0.4, 20.0, 100.0, -0.20693069306930692, 0.6930693069306909},
    {-0.33, 0.8, 20.0, 100.0, -0.2092079207920792, 0.9207920792079188},
    {0.5, 0.1, 0.5, 1.0, 0.4, 0.2},
    {0.3, 0.04, 0.5, 1.0, 0.27, 0.07},
    {0.95, 0.3, 0.5, 1.0, 0.725, 0.5249999999999999},
    {0.6, 0.0, 0.5, 1.0, 0.4, 0.2},
    {0.85, 0.12, 0.5, 1.0, 0.585, 0.38499999999999995},
    {-0.5, 0.1, 0.5, 1.0, -0.4, 0.2},
    {-0.77, 0.25, 0.5, 1.0, -0.61, 0.41},
    {0.15, 1.2, 20.0, 100.0, 0.15, 1.0999999999999999},
    {0.0, 0.5, 20.0, 100.0, 0.0, 0.4},
    {-0.2, 0.3, 20.0, 100.0, -0.2, 0.19999999999999998},
    {0.2, 0.11, 20.0, 100.0, 0.2, 0.009999999999999995},
    {-0.12, 0.08, 20.0, 100.0, -0.12, -0.020000000000000004},
    {0.07, 2.4, 20.0, 100.0, 0.07, 2.3},
};

}  // namespace

TEST_CASE("funnel constants are the committed values") {
    const FunnelIntervention narrow = narrow_funnel();
    CHECK(narrow.name == "Narrow");
    CHECK(narrow.steepness_a == 20.0);
    CHECK(narrow.reset_steepness_a_prime == 100.0);
    CHECK(narrow.tau == 0.1);

    const FunnelIntervention wide = wide_funnel();
    CHECK(wide.name == "Wide");
    CHECK(wide.steepness_a == 0.5);
    CHECK(wide.reset_steepness_a_prime == 1.0);
    CHECK(wide.tau == 0.1);

    const LanderInterventions lib = build_lander_interventions();
    CHECK(lib.library().size() == 2);
    CHECK(LanderInterventions::names() == std::vector<std::string>{"Narrow", "Wide"});
}

TEST_CASE("trigger region: pad thresholds, wedge lines, inclusive boundaries") {
    // over the pad the signed form ignores a descending craft
    CHECK_FALSE(lander_trigger(at(0.0, 1.2), 20.0, -0.2, 0.2, false));
    CHECK(lander_trigger(at(0.0, 1.2, 0.0, 12.31), 20.0, -0.2, 0.2, false));
    CHECK(lander_trigger(at(0.0, 1.2, 0.0, 12.3), 20.0, -0.2, 0.2, false) ==
          true);  // inclusive >=
    CHECK_FALSE(lander_trigger(at(0.0, 1.2, 0.0, -5.0), 20.0, -0.2, 0.2, false));
    CHECK(lander_trigger(at(0.0, 1.2, 0.0, -12.31), 20.0, -0.2, 0.2, true));

    // tilt path with its own threshold
    CHECK(lander_trigger(at(0.0, 0.0, 0.0, 0.0, 0.5), 20.0, -0.2, 0.2, false));
    CHECK_FALSE(lander_trigger(at(0.0, 0.0, 0.0, 0.0, 0.49), 20.0, -0.2, 0.2, false));
    CHECK_FALSE(lander_trigger(at(0.0, 0.0, 0.0, 0.0, -0.6), 20.0, -0.2, 0.2, false));
    CHECK(lander_trigger(at(0.0, 0.0, 0.0, 0.0, -0.6), 20.0, -0.2, 0.2, true));

    // off the pad only height against the wedge line matters
    CHECK(lander_trigger(at(0.5, 6.0), 20.0, -0.2, 0.2, false));
    CHECK_FALSE(lander_trigger(at(0.5, 6.0001), 20.0, -0.2, 0.2, false));
    CHECK(lander_trigger(at(-0.5, 5.99), 20.0, -0.2, 0.2, false));
    CHECK(lander_trigger(at(0.5, 0.15), 0.5, -0.2, 0.2, false));
    CHECK_FALSE(lander_trigger(at(0.5, 0.1501), 0.5, -0.2, 0.2, false));

    // the wide funnel is nested in the narrow one
    Rng rng(23);
    for (int i = 0; i < 500; ++i) {
        const double x = 2.0 * rng.next_double() - 1.0;
        const double y = 2.5 * rng.next_double();
        const LanderState s = at(x, y, rng.next_double(), rng.next_double());
        if (lander_trigger(s, 0.5, -0.2, 0.2, false))
            CHECK(lander_trigger(s, 20.0, -0.2, 0.2, false));
    }
}

TEST_CASE("rescue placement matches the frozen geometry to 1e-9") {
    for (const RescueCase& c : kRescues) {
        CAPTURE(c.x0);
        CAPTURE(c.y0);
        const LanderState in = at(c.x0, c.y0, 0.7, -1.1, 0.3);
        const LanderState out = reset_rescue(in, c.a, c.a_prime, -0.2, 0.2);
        CHECK(std::abs(out.x - c.x1) <= 1e-9);
        CHECK(std::abs(out.y - c.y1) <= 1e-9);
        CHECK(out.x_dot == 0.0);
        CHECK(out.y_dot == 0.0);
        CHECK(out.alpha == 0.0);
        CHECK(out.alpha_dot == 0.0);
        CHECK_FALSE(out.leg_contact_left);
        CHECK_FALSE(out.leg_contact_right);

        // a rescued craft sits strictly outside its own trigger region
        CHECK_FALSE(lander_trigger(out, c.a, -0.2, 0.2, false));
        CHECK_FALSE(lander_trigger(out, c.a, -0.2, 0.2, true));
    }

    CHECK_THROWS_AS(reset_rescue(at(0.5, 0.1), 1.0, 0.5, -0.2, 0.2), ConfigInvalid);
    CHECK_THROWS_AS(reset_rescue(at(0.5, 0.1), 0.0, 1.0, -0.2, 0.2), ConfigInvalid);
}

TEST_CASE("terrain: fixed stations, flat pad, bounded heights, seeded draws") {
    const LanderConfig cfg;
    const Terrain t = Terrain::generate(cfg, 99);
    const std::vector<double> stations = {-1.0, -0.77, -0.54, -0.2, 0.2, 0.54, 0.77, 1.0};
    REQUIRE(t.knots_x.size() == 8);
    for (std::size_t i = 0; i < 8; ++i)
        CHECK(std::abs(t.knots_x[i] - stations[i]) <= 1e-12);

    CHECK(t.knots_y[3] == 0.0);
    CHECK(t.knots_y[4] == 0.0);
    for (std::size_t i : {0u, 1u, 6u, 7u}) {
        CHECK(t.knots_y[i] >= cfg.terrain_height_min);
        CHECK(t.knots_y[i] <= cfg.terrain_height_far);
    }
    for (std::size_t i : {2u, 5u}) {
        CHECK(t.knots_y[i] >= cfg.terrain_height_min);
        CHECK(t.knots_y[i] <= cfg.terrain_height_near);
    }

    // exactly zero across the pad, knot-exact elsewhere, clamped at the rim
    CHECK(t.height(0.0) == 0.0);
    CHECK(t.height(-0.2) == 0.0);
    CHECK(t.height(0.19999) == 0.0);
    CHECK(std::abs(t.height(0.54) - t.knots_y[5]) <= 1e-12);
    CHECK(t.height(3.0) == t.knots_y[7]);
    CHECK(t.height(-3.0) == t.knots_y[0]);

    const Terrain same = Terrain::generate(cfg, 99);
    CHECK(same.knots_y == t.knots_y);
    const Terrain other = Terrain::generate(cfg, 100);
    CHECK(other.knots_y != t.knots_y);
}

TEST_CASE("physics step: symplectic update, costs, shaping, terminal outcomes") {
    const LanderConfig cfg;
    const Terrain flat = Terrain::generate(cfg, 1);

    const LanderState s0 = at(0.0, 1.2);
    const LanderStepResult nop = step_lander(s0, LanderAction::nop, cfg, flat);
    CHECK(std::abs(nop.state.y_dot - (-0.02)) <= 1e-15);
    CHECK(std::abs(nop.state.y - (1.2 - 0.02 * 0.02)) <= 1e-15);
    CHECK(nop.state.x == 0.0);
    CHECK_FALSE(nop.done);
    CHECK(nop.reward == nop.move_reward);

    const LanderStepResult burn = step_lander(s0, LanderAction::main_engine, cfg, flat);
    CHECK(std::abs(burn.state.y_dot - 0.02) <= 1e-15);
    const double shaping =
        lander_potential(burn.state, cfg) - lander_potential(s0, cfg);
    CHECK(std::abs(burn.move_reward - (-0.3 + shaping)) <= 1e-12);

    const LanderStepResult side = step_lander(s0, LanderAction::left_engine, cfg, flat);
    CHECK(std::abs(side.state.alpha_dot - 1.5 * 0.02) <= 1e-15);
    CHECK(std::abs(side.state.x_dot - 0.4 * 0.02) <= 1e-15);

    // identical inputs give identical outputs
    const LanderStepResult again = step_lander(s0, LanderAction::nop, cfg, flat);
    CHECK(again.state.y == nop.state.y);
    CHECK(again.reward == nop.reward);

    // soft touchdown on the pad
    const LanderState low = at(0.0, 0.0001, 0.0, -0.01);
    const LanderStepResult land = step_lander(low, LanderAction::nop, cfg, flat);
    CHECK(land.done);
    CHECK(land.outcome == LanderOutcome::landed);
    CHECK(std::abs(land.reward - (land.move_reward + 100.0)) <= 1e-12);

    // the same touchdown too fast is a crash
    const LanderState fast = at(0.0, 0.001, 0.0, -1.0);
    const LanderStepResult crash = step_lander(fast, LanderAction::nop, cfg, flat);
    CHECK(crash.done);
    CHECK(crash.outcome == LanderOutcome::crashed);
    CHECK(std::abs(crash.reward - (crash.move_reward - 100.0)) <= 1e-12);

    // drifting over the rim leaves the map
    const LanderState rim = at(0.999, 2.0, 2.0, 0.0);
    const LanderStepResult out = step_lander(rim, LanderAction::nop, cfg, flat);
    CHECK(out.done);
    CHECK(out.outcome == LanderOutcome::out_of_map);

    // running into the step limit times out
    const LanderStepResult late =
        step_lander(s0, LanderAction::nop, cfg, flat, 499, 500);
    CHECK(late.done);
    CHECK(late.outcome == LanderOutcome::timeout);
    CHECK(std::abs(late.reward - (late.move_reward - 100.0)) <= 1e-12);
}

TEST_CASE("move rewards telescope to the potential difference") {
    const LanderConfig cfg;
    const Terrain t = Terrain::generate(cfg, 7);
    LanderState s = at(0.1, 1.0, -0.05, 0.0, 0.08);
    const double phi0 = lander_potential(s, cfg);
    double sum = 0.0;
    const LanderAction acts[] = {LanderAction::main_engine, LanderAction::left_engine,
                                 LanderAction::nop, LanderAction::right_engine,
                                 LanderAction::main_engine};
    double costs = 0.0;
    for (LanderAction a : acts) {
        const LanderStepResult r = step_lander(s, a, cfg, t);
        REQUIRE_FALSE(r.done);
        sum += r.move_reward;
        costs += (a == LanderAction::main_engine ? 0.3
                  : a == LanderAction::nop       ? 0.0
                                                 : 0.03);
        s = r.state;
    }
    CHECK(std::abs((sum + costs) - (lander_potential(s, cfg) - phi0)) <= 1e-9);
}

TEST_CASE("discretizer: size, bounds, clamping") {
    const LanderConfig cfg;
    const LanderDiscretizer disc(cfg);
    CHECK(disc.n_states() == 12 * 10 * 8 * 7);

    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        const LanderState s = at(6.0 * rng.next_double() - 3.0, 6.0 * rng.next_double() - 1.0,
                                 0.0, 8.0 * rng.next_double() - 4.0,
                                 4.0 * rng.next_double() - 2.0);
        const int idx = disc.index(s);
        CHECK(idx >= 0);
        CHECK(idx < disc.n_states());
    }
    CHECK(disc.index(at(0.0, 0.01)) != disc.index(at(0.0, 2.49)));
    CHECK(disc.index(at(-99.0, 0.5)) == disc.index(at(-1.0, 0.5)));

    LanderConfig bad;
    bad.tiles_y = 0;
    CHECK_THROWS_AS(LanderDiscretizer{bad}, ConfigInvalid);
}

TEST_CASE("training environment is bitwise deterministic per seed") {
    const LanderConfig cfg;
    const FunnelIntervention narrow = narrow_funnel();

    auto trace = [&](std::uint64_t seed) {
        LanderTrainEnv env(cfg, narrow, false);
        Rng rng(seed);
        std::vector<double> rewards;
        std::vector<int> states;
        const EnvReset r0 = env.reset(rng);
        states.push_back(r0.state);
        for (int t = 0; t < 200; ++t) {
            const EnvStep st = env.step(t % 4, rng);
            rewards.push_back(st.reward);
            states.push_back(st.next_state);
            if (st.done) break;
        }
        return std::make_pair(rewards, states);
    };

    const auto a = trace(12);
    const auto b = trace(12);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("environment constraints and horizons") {
    const LanderConfig cfg;
    LanderTrainEnv plain(cfg, false);
    REQUIRE(plain.constraints().size() == 1);
    CHECK(plain.constraints()[0].name == "unsafe");
    CHECK(plain.constraints()[0].tolerance == cfg.kappa);
    CHECK(plain.episode_horizon() == cfg.timeout_train);

    LanderTrainEnv deploy(cfg, true);
    CHECK(deploy.episode_horizon() == cfg.timeout_deploy);

    LanderTrainEnv supervised(cfg, narrow_funnel(), false);
    REQUIRE(supervised.constraints().size() == 2);
    CHECK(supervised.constraints()[0].name == "unsafe");
    CHECK(supervised.constraints()[0].tolerance == 0.0);
    CHECK(supervised.constraints()[1].name == "trigger:Narrow");
    CHECK(supervised.constraints()[1].tolerance == 0.1);

    FunnelIntervention upside_down{"bad", 1.0, 0.5, 0.1};
    CHECK_THROWS_AS(LanderTrainEnv(cfg, upside_down, false), ConfigInvalid);
}

TEST_CASE("signed thresholds let an idle craft fall through to a crash") {
    // the printed trigger compares signed climb rate, so a descending craft
    // over the pad never fires it and the supervisor never steps in
    LanderConfig cfg;
    cfg.start_x_jitter = 0.0;
    cfg.start_xdot_jitter = 0.0;
    cfg.start_alpha_jitter = 0.0;

    LanderTrainEnv env(cfg, narrow_funnel(), false);
    Rng rng(3);
    env.reset(rng);
    std::int64_t unsafe_hits = 0, trigger_hits = 0;
    for (int t = 0; t < 600; ++t) {
        const EnvStep st = env.step(0, rng);
        unsafe_hits += st.constraint_hits[0];
        trigger_hits += st.constraint_hits[1];
        if (st.done) break;
    }
    CHECK(env.last_outcome() == LanderOutcome::crashed);
    CHECK(unsafe_hits == 1);
    CHECK(trigger_hits == 0);
}

TEST_CASE("magnitude thresholds keep an idle craft in a rescue loop forever") {
    LanderConfig cfg;
    cfg.trigger_magnitude_form = true;

    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        LanderTrainEnv env(cfg, narrow_funnel(), false);
        Rng rng(seed);
        env.reset(rng);
        std::int64_t unsafe_hits = 0, trigger_hits = 0;
        int steps = 0;
        for (int t = 0; t < cfg.timeout_train + 10; ++t) {
            const EnvStep st = env.step(0, rng);
            ++steps;
            unsafe_hits += st.constraint_hits[0];
            trigger_hits += st.constraint_hits[1];
            if (st.done) break;
        }
        CHECK(env.last_outcome() == LanderOutcome::timeout);
        CHECK(steps == cfg.timeout_train);
        CHECK(unsafe_hits == 0);
        CHECK(trigger_hits >= 2);
    }
}
