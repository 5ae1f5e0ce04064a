#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cisr/intervention.hpp"
#include "cisr/rng.hpp"
#include "cisr/sim.hpp"

namespace cisr {

// Planar point-mass landing craft. The map spans x in [-1, 1] with a flat
// landing pad at y = 0 on [pad_lo, pad_hi]; the surface elsewhere is a
// per-episode random piecewise-linear profile the agent cannot sense.
struct LanderState {
    double x = 0.0;
    double y = 0.0;
    double x_dot = 0.0;
    double y_dot = 0.0;
    double alpha = 0.0;      // tilt angle, radians, 0 = upright
    double alpha_dot = 0.0;
    bool leg_contact_left = false;
    bool leg_contact_right = false;
};

// Wedge-shaped supervision region around the pad. Off the pad the trigger
// fires below the line of slope `steepness_a` from the pad edge; rescues
// project onto the steeper `reset_steepness_a_prime` line. tau is the
// supervisor's budget of expected trigger entries per episode.
struct FunnelIntervention {
    std::string name;
    double steepness_a = 0.0;
    double reset_steepness_a_prime = 0.0;
    double tau = 0.1;
};

FunnelIntervention narrow_funnel();  // a = 20,  a' = 100
FunnelIntervention wide_funnel();    // a = 0.5, a' = 1

struct LanderInterventions {
    FunnelIntervention narrow;
    FunnelIntervention wide;
    std::vector<FunnelIntervention> library() const { return {narrow, wide}; }
    static std::vector<std::string> names() { return {"Narrow", "Wide"}; }
};

LanderInterventions build_lander_interventions();

enum class LanderAction { nop = 0, main_engine = 1, left_engine = 2, right_engine = 3 };

enum class LanderOutcome { none, landed, crashed, out_of_map, timeout };

const char* to_string(LanderOutcome o);

struct LanderConfig {
    double pad_lo = -0.2;
    double pad_hi = 0.2;
    double map_x_max = 1.0;  // |x| beyond this is out of map
    double map_y_max = 2.5;  // ceiling; above this is out of map

    // Point-mass dynamics constants (artifact-defined, not tuned to any
    // external simulator). Main engine thrusts along the body axis, side
    // engines push laterally and torque the craft.
    double gravity = 1.0;
    double main_thrust = 2.0;
    double side_thrust = 0.4;
    double side_torque = 1.5;
    double angular_damping = 1.0;
    double dt = 0.02;

    double reward_land = 100.0;
    double cost_main = 0.3;
    double cost_side = 0.03;
    double crash_reward = -100.0;
    double timeout_reward = -100.0;
    int timeout_train = 500;
    int timeout_deploy = 2000;

    double land_speed_max = 0.3;   // max |y_dot| for a soft touchdown
    double land_angle_max = 0.25;  // max |alpha| for a soft touchdown
    double leg_half_span = 0.05;   // both legs must rest on the pad
    double shaping_coef = 10.0;    // weight of the potential-based shaping

    // The trigger thresholds over the pad compare signed y_dot and alpha as
    // printed; set this to compare magnitudes instead (a descending craft
    // has y_dot < 0 and never crosses the signed climb-rate threshold).
    bool trigger_magnitude_form = false;

    double kappa = 0.1;  // unsafe-visit budget of the unsupervised task

    // Per-episode surface: knots at the pad edges (height 0) and at fixed
    // stations toward the map borders with uniform random heights, capped
    // lower near the pad so rescues onto the a' line stay above ground.
    double terrain_height_near = 0.18;
    double terrain_height_far = 0.25;
    double terrain_height_min = 0.03;

    // The training environment never places a rescued craft closer to the
    // surface than this (the verbatim over-pad drop can end underground).
    double min_rescue_clearance = 0.05;

    // Episode start: at rest high over the pad with small perturbations.
    double start_y = 1.2;
    double start_x_jitter = 0.2;
    double start_xdot_jitter = 0.1;
    double start_alpha_jitter = 0.1;

    // Tile discretization over (x, y, y_dot, alpha) for the tabular learner;
    // x_dot and alpha_dot are not observed.
    int tiles_x = 12;
    int tiles_y = 10;
    int tiles_ydot = 8;
    int tiles_alpha = 7;
    double ydot_clip = 1.5;
    double alpha_clip = 0.9;
};

// Trigger region of a funnel with slope a. Over the pad: climb-rate or tilt
// indicator (signed by default, magnitudes when magnitude_form). Off the
// pad: at or below the wedge line from the pad edge.
bool lander_trigger(const LanderState& s, double a, double pad_lo, double pad_hi,
                    bool magnitude_form);
bool lander_trigger(const LanderState& s, double a, const LanderConfig& cfg);

// Rescue placement. All velocities and the tilt are zeroed. Over the pad the
// craft is dropped by 0.1 in place; off the pad it is moved to the
// intersection of the 135-degree line through (x, y) with the a' wedge line
// (mirrored on the left side). Precondition: the state triggers at slope a.
LanderState reset_rescue(const LanderState& s, double a, double a_prime, double pad_lo,
                         double pad_hi);
LanderState reset_rescue(const LanderState& s, const FunnelIntervention& iv,
                         const LanderConfig& cfg);

// Per-episode ground profile. Piecewise linear through fixed x stations;
// exactly 0 across the pad.
struct Terrain {
    std::vector<double> knots_x;
    std::vector<double> knots_y;

    double height(double x) const;

    static Terrain generate(const LanderConfig& cfg, std::uint64_t seed);
};

struct LanderStepResult {
    LanderState state;
    double reward = 0.0;       // move_reward plus any terminal bonus/penalty
    double move_reward = 0.0;  // engine cost plus shaping only
    bool done = false;
    LanderOutcome outcome = LanderOutcome::none;
};

// Potential for reward shaping: rises as the craft approaches the origin,
// slows down, and rights itself. Shaping per step is phi(s') - phi(s), so
// episode shaping telescopes to phi(end) - phi(start).
double lander_potential(const LanderState& s, const LanderConfig& cfg);

// One deterministic physics step (symplectic Euler: velocities update first,
// then positions with the new velocities). `steps_before` is the number of
// steps already taken this episode; when `timeout` > 0 and this step reaches
// it without another outcome, the episode times out.
LanderStepResult step_lander(const LanderState& s, LanderAction action, const LanderConfig& cfg,
                             const Terrain& terrain, int steps_before = 0, int timeout = 0);
// Convenience: regenerates the terrain from a seed each call.
LanderStepResult step_lander(const LanderState& s, LanderAction action, const LanderConfig& cfg,
                             std::uint64_t terrain_seed, int steps_before = 0, int timeout = 0);

// Tile-codes (x, y, y_dot, alpha) into one index for the tabular learner.
class LanderDiscretizer {
  public:
    explicit LanderDiscretizer(const LanderConfig& cfg);
    int n_states() const { return n_states_; }
    int index(const LanderState& s) const;

  private:
    LanderConfig cfg_;
    int n_states_ = 0;
};

// Episodic environment over the continuous lander, with an optional funnel
// supervisor following the tabular displacement protocol: the step after
// entering the trigger region is the supervised rescue (zero reward, the
// agent's action is immaterial). Constraint 0 is the unsafe event (crash or
// leaving the map); with a supervisor, constraint 1 is the trigger entry.
class LanderTrainEnv final : public TrainEnv {
  public:
    explicit LanderTrainEnv(const LanderConfig& cfg, bool deploy = false);
    LanderTrainEnv(const LanderConfig& cfg, const FunnelIntervention& iv, bool deploy = false);

    int n_states() const override { return disc_.n_states(); }
    int n_actions() const override { return 4; }
    int episode_horizon() const override;
    const std::vector<ConstraintSpec>& constraints() const override { return constraints_; }
    EnvReset reset(Rng& rng) override;
    EnvStep step(int action, Rng& rng) override;

    const LanderState& raw_state() const { return s_; }
    const Terrain& terrain() const { return terrain_; }
    LanderOutcome last_outcome() const { return last_outcome_; }

  private:
    std::vector<std::uint8_t> hits_now(bool unsafe, bool trigger_entry) const;

    LanderConfig cfg_;
    FunnelIntervention iv_;
    bool has_iv_ = false;
    bool deploy_ = false;
    std::vector<ConstraintSpec> constraints_;
    LanderDiscretizer disc_;
    Terrain terrain_;
    LanderState s_;
    int steps_ = 0;
    bool pending_rescue_ = false;
    bool episode_over_ = true;
    LanderOutcome last_outcome_ = LanderOutcome::none;
};

}  // namespace cisr
