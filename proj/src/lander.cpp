#include "cisr/lander.hpp"

#include <algorithm>
#include <cmath>

#include "cisr/errors.hpp"

namespace cisr {

FunnelIntervention narrow_funnel() { return {"Narrow", 20.0, 100.0, 0.1}; }

FunnelIntervention wide_funnel() { return {"Wide", 0.5, 1.0, 0.1}; }

LanderInterventions build_lander_interventions() { return {narrow_funnel(), wide_funnel()}; }

const char* to_string(LanderOutcome o) {
    switch (o) {
        case LanderOutcome::none: return "none";
        case LanderOutcome::landed: return "landed";
        case LanderOutcome::crashed: return "crashed";
        case LanderOutcome::out_of_map: return "out_of_map";
        case LanderOutcome::timeout: return "timeout";
    }
    return "?";
}

bool lander_trigger(const LanderState& s, double a, double pad_lo, double pad_hi,
                    bool magnitude_form) {
    if (s.x >= pad_lo && s.x <= pad_hi) {
        const double climb = magnitude_form ? std::abs(s.y_dot) : s.y_dot;
        const double tilt = magnitude_form ? std::abs(s.alpha) : s.alpha;
        return climb >= 0.3 + 10.0 * s.y || tilt >= 0.5 + 10.0 * s.y;
    }
    if (s.x < pad_lo) return s.y <= a * (pad_lo - s.x);
    return s.y <= a * (s.x - pad_hi);
}

bool lander_trigger(const LanderState& s, double a, const LanderConfig& cfg) {
    return lander_trigger(s, a, cfg.pad_lo, cfg.pad_hi, cfg.trigger_magnitude_form);
}

LanderState reset_rescue(const LanderState& s, double a, double a_prime, double pad_lo,
                         double pad_hi) {
    if (!(a_prime > a) || !(a > 0.0))
        throw ConfigInvalid("reset_rescue: need steepness a' > a > 0");
    // The 135-degree line has slope -1; it meets the a' wedge line iff
    // a' != -1, which a' > 0 guarantees.
    if (std::abs(1.0 + a_prime) < 1e-12)
        throw GeometryDegenerate("reset_rescue: rescue line parallel to wedge");
    LanderState out;
    if (s.x >= pad_lo && s.x <= pad_hi) {
        out.x = s.x;
        out.y = s.y - 0.1;
    } else if (s.x > pad_hi) {
        // Line through (x0, y0) at 135 degrees: y = y0 - (x - x0); wedge:
        // y = a'(x - pad_hi).
        out.x = (s.x + s.y + a_prime * pad_hi) / (1.0 + a_prime);
        out.y = a_prime * (out.x - pad_hi);
    } else {
        // Mirrored: y = y0 + (x - x0) against y = a'(pad_lo - x).
        out.x = (s.x - s.y + a_prime * pad_lo) / (1.0 + a_prime);
        out.y = a_prime * (pad_lo - out.x);
    }
    return out;
}

LanderState reset_rescue(const LanderState& s, const FunnelIntervention& iv,
                         const LanderConfig& cfg) {
    return reset_rescue(s, iv.steepness_a, iv.reset_steepness_a_prime, cfg.pad_lo, cfg.pad_hi);
}

double Terrain::height(double x) const {
    if (knots_x.empty()) return 0.0;
    if (x <= knots_x.front()) return knots_y.front();
    if (x >= knots_x.back()) return knots_y.back();
    for (std::size_t i = 1; i < knots_x.size(); ++i) {
        if (x <= knots_x[i]) {
            const double t = (x - knots_x[i - 1]) / (knots_x[i] - knots_x[i - 1]);
            return knots_y[i - 1] + t * (knots_y[i] - knots_y[i - 1]);
        }
    }
    return knots_y.back();
}

Terrain Terrain::generate(const LanderConfig& cfg, std::uint64_t seed) {
    Rng rng(seed ^ 0x7e2f9ac03b5d1168ULL);
    const auto draw = [&rng](double lo, double hi) { return lo + (hi - lo) * rng.next_double(); };
    const double near_mid = 0.5 * (cfg.pad_hi + cfg.map_x_max) * 0.9;  // station between pad and rim
    const double rim_mid = 0.5 * (near_mid + cfg.map_x_max);
    Terrain t;
    t.knots_x = {-cfg.map_x_max, -rim_mid, -near_mid, cfg.pad_lo,
                 cfg.pad_hi,     near_mid, rim_mid,   cfg.map_x_max};
    const double lo = cfg.terrain_height_min;
    t.knots_y = {draw(lo, cfg.terrain_height_far),  draw(lo, cfg.terrain_height_far),
                 draw(lo, cfg.terrain_height_near), 0.0,
                 0.0,                               draw(lo, cfg.terrain_height_near),
                 draw(lo, cfg.terrain_height_far),  draw(lo, cfg.terrain_height_far)};
    return t;
}

double lander_potential(const LanderState& s, const LanderConfig& cfg) {
    const double dist = std::hypot(s.x, s.y);
    const double speed = std::hypot(s.x_dot, s.y_dot);
    return -cfg.shaping_coef * (dist + 0.5 * speed + 0.5 * std::abs(s.alpha));
}

LanderStepResult step_lander(const LanderState& s, LanderAction action, const LanderConfig& cfg,
                             const Terrain& terrain, int steps_before, int timeout) {
    double ax = 0.0;
    double ay = -cfg.gravity;
    double aang = -cfg.angular_damping * s.alpha_dot;
    double cost = 0.0;
    switch (action) {
        case LanderAction::nop: break;
        case LanderAction::main_engine:
            ax += cfg.main_thrust * -std::sin(s.alpha);
            ay += cfg.main_thrust * std::cos(s.alpha);
            cost = cfg.cost_main;
            break;
        case LanderAction::left_engine:
            ax += cfg.side_thrust * std::cos(s.alpha);
            aang += cfg.side_torque;
            cost = cfg.cost_side;
            break;
        case LanderAction::right_engine:
            ax -= cfg.side_thrust * std::cos(s.alpha);
            aang -= cfg.side_torque;
            cost = cfg.cost_side;
            break;
    }

    LanderState n = s;
    n.x_dot = s.x_dot + ax * cfg.dt;
    n.y_dot = s.y_dot + ay * cfg.dt;
    n.alpha_dot = s.alpha_dot + aang * cfg.dt;
    n.x = s.x + n.x_dot * cfg.dt;
    n.y = s.y + n.y_dot * cfg.dt;
    n.alpha = s.alpha + n.alpha_dot * cfg.dt;
    n.leg_contact_left = n.leg_contact_right = false;

    LanderStepResult out;
    out.state = n;
    out.move_reward = -cost + (lander_potential(n, cfg) - lander_potential(s, cfg));
    out.reward = out.move_reward;

    if (n.y <= terrain.height(n.x)) {
        const bool legs_on_pad =
            n.x - cfg.leg_half_span >= cfg.pad_lo && n.x + cfg.leg_half_span <= cfg.pad_hi;
        const bool soft =
            std::abs(n.y_dot) <= cfg.land_speed_max && std::abs(n.alpha) <= cfg.land_angle_max;
        out.state.leg_contact_left = out.state.leg_contact_right = true;
        if (legs_on_pad && soft) {
            out.outcome = LanderOutcome::landed;
            out.reward += cfg.reward_land;
        } else {
            out.outcome = LanderOutcome::crashed;
            out.reward += cfg.crash_reward;
        }
        out.done = true;
    } else if (std::abs(n.x) > cfg.map_x_max || n.y > cfg.map_y_max) {
        out.outcome = LanderOutcome::out_of_map;
        out.reward += cfg.crash_reward;
        out.done = true;
    } else if (timeout > 0 && steps_before + 1 >= timeout) {
        out.outcome = LanderOutcome::timeout;
        out.reward += cfg.timeout_reward;
        out.done = true;
    }
    return out;
}

LanderStepResult step_lander(const LanderState& s, LanderAction action, const LanderConfig& cfg,
                             std::uint64_t terrain_seed, int steps_before, int timeout) {
    return step_lander(s, action, cfg, Terrain::generate(cfg, terrain_seed), steps_before, timeout);
}

LanderDiscretizer::LanderDiscretizer(const LanderConfig& cfg) : cfg_(cfg) {
    if (cfg.tiles_x < 1 || cfg.tiles_y < 1 || cfg.tiles_ydot < 1 || cfg.tiles_alpha < 1)
        throw ConfigInvalid("LanderDiscretizer: tile counts must be positive");
    n_states_ = cfg.tiles_x * cfg.tiles_y * cfg.tiles_ydot * cfg.tiles_alpha;
}

namespace {

int bin_of(double v, double lo, double hi, int n) {
    const int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * n));
    return std::clamp(b, 0, n - 1);
}

}  // namespace

int LanderDiscretizer::index(const LanderState& s) const {
    const int bx = bin_of(s.x, -cfg_.map_x_max, cfg_.map_x_max, cfg_.tiles_x);
    const int by = bin_of(s.y, 0.0, cfg_.map_y_max, cfg_.tiles_y);
    const int bv = bin_of(s.y_dot, -cfg_.ydot_clip, cfg_.ydot_clip, cfg_.tiles_ydot);
    const int ba = bin_of(s.alpha, -cfg_.alpha_clip, cfg_.alpha_clip, cfg_.tiles_alpha);
    return ((bx * cfg_.tiles_y + by) * cfg_.tiles_ydot + bv) * cfg_.tiles_alpha + ba;
}

LanderTrainEnv::LanderTrainEnv(const LanderConfig& cfg, bool deploy)
    : cfg_(cfg), deploy_(deploy), disc_(cfg) {
    constraints_ = {{"unsafe", {}, cfg_.kappa}};
}

LanderTrainEnv::LanderTrainEnv(const LanderConfig& cfg, const FunnelIntervention& iv, bool deploy)
    : cfg_(cfg), iv_(iv), has_iv_(true), deploy_(deploy), disc_(cfg) {
    if (!(iv.reset_steepness_a_prime > iv.steepness_a) || !(iv.steepness_a > 0.0))
        throw ConfigInvalid("LanderTrainEnv: funnel needs a' > a > 0");
    // Under supervision the craft is expected to never fail, so the unsafe
    // budget is zero and the trigger budget is the intervention's tau.
    constraints_ = {{"unsafe", {}, 0.0}, {"trigger:" + iv.name, {}, iv.tau}};
}

int LanderTrainEnv::episode_horizon() const {
    return deploy_ ? cfg_.timeout_deploy : cfg_.timeout_train;
}

std::vector<std::uint8_t> LanderTrainEnv::hits_now(bool unsafe, bool trigger_entry) const {
    std::vector<std::uint8_t> hits(constraints_.size(), 0);
    hits[0] = unsafe ? 1 : 0;
    if (hits.size() > 1) hits[1] = trigger_entry ? 1 : 0;
    return hits;
}

EnvReset LanderTrainEnv::reset(Rng& rng) {
    terrain_ = Terrain::generate(cfg_, rng.next_u64());
    const auto jitter = [&rng](double r) { return (2.0 * rng.next_double() - 1.0) * r; };
    s_ = LanderState{};
    s_.x = jitter(cfg_.start_x_jitter);
    s_.y = cfg_.start_y;
    s_.x_dot = jitter(cfg_.start_xdot_jitter);
    s_.alpha = jitter(cfg_.start_alpha_jitter);
    steps_ = 0;
    episode_over_ = false;
    last_outcome_ = LanderOutcome::none;
    pending_rescue_ = has_iv_ && lander_trigger(s_, iv_.steepness_a, cfg_);
    EnvReset out;
    out.state = disc_.index(s_);
    out.constraint_hits = hits_now(false, pending_rescue_);
    return out;
}

EnvStep LanderTrainEnv::step(int action, Rng& rng) {
    (void)rng;  // the physics and the rescue geometry are deterministic
    if (episode_over_) throw DimensionMismatch("LanderTrainEnv::step called on finished episode");
    if (action < 0 || action >= 4)
        throw DimensionMismatch("LanderTrainEnv::step: action out of range");

    EnvStep out;
    bool trigger_entry = false;
    if (pending_rescue_) {
        // Supervised displacement: the agent's action is immaterial and the
        // transition carries zero reward. The placement is kept a safety
        // margin above the surface (the verbatim over-pad drop can otherwise
        // end below it).
        s_ = reset_rescue(s_, iv_, cfg_);
        const double floor_y = terrain_.height(s_.x) + cfg_.min_rescue_clearance;
        if (s_.y < floor_y) s_.y = floor_y;
        // A very steep rescue line can project high entry points above the
        // ceiling; cap the drop-off so the rescue never exits the map.
        const double ceil_y = cfg_.map_y_max - cfg_.min_rescue_clearance;
        if (s_.y > ceil_y) s_.y = ceil_y;
        out.triggered = true;
        out.reward = 0.0;
        ++steps_;
        pending_rescue_ = lander_trigger(s_, iv_.steepness_a, cfg_);
        trigger_entry = pending_rescue_;
        if (steps_ >= episode_horizon()) {
            out.done = true;
            out.termination = TerminationKind::timeout;
            out.reward += cfg_.timeout_reward;
            last_outcome_ = LanderOutcome::timeout;
        }
    } else {
        const LanderStepResult r = step_lander(s_, static_cast<LanderAction>(action), cfg_,
                                               terrain_, steps_, episode_horizon());
        ++steps_;
        s_ = r.state;
        // A successful landing always ends the episode; any other terminal
        // outcome inside the trigger region is preempted by the supervisor
        // (the craft is caught as it enters the wedge).
        const bool trig = has_iv_ && r.outcome != LanderOutcome::landed &&
                          lander_trigger(s_, iv_.steepness_a, cfg_);
        if (trig) {
            pending_rescue_ = true;
            trigger_entry = true;
            out.reward = r.move_reward;
        } else {
            out.reward = r.reward;
            if (r.done) {
                out.done = true;
                last_outcome_ = r.outcome;
                switch (r.outcome) {
                    case LanderOutcome::landed: out.termination = TerminationKind::goal; break;
                    case LanderOutcome::crashed:
                    case LanderOutcome::out_of_map:
                        out.termination = TerminationKind::unsafe;
                        out.failure = true;
                        break;
                    default: out.termination = TerminationKind::timeout; break;
                }
            }
        }
    }
    out.next_state = disc_.index(s_);
    out.constraint_hits = hits_now(out.failure, trigger_entry);
    episode_over_ = out.done;
    return out;
}

}  // namespace cisr
