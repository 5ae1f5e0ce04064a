#include "cisr/student.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cisr/errors.hpp"

namespace cisr {

LagrangeState LagrangeState::uniform(int n_constraints, double bound_B) {
    if (n_constraints < 0 || bound_B <= 0.0 || !std::isfinite(bound_B))
        throw DimensionMismatch("LagrangeState: need bound_B > 0");
    LagrangeState st;
    st.bound_B = bound_B;
    st.lambda.assign(n_constraints, bound_B / (n_constraints + 1.0));
    return st;
}

double LagrangeState::slack() const {
    double sum = 0.0;
    for (double l : lambda) sum += l;
    return bound_B - sum;
}

LagrangeState dual_update_eg(const LagrangeState& state, const std::vector<double>& gaps,
                             double eta) {
    const std::size_t n = state.lambda.size();
    if (gaps.size() != n) throw DimensionMismatch("dual_update_eg: one gap per multiplier");
    double sum = 0.0;
    for (double l : state.lambda) {
        if (l < 0.0 || !std::isfinite(l))
            throw NegativeLambda("dual_update_eg: multiplier is negative or non-finite");
        sum += l;
    }
    if (sum > state.bound_B * (1.0 + 1e-9) + 1e-12)
        throw NegativeLambda("dual_update_eg: multipliers exceed the simplex bound");
    const double slack = std::max(0.0, state.bound_B - sum);

    // Work with log-weights so large gaps cannot overflow the exponentials.
    // The slack coordinate is carried through without exponentiation.
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    std::vector<double> logw(n, kNegInf);
    double max_log = slack > 0.0 ? std::log(slack) : kNegInf;
    for (std::size_t c = 0; c < n; ++c) {
        if (!std::isfinite(gaps[c]))
            throw DimensionMismatch("dual_update_eg: non-finite gap estimate");
        if (state.lambda[c] > 0.0) {
            logw[c] = std::log(state.lambda[c]) + eta * gaps[c];
            max_log = std::max(max_log, logw[c]);
        }
    }
    if (max_log == kNegInf)
        throw ZeroMassDegenerate("dual_update_eg: every simplex weight vanished");

    double denom = slack > 0.0 ? std::exp(std::log(slack) - max_log) : 0.0;
    std::vector<double> scaled(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        if (logw[c] != kNegInf) {
            scaled[c] = std::exp(logw[c] - max_log);
            denom += scaled[c];
        }
    }
    if (denom <= 0.0 || !std::isfinite(denom))
        throw ZeroMassDegenerate("dual_update_eg: weight normalization degenerate");

    LagrangeState out;
    out.bound_B = state.bound_B;
    out.lambda.resize(n);
    for (std::size_t c = 0; c < n; ++c) out.lambda[c] = state.bound_B * scaled[c] / denom;

    // Rounding in the renormalization can leave the float sum a few ulps
    // above the bound; trim the largest coordinate until the invariant holds
    // exactly so downstream updates never see an over-full simplex.
    double total = 0.0;
    for (double l : out.lambda) total += l;
    while (total > state.bound_B) {
        std::size_t big = 0;
        for (std::size_t c = 1; c < n; ++c)
            if (out.lambda[c] > out.lambda[big]) big = c;
        const double before = out.lambda[big];
        out.lambda[big] = std::max(0.0, before - (total - state.bound_B));
        if (out.lambda[big] == before)
            out.lambda[big] = std::nextafter(before, 0.0);
        total = 0.0;
        for (double l : out.lambda) total += l;
    }
    return out;
}

StudentState StudentState::fresh(int n_states, int n_actions) {
    if (n_states < 1 || n_actions < 1)
        throw DimensionMismatch("StudentState: need at least one state and action");
    StudentState st;
    st.n_states = n_states;
    st.n_actions = n_actions;
    st.logits.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    st.value_table.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    return st;
}

StudentState StudentState::warm_start(const StudentState& previous) {
    StudentState st = previous;
    st.steps_done = 0;
    return st;
}

TabularPolicy StudentState::policy(double temperature) const {
    TabularPolicy p;
    p.n_states = n_states;
    p.n_actions = n_actions;
    p.probs.resize(logits.size());
    const double inv_t = 1.0 / std::max(temperature, 1e-12);
    for (int s = 0; s < n_states; ++s) {
        const double* row = logits.data() + static_cast<std::size_t>(s) * n_actions;
        double* out = p.probs.data() + static_cast<std::size_t>(s) * n_actions;
        double m = row[0];
        for (int a = 1; a < n_actions; ++a) m = std::max(m, row[a]);
        double z = 0.0;
        for (int a = 0; a < n_actions; ++a) {
            out[a] = std::exp((row[a] - m) * inv_t);
            z += out[a];
        }
        for (int a = 0; a < n_actions; ++a) out[a] /= z;
    }
    return p;
}

namespace {

// Softmax of one logits row into `probs` (stack buffer provided by caller).
void softmax_row(const double* logits, int n, double inv_t, double* probs) {
    double m = logits[0];
    for (int a = 1; a < n; ++a) m = std::max(m, logits[a]);
    double z = 0.0;
    for (int a = 0; a < n; ++a) {
        probs[a] = std::exp((logits[a] - m) * inv_t);
        z += probs[a];
    }
    for (int a = 0; a < n; ++a) probs[a] /= z;
}

struct EpisodeAccumulator {
    double ret = 0.0;
    std::vector<double> visits;
    bool open = false;
};

}  // namespace

TrainResult train_student(TrainEnv& env, const SolverConfig& config, std::int64_t budget_steps,
                          std::uint64_t seed, const StudentState* warm) {
    if (budget_steps < 1) throw BudgetZero("train_student: step budget must be >= 1");
    if (config.primal_steps_per_epoch < 1)
        throw BudgetZero("train_student: primal_steps_per_epoch must be >= 1");

    const int S = env.n_states(), A = env.n_actions();
    const auto& constraints = env.constraints();
    const std::size_t C = constraints.size();

    TrainResult result;
    result.state = warm ? StudentState::warm_start(*warm) : StudentState::fresh(S, A);
    if (result.state.n_states != S || result.state.n_actions != A)
        throw DimensionMismatch("train_student: warm-start tables do not match the environment");
    result.duals = LagrangeState::uniform(static_cast<int>(C), config.bound_B);

    Rng rng(seed);
    auto& logits = result.state.logits;
    auto& qtab = result.state.value_table;
    const double inv_t = 1.0 / std::max(config.exploration_temperature, 1e-12);

    std::vector<double> pi_s(A), pi_n(A);
    EpisodeAccumulator ep;
    ep.visits.assign(C, 0.0);
    int cur_state = 0;
    bool need_reset = true;

    // Epoch accumulators.
    std::int64_t epoch_episodes = 0;
    double epoch_return = 0.0;
    std::vector<double> epoch_visits(C, 0.0);
    std::int64_t failures_total = 0;
    std::int64_t steps_remaining = budget_steps;
    int epoch_index = 0;

    auto begin_episode = [&]() {
        const EnvReset res = env.reset(rng);
        ep.ret = 0.0;
        std::fill(ep.visits.begin(), ep.visits.end(), 0.0);
        for (std::size_t c = 0; c < C; ++c) ep.visits[c] += res.constraint_hits[c];
        if (res.failure) ++failures_total;
        ep.open = true;
        cur_state = res.state;
        if (res.done) {
            // Degenerate immediate termination; close the episode right away.
            epoch_return += 0.0;
            for (std::size_t c = 0; c < C; ++c) epoch_visits[c] += ep.visits[c];
            ++epoch_episodes;
            ep.open = false;
            return false;
        }
        return true;
    };

    while (steps_remaining > 0) {
        const std::int64_t epoch_steps =
            std::min<std::int64_t>(config.primal_steps_per_epoch, steps_remaining);
        epoch_episodes = 0;
        epoch_return = 0.0;
        std::fill(epoch_visits.begin(), epoch_visits.end(), 0.0);

        for (std::int64_t step = 0; step < epoch_steps; ++step) {
            if (need_reset) {
                int attempts = 0;
                while (!begin_episode()) {
                    if (++attempts > 100000)
                        throw BudgetZero(
                            "train_student: initial distribution only reaches terminal states");
                }
                need_reset = false;
            }
            const int s = cur_state;
            double* lrow = logits.data() + static_cast<std::size_t>(s) * A;
            double* qrow = qtab.data() + static_cast<std::size_t>(s) * A;
            softmax_row(lrow, A, inv_t, pi_s.data());
            const int a = static_cast<int>(rng.sample_row(pi_s.data(), A));

            const EnvStep st = env.step(a, rng);
            if (st.failure) ++failures_total;
            double r_scal = st.reward;
            for (std::size_t c = 0; c < C; ++c)
                if (st.constraint_hits[c]) r_scal -= result.duals.lambda[c];

            // Expected-SARSA critic and advantage actor on the penalized reward.
            double v_s = 0.0;
            for (int b = 0; b < A; ++b) v_s += pi_s[b] * qrow[b];
            double v_n = 0.0;
            if (!st.done) {
                const double* lnext =
                    logits.data() + static_cast<std::size_t>(st.next_state) * A;
                const double* qnext =
                    qtab.data() + static_cast<std::size_t>(st.next_state) * A;
                softmax_row(lnext, A, inv_t, pi_n.data());
                for (int b = 0; b < A; ++b) v_n += pi_n[b] * qnext[b];
            }
            const double delta = r_scal + v_n - v_s;
            qrow[a] += config.value_learning_rate * (r_scal + v_n - qrow[a]);

            double entropy = 0.0;
            for (int b = 0; b < A; ++b)
                if (pi_s[b] > 0.0) entropy -= pi_s[b] * std::log(pi_s[b]);
            for (int b = 0; b < A; ++b) {
                const double grad_logp = (b == a ? 1.0 : 0.0) - pi_s[b];
                double grad_ent = 0.0;
                if (pi_s[b] > 0.0) grad_ent = -pi_s[b] * (std::log(pi_s[b]) + entropy);
                lrow[b] += config.learning_rate * (delta * grad_logp + config.ent_coef * grad_ent);
            }

            ep.ret += st.reward;
            for (std::size_t c = 0; c < C; ++c) ep.visits[c] += st.constraint_hits[c];
            cur_state = st.next_state;
            ++result.state.steps_done;
            if (st.done) {
                epoch_return += ep.ret;
                for (std::size_t c = 0; c < C; ++c) epoch_visits[c] += ep.visits[c];
                ++epoch_episodes;
                ep.open = false;
                need_reset = true;
            }
        }
        steps_remaining -= epoch_steps;
        result.stats.total_steps += epoch_steps;

        // Dual step on per-episode averages; an epoch with no completed
        // episode falls back to the running episode's counts.
        std::vector<double> gaps(C, 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            const double mean_visits =
                epoch_episodes > 0 ? epoch_visits[c] / static_cast<double>(epoch_episodes)
                                   : ep.visits[c];
            gaps[c] = mean_visits - constraints[c].tolerance;
        }
        result.duals = dual_update_eg(result.duals, gaps, config.eta);

        EpochStats row;
        row.epoch = epoch_index++;
        row.return_estimate =
            epoch_episodes > 0 ? epoch_return / static_cast<double>(epoch_episodes) : ep.ret;
        row.violation_gap = gaps;
        row.lambda = result.duals.lambda;
        row.training_failures = failures_total;
        row.episodes = epoch_episodes;
        result.stats.epochs.push_back(std::move(row));
    }
    result.stats.training_failures = failures_total;
    return result;
}

PolicyFeatures evaluate_features(TrainEnv& env, const StudentState& student,
                                 const SolverConfig& config, int n_rollouts,
                                 std::uint64_t seed) {
    if (n_rollouts < 1) throw BudgetZero("evaluate_features: need at least one rollout");
    const TabularPolicy policy = student.policy(config.exploration_temperature);
    Rng rng(seed);
    const std::size_t C = env.constraints().size();
    double ret = 0.0;
    double last_visits = 0.0;
    for (int i = 0; i < n_rollouts; ++i) {
        const EpisodeStats epi = run_episode(env, policy, rng);
        ret += epi.ret;
        last_visits += epi.constraint_visits[C - 1];
    }
    PolicyFeatures f;
    f.value_estimate = ret / n_rollouts;
    f.violation_gap = last_visits / n_rollouts - env.constraints()[C - 1].tolerance;
    return f;
}

}  // namespace cisr
