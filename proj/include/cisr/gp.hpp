#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "cisr/rng.hpp"

namespace cisr {

// Gamma hyperprior, parametrized the usual shape/scale way but constructible
// from a (mean, variance) pair: shape = mean^2/var, scale = var/mean.
struct GammaPrior {
    double shape = 1.0;
    double scale = 1.0;

    static GammaPrior from_mean_var(double mean, double variance);
    double mean() const { return shape * scale; }
    double variance() const { return shape * scale * scale; }
    double log_density(double x) const;
};

// Squared-exponential kernel with one lengthscale per input dimension.
struct GPHyperparams {
    double signal_variance = 1.0;
    std::vector<double> lengthscales;
    double noise_variance = 1e-2;
};

struct GPHyperpriors {
    GammaPrior signal_variance;
    std::vector<GammaPrior> lengthscales;
    GammaPrior noise_variance;
};

double kernel_rbf_ard(const std::vector<double>& x1, const std::vector<double>& x2,
                      const GPHyperparams& hyper);

// Per-dimension min-max input scaling to [0,1] plus target standardization.
// Degenerate dimensions (constant inputs, zero target spread) map to 0 and
// keep scale 1 respectively.
struct NormalizationStats {
    std::vector<double> in_lo, in_hi;
    double y_mean = 0.0;
    double y_std = 1.0;

    std::vector<double> normalize_x(const std::vector<double>& x) const;
    std::vector<double> denormalize_x(const std::vector<double>& x) const;
    double normalize_y(double y) const { return (y - y_mean) / y_std; }
    double denormalize_y(double y) const { return y * y_std + y_mean; }
};

struct GPModel {
    std::vector<std::vector<double>> inputs;
    std::vector<double> targets;
    GPHyperparams hyper;
    std::optional<NormalizationStats> normalization;  // set by normalize_dataset

    int dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs.front().size()); }
    int size() const { return static_cast<int>(inputs.size()); }
    void add(std::vector<double> x, double y);
};

// Returns a copy of the model with normalized data and the stats recorded.
GPModel normalize_dataset(const GPModel& model);
// Inverse transform (exact round trip up to floating point).
GPModel denormalize_dataset(const GPModel& model);

struct GPPosterior {
    double mean = 0.0;
    double variance = 0.0;
};

// Factorizes (K + sigma_n^2 I) once and answers posterior queries. On
// factorization failure escalates through a jitter ladder of 1e-10, 1e-8,
// 1e-6 before giving up with SingularKernel.
class GPSolver {
  public:
    explicit GPSolver(const GPModel& model);
    ~GPSolver();
    GPSolver(GPSolver&&) noexcept;
    GPSolver& operator=(GPSolver&&) noexcept;
    GPPosterior at(const std::vector<double>& x) const;
    double log_marginal_likelihood() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// One-shot posterior. An empty model returns the prior (0, signal_variance).
GPPosterior gp_posterior(const GPModel& model, const std::vector<double>& x);

// Maximum-a-posteriori hyperparameters: multi-start Nelder-Mead in log space
// on log marginal likelihood plus Gamma log densities. The returned
// hyperparameters never score worse than the model's current ones.
GPHyperparams map_fit(const GPModel& model, const GPHyperpriors& priors, int restarts = 4,
                      std::uint64_t seed = 0);

// Posterior objective value (log marginal likelihood + log priors) for a
// given hyperparameter setting; exposed for tests.
double map_objective(const GPModel& model, const GPHyperpriors& priors,
                     const GPHyperparams& hyper);

// Search space for proposals: continuous interval dimensions and categorical
// dimensions with a finite id set. Categorical ids enter the GP relaxed to
// id/(n_choices-1) in [0,1]; proposals are always exact ids.
struct ParamDim {
    enum class Kind { continuous, categorical } kind = Kind::continuous;
    double lo = 0.0, hi = 1.0;  // continuous bounds
    int n_choices = 0;          // categorical cardinality

    static ParamDim interval(double lo, double hi);
    static ParamDim choice(int n_choices);
};

struct ParamSpace {
    std::vector<ParamDim> dims;

    int size() const { return static_cast<int>(dims.size()); }
    // Relaxes a raw parameter vector (categorical entries hold exact ids)
    // into GP coordinates.
    std::vector<double> relax(const std::vector<double>& raw) const;
    std::vector<double> sample(Rng& rng) const;
};

struct UCBConfig {
    double beta = 4.0;  // acquisition is mean + sqrt(beta) * stddev
    int candidate_count = 64;
    int restarts = 8;           // local-search restarts from the best candidates
    int local_search_iters = 40;
};

// Proposes the next parameter vector by maximizing mean + sqrt(beta)*stddev
// over the space: exhaustive over categorical combinations (sampled when the
// grid is large), random candidates plus coordinate descent refinement over
// the continuous dimensions. With an empty model this is a uniform draw.
// Deterministic for fixed (model, space, config, seed).
std::vector<double> ucb_propose(const GPModel& model, const ParamSpace& space,
                                const UCBConfig& config, std::uint64_t seed);

}  // namespace cisr
