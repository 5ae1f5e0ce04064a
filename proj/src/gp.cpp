#include "cisr/gp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "cisr/errors.hpp"

namespace cisr {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;
}  // namespace

GammaPrior GammaPrior::from_mean_var(double mean, double variance) {
    if (mean <= 0.0 || variance <= 0.0)
        throw DimensionMismatch("GammaPrior: mean and variance must be positive");
    GammaPrior g;
    g.shape = mean * mean / variance;
    g.scale = variance / mean;
    return g;
}

double GammaPrior::log_density(double x) const {
    if (x <= 0.0) return kNegInf;
    return (shape - 1.0) * std::log(x) - x / scale - shape * std::log(scale) - std::lgamma(shape);
}

double kernel_rbf_ard(const std::vector<double>& x1, const std::vector<double>& x2,
                      const GPHyperparams& hyper) {
    if (x1.size() != x2.size() || x1.size() != hyper.lengthscales.size())
        throw DimensionMismatch("kernel_rbf_ard: input/lengthscale dimensions disagree");
    if (hyper.signal_variance <= 0.0)
        throw DimensionMismatch("kernel_rbf_ard: signal variance must be positive");
    double quad = 0.0;
    for (std::size_t d = 0; d < x1.size(); ++d) {
        const double l = hyper.lengthscales[d];
        if (l <= 0.0) throw DimensionMismatch("kernel_rbf_ard: lengthscales must be positive");
        const double z = (x1[d] - x2[d]) / l;
        quad += z * z;
    }
    return hyper.signal_variance * std::exp(-0.5 * quad);
}

std::vector<double> NormalizationStats::normalize_x(const std::vector<double>& x) const {
    if (x.size() != in_lo.size()) throw DimensionMismatch("normalize_x: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double span = in_hi[d] - in_lo[d];
        out[d] = span > 1e-12 ? (x[d] - in_lo[d]) / span : 0.0;
    }
    return out;
}

std::vector<double> NormalizationStats::denormalize_x(const std::vector<double>& x) const {
    if (x.size() != in_lo.size()) throw DimensionMismatch("denormalize_x: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double span = in_hi[d] - in_lo[d];
        out[d] = span > 1e-12 ? in_lo[d] + x[d] * span : in_lo[d];
    }
    return out;
}

void GPModel::add(std::vector<double> x, double y) {
    if (!inputs.empty() && x.size() != inputs.front().size())
        throw DimensionMismatch("GPModel::add: input dimension mismatch");
    inputs.push_back(std::move(x));
    targets.push_back(y);
}

GPModel normalize_dataset(const GPModel& model) {
    if (model.normalization)
        throw DimensionMismatch("normalize_dataset: model is already normalized");
    GPModel out = model;
    const int d = model.dim();
    NormalizationStats stats;
    stats.in_lo.assign(d, 0.0);
    stats.in_hi.assign(d, 1.0);
    for (int k = 0; k < d; ++k) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& x : model.inputs) {
            lo = std::min(lo, x[k]);
            hi = std::max(hi, x[k]);
        }
        stats.in_lo[k] = lo;
        stats.in_hi[k] = hi;
    }
    double mean = 0.0;
    for (double y : model.targets) mean += y;
    if (!model.targets.empty()) mean /= static_cast<double>(model.targets.size());
    double var = 0.0;
    for (double y : model.targets) var += (y - mean) * (y - mean);
    if (!model.targets.empty()) var /= static_cast<double>(model.targets.size());
    stats.y_mean = mean;
    stats.y_std = var > 1e-24 ? std::sqrt(var) : 1.0;

    for (auto& x : out.inputs) x = stats.normalize_x(x);
    for (auto& y : out.targets) y = stats.normalize_y(y);
    out.normalization = stats;
    return out;
}

GPModel denormalize_dataset(const GPModel& model) {
    if (!model.normalization)
        throw DimensionMismatch("denormalize_dataset: model carries no normalization stats");
    GPModel out = model;
    const auto& stats = *model.normalization;
    for (auto& x : out.inputs) x = stats.denormalize_x(x);
    for (auto& y : out.targets) y = stats.denormalize_y(y);
    out.normalization.reset();
    return out;
}

struct GPSolver::Impl {
    GPModel model;
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd alpha;
    double lml = 0.0;
    double jitter = 0.0;
};

namespace {

// Factorization helper shared by the solver and the fit objective. Tries the
// plain matrix first and escalates through the jitter ladder only on
// factorization failure; returns false when every level fails.
bool factorize(const GPModel& model, Eigen::LLT<Eigen::MatrixXd>& llt, Eigen::VectorXd& alpha,
               double& lml, double& jitter_used) {
    const int n = model.size();
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = kernel_rbf_ard(model.inputs[i], model.inputs[j], model.hyper);
            K(i, j) = v;
            K(j, i) = v;
        }
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = model.targets[i];

    for (double jitter : {0.0, 1e-10, 1e-8, 1e-6}) {
        Eigen::MatrixXd Kn = K;
        Kn.diagonal().array() += model.hyper.noise_variance + jitter;
        llt.compute(Kn);
        if (llt.info() != Eigen::Success) continue;
        // A numerically rank-deficient matrix can slip through with a tiny
        // pivot and a garbage solve; count that as a failure as well.
        const auto diag = llt.matrixLLT().diagonal();
        if (diag.minCoeff() <= 1e-7 * diag.maxCoeff()) continue;
        alpha = llt.solve(y);
        double logdet = 0.0;
        for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixLLT()(i, i));
        lml = -0.5 * y.dot(alpha) - logdet - 0.5 * n * kLogTwoPi;
        if (!std::isfinite(lml)) continue;
        jitter_used = jitter;
        return true;
    }
    return false;
}

}  // namespace

GPSolver::GPSolver(const GPModel& model) : impl_(new Impl) {
    impl_->model = model;
    if (model.size() == 0) return;
    if (model.targets.size() != model.inputs.size())
        throw DimensionMismatch("GPSolver: inputs/targets length mismatch");
    if (static_cast<int>(model.hyper.lengthscales.size()) != model.dim())
        throw DimensionMismatch("GPSolver: lengthscale count does not match input dimension");
    if (!factorize(impl_->model, impl_->llt, impl_->alpha, impl_->lml, impl_->jitter))
        throw SingularKernel("GPSolver: kernel matrix not factorizable at any jitter level");
}

GPSolver::~GPSolver() = default;
GPSolver::GPSolver(GPSolver&&) noexcept = default;
GPSolver& GPSolver::operator=(GPSolver&&) noexcept = default;

GPPosterior GPSolver::at(const std::vector<double>& x) const {
    const GPModel& m = impl_->model;
    GPPosterior post;
    if (m.size() == 0) {
        post.mean = 0.0;
        post.variance = m.hyper.signal_variance;
        return post;
    }
    const int n = m.size();
    Eigen::VectorXd ks(n);
    for (int i = 0; i < n; ++i) ks(i) = kernel_rbf_ard(m.inputs[i], x, m.hyper);
    post.mean = ks.dot(impl_->alpha);
    const Eigen::VectorXd v = impl_->llt.matrixL().solve(ks);
    double var = kernel_rbf_ard(x, x, m.hyper) - v.squaredNorm();
    if (var < -1e-10)
        throw SingularKernel("GPSolver: posterior variance more negative than -1e-10");
    post.variance = std::max(var, 0.0);
    return post;
}

double GPSolver::log_marginal_likelihood() const { return impl_->lml; }

GPPosterior gp_posterior(const GPModel& model, const std::vector<double>& x) {
    return GPSolver(model).at(x);
}

double map_objective(const GPModel& model, const GPHyperpriors& priors,
                     const GPHyperparams& hyper) {
    if (priors.lengthscales.size() != hyper.lengthscales.size())
        throw DimensionMismatch("map_objective: prior/lengthscale count mismatch");
    double prior_term = priors.signal_variance.log_density(hyper.signal_variance) +
                        priors.noise_variance.log_density(hyper.noise_variance);
    for (std::size_t d = 0; d < hyper.lengthscales.size(); ++d)
        prior_term += priors.lengthscales[d].log_density(hyper.lengthscales[d]);
    if (!std::isfinite(prior_term)) return kNegInf;
    if (model.size() == 0) return prior_term;

    GPModel scored = model;
    scored.hyper = hyper;
    Eigen::LLT<Eigen::MatrixXd> llt;
    Eigen::VectorXd alpha;
    double lml = 0.0, jitter = 0.0;
    if (!factorize(scored, llt, alpha, lml, jitter)) return kNegInf;
    return lml + prior_term;
}

namespace {

// Nelder-Mead maximization (classic reflect/expand/contract/shrink).
struct NelderMead {
    std::function<double(const std::vector<double>&)> f;
    int max_iter = 400;
    double tol = 1e-10;

    std::pair<std::vector<double>, double> run(const std::vector<double>& x0, double step) const {
        const int d = static_cast<int>(x0.size());
        std::vector<std::vector<double>> xs(d + 1, x0);
        std::vector<double> fs(d + 1);
        for (int i = 0; i < d; ++i) xs[i + 1][i] += step;
        for (int i = 0; i <= d; ++i) fs[i] = f(xs[i]);

        auto order = [&]() {
            std::vector<int> idx(d + 1);
            for (int i = 0; i <= d; ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] > fs[b]; });
            std::vector<std::vector<double>> xs2(d + 1);
            std::vector<double> fs2(d + 1);
            for (int i = 0; i <= d; ++i) {
                xs2[i] = xs[idx[i]];
                fs2[i] = fs[idx[i]];
            }
            xs = std::move(xs2);
            fs = std::move(fs2);
        };

        order();
        for (int it = 0; it < max_iter; ++it) {
            if (std::isfinite(fs[0]) && std::isfinite(fs[d]) && fs[0] - fs[d] < tol) break;
            std::vector<double> centroid(d, 0.0);
            for (int i = 0; i < d; ++i)
                for (int k = 0; k < d; ++k) centroid[k] += xs[i][k] / d;

            auto blend = [&](double coef) {
                std::vector<double> x(d);
                for (int k = 0; k < d; ++k) x[k] = centroid[k] + coef * (centroid[k] - xs[d][k]);
                return x;
            };

            const auto xr = blend(1.0);
            const double fr = f(xr);
            if (fr > fs[0]) {
                const auto xe = blend(2.0);
                const double fe = f(xe);
                if (fe > fr) {
                    xs[d] = xe;
                    fs[d] = fe;
                } else {
                    xs[d] = xr;
                    fs[d] = fr;
                }
            } else if (fr > fs[d - 1]) {
                xs[d] = xr;
                fs[d] = fr;
            } else {
                const auto xc = blend(-0.5);
                const double fc = f(xc);
                if (fc > fs[d]) {
                    xs[d] = xc;
                    fs[d] = fc;
                } else {
                    for (int i = 1; i <= d; ++i) {
                        for (int k = 0; k < d; ++k) xs[i][k] = xs[0][k] + 0.5 * (xs[i][k] - xs[0][k]);
                        fs[i] = f(xs[i]);
                    }
                }
            }
            order();
        }
        return {xs[0], fs[0]};
    }
};

}  // namespace

GPHyperparams map_fit(const GPModel& model, const GPHyperpriors& priors, int restarts,
                      std::uint64_t seed) {
    const int d = model.size() > 0 ? model.dim() : static_cast<int>(priors.lengthscales.size());
    if (static_cast<int>(priors.lengthscales.size()) != d)
        throw DimensionMismatch("map_fit: prior count does not match input dimension");
    const int nz = d + 2;  // log(signal), log(l_1..l_d), log(noise)

    auto unpack = [&](const std::vector<double>& z) {
        GPHyperparams h;
        h.signal_variance = std::exp(z[0]);
        h.lengthscales.resize(d);
        for (int k = 0; k < d; ++k) h.lengthscales[k] = std::exp(z[1 + k]);
        h.noise_variance = std::exp(z[nz - 1]);
        return h;
    };
    auto objective = [&](const std::vector<double>& z) {
        for (double v : z)
            if (!std::isfinite(v) || std::abs(v) > 23.0) return kNegInf;
        return map_objective(model, priors, unpack(z));
    };
    auto pack = [&](const GPHyperparams& h) {
        std::vector<double> z(nz);
        z[0] = std::log(std::max(h.signal_variance, 1e-10));
        for (int k = 0; k < d; ++k) z[1 + k] = std::log(std::max(h.lengthscales[k], 1e-10));
        z[nz - 1] = std::log(std::max(h.noise_variance, 1e-10));
        return z;
    };

    std::vector<std::vector<double>> starts;
    if (static_cast<int>(model.hyper.lengthscales.size()) == d) starts.push_back(pack(model.hyper));
    GPHyperparams prior_mean;
    prior_mean.signal_variance = priors.signal_variance.mean();
    prior_mean.noise_variance = priors.noise_variance.mean();
    prior_mean.lengthscales.resize(d);
    for (int k = 0; k < d; ++k) prior_mean.lengthscales[k] = priors.lengthscales[k].mean();
    starts.push_back(pack(prior_mean));
    if (model.size() >= 2) {
        GPHyperparams heur = prior_mean;
        double mean = 0.0;
        for (double y : model.targets) mean += y;
        mean /= model.size();
        double var = 0.0;
        for (double y : model.targets) var += (y - mean) * (y - mean);
        var = std::max(var / model.size(), 1e-6);
        heur.signal_variance = var;
        heur.noise_variance = std::max(1e-4 * var, 1e-8);
        for (int k = 0; k < d; ++k) {
            double lo = model.inputs[0][k], hi = lo;
            for (const auto& x : model.inputs) {
                lo = std::min(lo, x[k]);
                hi = std::max(hi, x[k]);
            }
            heur.lengthscales[k] = std::max(0.5 * (hi - lo), 1e-3);
        }
        starts.push_back(pack(heur));
    }
    Rng rng(seed ^ 0x9042a7b1f5d3c2e1ULL);
    const auto base = pack(prior_mean);
    while (static_cast<int>(starts.size()) < std::max(restarts, 1) + 2) {
        std::vector<double> z = base;
        for (double& v : z) v += 0.4 * rng.next_normal();
        starts.push_back(std::move(z));
    }

    std::vector<double> best_z;
    double best_f = kNegInf;
    for (const auto& z : starts) {
        const double fz = objective(z);
        if (fz > best_f) {
            best_f = fz;
            best_z = z;
        }
    }
    NelderMead nm{objective, 500, 1e-11};
    const int runs = std::min<int>(static_cast<int>(starts.size()), std::max(restarts, 1) + 2);
    for (int i = 0; i < runs; ++i) {
        const auto [z, fz] = nm.run(starts[i], 0.3);
        if (fz > best_f) {
            best_f = fz;
            best_z = z;
        }
    }
    if (!std::isfinite(best_f) || best_z.empty())
        throw OptFailed("map_fit: posterior objective is degenerate everywhere");
    return unpack(best_z);
}

ParamDim ParamDim::interval(double lo, double hi) {
    if (!(lo < hi)) throw DimensionMismatch("ParamDim::interval: need lo < hi");
    ParamDim d;
    d.kind = Kind::continuous;
    d.lo = lo;
    d.hi = hi;
    return d;
}

ParamDim ParamDim::choice(int n_choices) {
    if (n_choices < 1) throw DimensionMismatch("ParamDim::choice: need at least one choice");
    ParamDim d;
    d.kind = Kind::categorical;
    d.n_choices = n_choices;
    return d;
}

std::vector<double> ParamSpace::relax(const std::vector<double>& raw) const {
    if (raw.size() != dims.size()) throw DimensionMismatch("ParamSpace::relax: size mismatch");
    std::vector<double> out(raw.size());
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (dims[k].kind == ParamDim::Kind::categorical) {
            const int id = static_cast<int>(std::lround(raw[k]));
            if (id < 0 || id >= dims[k].n_choices)
                throw DimensionMismatch("ParamSpace::relax: categorical id out of range");
            out[k] = dims[k].n_choices > 1
                         ? static_cast<double>(id) / (dims[k].n_choices - 1)
                         : 0.0;
        } else {
            out[k] = raw[k];
        }
    }
    return out;
}

std::vector<double> ParamSpace::sample(Rng& rng) const {
    std::vector<double> out(dims.size());
    for (std::size_t k = 0; k < dims.size(); ++k) {
        if (dims[k].kind == ParamDim::Kind::categorical)
            out[k] = static_cast<double>(rng.next_index(dims[k].n_choices));
        else
            out[k] = dims[k].lo + rng.next_double() * (dims[k].hi - dims[k].lo);
    }
    return out;
}

std::vector<double> ucb_propose(const GPModel& model, const ParamSpace& space,
                                const UCBConfig& config, std::uint64_t seed) {
    if (space.dims.empty()) throw EmptySpace("ucb_propose: empty parameter space");
    Rng rng(seed ^ 0x51c6f2d4b8a9e307ULL);
    if (model.size() == 0) return space.sample(rng);
    if (model.dim() != space.size())
        throw DimensionMismatch("ucb_propose: model dimension does not match the space");

    const GPSolver solver(model);
    const double sqrt_beta = std::sqrt(std::max(config.beta, 0.0));
    auto acquisition = [&](const std::vector<double>& raw) {
        std::vector<double> x = space.relax(raw);
        if (model.normalization) x = model.normalization->normalize_x(x);
        const GPPosterior post = solver.at(x);
        return post.mean + sqrt_beta * std::sqrt(post.variance);
    };

    // Candidate sweep: every categorical combination when the grid is small,
    // otherwise random combinations; random continuous coordinates each time.
    std::vector<std::size_t> cat_dims;
    std::int64_t grid = 1;
    for (std::size_t k = 0; k < space.dims.size(); ++k)
        if (space.dims[k].kind == ParamDim::Kind::categorical) {
            cat_dims.push_back(k);
            grid *= space.dims[k].n_choices;
        }
    const bool exhaustive = grid <= 729;
    const int combos = exhaustive ? static_cast<int>(grid) : config.candidate_count;

    std::vector<double> best_raw;
    double best_acq = kNegInf;
    auto consider = [&](const std::vector<double>& raw) {
        const double a = acquisition(raw);
        if (a > best_acq) {
            best_acq = a;
            best_raw = raw;
        }
    };

    const int draws = std::max(1, config.candidate_count);
    for (int c = 0; c < combos; ++c) {
        std::vector<double> raw(space.size(), 0.0);
        if (exhaustive) {
            int rem = c;
            for (std::size_t k : cat_dims) {
                raw[k] = rem % space.dims[k].n_choices;
                rem /= space.dims[k].n_choices;
            }
        } else {
            for (std::size_t k : cat_dims) raw[k] = rng.next_index(space.dims[k].n_choices);
        }
        for (int dtry = 0; dtry < draws; ++dtry) {
            for (std::size_t k = 0; k < space.dims.size(); ++k)
                if (space.dims[k].kind == ParamDim::Kind::continuous)
                    raw[k] = space.dims[k].lo + rng.next_double() * (space.dims[k].hi - space.dims[k].lo);
            consider(raw);
            if (space.dims.size() == cat_dims.size()) break;  // nothing continuous to vary
        }
    }

    // Coordinate-descent refinement around the incumbent.
    std::vector<double> cur = best_raw;
    for (int it = 0; it < config.local_search_iters; ++it) {
        bool improved = false;
        for (std::size_t k = 0; k < space.dims.size(); ++k) {
            if (space.dims[k].kind == ParamDim::Kind::categorical) {
                const double saved = cur[k];
                for (int id = 0; id < space.dims[k].n_choices; ++id) {
                    if (id == static_cast<int>(saved)) continue;
                    cur[k] = id;
                    const double a = acquisition(cur);
                    if (a > best_acq) {
                        best_acq = a;
                        best_raw = cur;
                        improved = true;
                    }
                }
                cur = best_raw;
            } else {
                const double span = (space.dims[k].hi - space.dims[k].lo) *
                                    std::pow(0.6, it);
                for (double dir : {-1.0, 1.0}) {
                    std::vector<double> trial = cur;
                    trial[k] = std::clamp(cur[k] + dir * 0.25 * span, space.dims[k].lo,
                                          space.dims[k].hi);
                    const double a = acquisition(trial);
                    if (a > best_acq) {
                        best_acq = a;
                        best_raw = trial;
                        improved = true;
                    }
                }
                cur = best_raw;
            }
        }
        if (!improved && it > 4) break;
    }
    return best_raw;
}

}  // namespace cisr
