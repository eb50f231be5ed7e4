#include "ctxinsert/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctxinsert/errors.hpp"
#include "ctxinsert/rng.hpp"

namespace ctxinsert {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2π)

void check_finite_vector(const Eigen::Vector4d& v, const char* what) {
    if (!v.allFinite()) throw ValidationError(std::string(what) + " contains non-finite values");
}

}  // namespace

Gaussian::Gaussian(const Eigen::Vector4d& mean, const Eigen::Matrix4d& covariance)
    : mean_(mean) {
    check_finite_vector(mean, "Gaussian mean");
    if (!covariance.allFinite()) throw ValidationError("Gaussian covariance contains non-finite values");
    double asym = (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12) throw ValidationError("Gaussian covariance is not symmetric");
    // Symmetrize exactly so the stored matrix matches the factorized one.
    covariance_ = 0.5 * (covariance + covariance.transpose());

    Eigen::LLT<Eigen::Matrix4d> llt(covariance_);
    if (llt.info() != Eigen::Success) {
        throw ValidationError("Gaussian covariance is not positive definite");
    }
    chol_lower_ = llt.matrixL();
    double log_det_half = chol_lower_.diagonal().array().log().sum();
    log_norm_ = -2.0 * kLog2Pi - log_det_half;
}

double Gaussian::log_density(const Eigen::Vector4d& x) const {
    Eigen::Vector4d z =
        chol_lower_.triangularView<Eigen::Lower>().solve(Eigen::Vector4d(x - mean_));
    return log_norm_ - 0.5 * z.squaredNorm();
}

void validate_gmm(const GmmModel& model) {
    if (model.components.empty()) throw ValidationError("mixture must have at least one component");
    if (model.weights.size() != model.components.size()) {
        throw ValidationError("mixture weight count does not match component count");
    }
    double total = 0.0;
    for (double w : model.weights) {
        if (!(w > 0.0 && w <= 1.0)) throw ValidationError("mixture weights must lie in (0, 1]");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
}

double log_density(const GmmModel& model, const Eigen::Vector4d& x) {
    size_t k = model.k();
    std::vector<double> terms(k);
    double max_term = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < k; ++i) {
        terms[i] = std::log(model.weights[i]) + model.components[i].log_density(x);
        max_term = std::max(max_term, terms[i]);
    }
    if (!std::isfinite(max_term)) return max_term;
    double acc = 0.0;
    for (size_t i = 0; i < k; ++i) acc += std::exp(terms[i] - max_term);
    return max_term + std::log(acc);
}

double mean_loglik(const GmmModel& model, std::span<const PairFeature> samples) {
    if (samples.empty()) throw NoSamplesError("mean_loglik needs at least one sample");
    double total = 0.0;
    for (const auto& x : samples) total += log_density(model, x);
    return total / static_cast<double>(samples.size());
}

namespace {

struct EmState {
    std::vector<double> weights;
    std::vector<Eigen::Vector4d> means;
    std::vector<Eigen::Matrix4d> covariances;
};

// Biased (1/n) sample covariance plus reg_covar on the diagonal.
Eigen::Matrix4d sample_covariance(const std::vector<Eigen::Vector4d>& xs,
                                  const Eigen::Vector4d& mean, double reg_covar) {
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    for (const auto& x : xs) {
        Eigen::Vector4d d = x - mean;
        cov.noalias() += d * d.transpose();
    }
    cov /= static_cast<double>(xs.size());
    cov += reg_covar * Eigen::Matrix4d::Identity();
    return cov;
}

// k-means++-style seeding: the first mean is a uniform draw, later means are
// drawn with probability proportional to squared distance from the closest
// already-chosen mean.
std::vector<Eigen::Vector4d> seed_means(const std::vector<Eigen::Vector4d>& xs, size_t k,
                                        SeededRng& rng) {
    std::vector<Eigen::Vector4d> means;
    means.reserve(k);
    means.push_back(xs[rng.index(xs.size())]);

    std::vector<double> dist2(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) dist2[i] = (xs[i] - means[0]).squaredNorm();

    while (means.size() < k) {
        double total = 0.0;
        for (double d : dist2) total += d;
        size_t chosen;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            double acc = 0.0;
            chosen = xs.size() - 1;
            for (size_t i = 0; i < xs.size(); ++i) {
                acc += dist2[i];
                if (r < acc) {
                    chosen = i;
                    break;
                }
            }
        } else {
            // All remaining distances are zero (duplicated points).
            chosen = rng.index(xs.size());
        }
        means.push_back(xs[chosen]);
        for (size_t i = 0; i < xs.size(); ++i) {
            dist2[i] = std::min(dist2[i], (xs[i] - means.back()).squaredNorm());
        }
    }
    return means;
}

struct EmRun {
    GmmModel model;
    double final_loglik = -std::numeric_limits<double>::infinity();
    FitTrace trace;
};

GmmModel assemble(const EmState& state) {
    GmmModel model;
    model.weights = state.weights;
    model.components.reserve(state.means.size());
    for (size_t i = 0; i < state.means.size(); ++i) {
        model.components.emplace_back(state.means[i], state.covariances[i]);
    }
    return model;
}

EmRun run_em(const std::vector<Eigen::Vector4d>& xs, size_t k, const FitConfig& config,
             SeededRng rng) {
    size_t n = xs.size();
    EmState state;
    state.means = seed_means(xs, k, rng);
    state.weights.assign(k, 1.0 / static_cast<double>(k));

    Eigen::Vector4d data_mean = Eigen::Vector4d::Zero();
    for (const auto& x : xs) data_mean += x;
    data_mean /= static_cast<double>(n);
    state.covariances.assign(k, sample_covariance(xs, data_mean, config.reg_covar));

    EmRun run;
    // resp is column-major n×k: one column of responsibilities per component.
    Eigen::MatrixXd resp(n, k);
    std::vector<double> terms(k);
    double prev_loglik = -std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < config.max_iter; ++iter) {
        GmmModel current = assemble(state);

        // E-step: responsibilities via log-sum-exp, plus the mean log-likelihood.
        double loglik_sum = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double max_term = -std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < k; ++j) {
                terms[j] = std::log(current.weights[j]) + current.components[j].log_density(xs[i]);
                max_term = std::max(max_term, terms[j]);
            }
            double acc = 0.0;
            for (size_t j = 0; j < k; ++j) acc += std::exp(terms[j] - max_term);
            double lse = max_term + std::log(acc);
            loglik_sum += lse;
            for (size_t j = 0; j < k; ++j) resp(i, j) = std::exp(terms[j] - lse);
        }
        double loglik = loglik_sum / static_cast<double>(n);
        run.trace.mean_loglik.push_back(loglik);

        if (iter > 0 && loglik - prev_loglik < config.tol) {
            // Converged: keep the parameters that produced this likelihood.
            run.model = std::move(current);
            run.final_loglik = loglik;
            return run;
        }
        prev_loglik = loglik;

        // M-step.
        double dip_bound = 0.0;
        for (size_t j = 0; j < k; ++j) {
            double nk = 0.0;
            for (size_t i = 0; i < n; ++i) nk += resp(i, j);
            if (nk < 1e-10) nk = 1e-10;

            Eigen::Vector4d mean = Eigen::Vector4d::Zero();
            for (size_t i = 0; i < n; ++i) mean += resp(i, j) * xs[i];
            mean /= nk;

            Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
            for (size_t i = 0; i < n; ++i) {
                Eigen::Vector4d d = xs[i] - mean;
                cov.noalias() += resp(i, j) * (d * d.transpose());
            }
            cov /= nk;

            // The floor shrinks each density by at most the determinant
            // ratio, so the likelihood transition can dip by at most
            // ½·(logdet(Σ+εI) − logdet Σ) — record it for the trace.
            double pre_logdet = 0.0;
            bool pre_pd = false;
            if (config.reg_covar > 0.0) {
                Eigen::LLT<Eigen::Matrix4d> pre(cov);
                if (pre.info() == Eigen::Success) {
                    pre_pd = true;
                    pre_logdet = 2.0 * pre.matrixL().toDenseMatrix().diagonal().array().log().sum();
                }
            }
            cov += config.reg_covar * Eigen::Matrix4d::Identity();
            if (config.reg_covar > 0.0) {
                if (pre_pd) {
                    Eigen::LLT<Eigen::Matrix4d> post(cov);
                    double post_logdet =
                        2.0 * post.matrixL().toDenseMatrix().diagonal().array().log().sum();
                    dip_bound = std::max(dip_bound, 0.5 * (post_logdet - pre_logdet));
                } else {
                    // Degenerate cluster: the floor rescues a singular
                    // covariance, and the likelihood may drop arbitrarily.
                    dip_bound = std::numeric_limits<double>::infinity();
                }
            }

            state.means[j] = mean;
            state.covariances[j] = cov;
            state.weights[j] = nk / static_cast<double>(n);
        }
        run.trace.reg_dip_bound.push_back(dip_bound);
        // Guarded component masses can leave the weights slightly off 1.
        double wsum = 0.0;
        for (double w : state.weights) wsum += w;
        for (double& w : state.weights) w /= wsum;
    }

    run.model = assemble(state);
    run.final_loglik = mean_loglik(run.model, std::span<const PairFeature>(xs.data(), xs.size()));
    return run;
}

}  // namespace

GmmModel fit_em(std::span<const PairFeature> samples, const FitConfig& config, FitTrace* trace) {
    if (samples.empty()) throw NoSamplesError("fit_em needs at least one sample");
    if (config.k < 1 || config.max_iter < 1 || !(config.tol > 0.0) || config.reg_covar < 0.0 ||
        config.n_init < 1) {
        throw ValidationError("invalid mixture fit configuration");
    }
    for (const auto& x : samples) check_finite_vector(x, "fit_em sample");

    // Fit the multiset: a canonical sample order makes the result invariant
    // under permutation of the input.
    std::vector<Eigen::Vector4d> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end(), [](const Eigen::Vector4d& a, const Eigen::Vector4d& b) {
        for (int i = 0; i < 4; ++i) {
            if (a[i] != b[i]) return a[i] < b[i];
        }
        return false;
    });

    size_t effective_k = std::min<size_t>(static_cast<size_t>(config.k),
                                          std::max<size_t>(1, xs.size() / 5));

    SeededRng base(config.seed);
    EmRun best;
    bool have_best = false;
    for (int init = 0; init < config.n_init; ++init) {
        EmRun run = run_em(xs, effective_k, config, base.fork(static_cast<uint64_t>(init)));
        if (!have_best || run.final_loglik > best.final_loglik) {
            best = std::move(run);
            have_best = true;
        }
    }
    if (trace != nullptr) *trace = std::move(best.trace);
    return std::move(best.model);
}

}  // namespace ctxinsert
