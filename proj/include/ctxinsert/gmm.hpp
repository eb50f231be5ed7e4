#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "ctxinsert/geometry.hpp"

namespace ctxinsert {

// One full-covariance 4-D Gaussian. The Cholesky factor and log-normalizer
// are cached at construction so density evaluation never refactorizes.
class Gaussian {
public:
    Gaussian(const Eigen::Vector4d& mean, const Eigen::Matrix4d& covariance);

    const Eigen::Vector4d& mean() const { return mean_; }
    const Eigen::Matrix4d& covariance() const { return covariance_; }
    // Lower-triangular L with L·Lᵀ = covariance.
    const Eigen::Matrix4d& chol_lower() const { return chol_lower_; }
    // -(d/2)·log(2π) - Σ log L_ii
    double log_norm() const { return log_norm_; }

    double log_density(const Eigen::Vector4d& x) const;

private:
    Eigen::Vector4d mean_;
    Eigen::Matrix4d covariance_;
    Eigen::Matrix4d chol_lower_;
    double log_norm_ = 0.0;
};

struct GmmModel {
    std::vector<double> weights;
    std::vector<Gaussian> components;

    size_t k() const { return components.size(); }
};

// Throws ValidationError when weights are outside (0,1], do not sum to 1
// within 1e-9, or the component count mismatches.
void validate_gmm(const GmmModel& model);

struct FitConfig {
    int k = 4;
    int max_iter = 100;
    // Stop when the mean per-sample log-likelihood improves by less than this.
    double tol = 1e-3;
    // Added to every covariance diagonal to keep factorizations positive definite.
    double reg_covar = 1e-6;
    uint64_t seed = 0;
    int n_init = 1;
};

struct FitTrace {
    // Mean log-likelihood recorded at every E-step, in iteration order.
    std::vector<double> mean_loglik;
    // Upper bound on the log-likelihood drop the covariance floor can cause
    // per M-step: max_k ½·(logdet(Σ_k+εI) − logdet Σ_k). EM guarantees
    // mean_loglik[i+1] ≥ mean_loglik[i] − reg_dip_bound[i] up to rounding;
    // without the floor the sequence would be non-decreasing outright.
    std::vector<double> reg_dip_bound;
};

// Fits a mixture with effective K = min(config.k, max(1, n/5)) by EM:
// k-means++-style seeded initialization, log-sum-exp E-step, M-step with
// reg_covar added to covariance diagonals. Samples are fitted as a multiset
// (sorted internally), so permuting them cannot change the result.
GmmModel fit_em(std::span<const PairFeature> samples, const FitConfig& config,
                FitTrace* trace = nullptr);

// log Σ_k a_k·N(x|m_k,M_k) via log-sum-exp over component log densities.
double log_density(const GmmModel& model, const Eigen::Vector4d& x);

double mean_loglik(const GmmModel& model, std::span<const PairFeature> samples);

}  // namespace ctxinsert
