// Gaussian/mixture evaluation and the EM fitter.
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "ctxinsert/errors.hpp"
#include "ctxinsert/gmm.hpp"
#include "ctxinsert/rng.hpp"
#include "oracles.hpp"

using namespace ctxinsert;

namespace {

GmmModel standard_normal() {
    GmmModel gmm;
    gmm.weights = {1.0};
    gmm.components.emplace_back(Eigen::Vector4d::Zero(), Eigen::Matrix4d::Identity());
    return gmm;
}

std::vector<PairFeature> gaussian_cloud(SeededRng& rng, const Eigen::Vector4d& mean, double sd,
                                        size_t n) {
    std::vector<PairFeature> samples;
    for (size_t i = 0; i < n; ++i) {
        PairFeature x;
        for (int d = 0; d < 4; ++d) x[d] = mean[d] + sd * rng.normal();
        samples.push_back(x);
    }
    return samples;
}

}  // namespace

TEST_CASE("gaussian log density at the mean of a standard normal") {
    GmmModel gmm = standard_normal();
    double expected = -2.0 * std::log(2.0 * std::numbers::pi);
    CHECK(log_density(gmm, Eigen::Vector4d::Zero()) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(expected == doctest::Approx(-3.6757541).epsilon(1e-7));

    // Far tails stay finite.
    CHECK(std::isfinite(log_density(gmm, Eigen::Vector4d(50.0, -50.0, 30.0, -10.0))));
}

TEST_CASE("gaussian construction validates symmetry and positive definiteness") {
    Eigen::Matrix4d asym = Eigen::Matrix4d::Identity();
    asym(0, 1) = 0.5;  // mirror entry left at 0
    CHECK_THROWS_AS(Gaussian(Eigen::Vector4d::Zero(), asym), ValidationError);

    Eigen::Matrix4d indefinite = -Eigen::Matrix4d::Identity();
    CHECK_THROWS_AS(Gaussian(Eigen::Vector4d::Zero(), indefinite), ValidationError);

    Eigen::Vector4d nan_mean = Eigen::Vector4d::Zero();
    nan_mean[2] = std::nan("");
    CHECK_THROWS_AS(Gaussian(nan_mean, Eigen::Matrix4d::Identity()), ValidationError);
}

TEST_CASE("two identical components collapse to one") {
    GmmModel one = standard_normal();
    GmmModel two;
    two.weights = {0.5, 0.5};
    two.components.emplace_back(Eigen::Vector4d::Zero(), Eigen::Matrix4d::Identity());
    two.components.emplace_back(Eigen::Vector4d::Zero(), Eigen::Matrix4d::Identity());

    SeededRng rng(3);
    for (int i = 0; i < 20; ++i) {
        Eigen::Vector4d x(rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0),
                          rng.uniform(-3.0, 3.0));
        CHECK(log_density(two, x) == doctest::Approx(log_density(one, x)).epsilon(1e-12));
    }
}

TEST_CASE("log_density agrees with the direct-formula oracle") {
    SeededRng rng(17);
    GmmModel gmm = oracle::random_gmm(rng, 3);
    for (int i = 0; i < 100; ++i) {
        Eigen::Vector4d x(rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5), rng.uniform(0.1, 2.5),
                          rng.uniform(0.1, 2.5));
        double direct = oracle::gmm_density(gmm, x);
        CHECK(std::exp(log_density(gmm, x)) == doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("validate_gmm rejects malformed mixtures") {
    GmmModel gmm = standard_normal();
    CHECK_NOTHROW(validate_gmm(gmm));

    GmmModel bad_sum = gmm;
    bad_sum.weights = {0.7};
    CHECK_THROWS_AS(validate_gmm(bad_sum), ValidationError);

    GmmModel bad_weight = gmm;
    bad_weight.weights = {0.0};
    CHECK_THROWS_AS(validate_gmm(bad_weight), ValidationError);

    GmmModel mismatch = gmm;
    mismatch.weights = {0.5, 0.5};
    CHECK_THROWS_AS(validate_gmm(mismatch), ValidationError);

    GmmModel empty;
    CHECK_THROWS_AS(validate_gmm(empty), ValidationError);
}

TEST_CASE("fit_em closed form for a single component") {
    SeededRng rng(5);
    auto samples = gaussian_cloud(rng, {0.7, -0.2, 1.1, 0.9}, 0.3, 40);

    FitConfig config;
    config.k = 1;
    config.seed = 9;
    GmmModel fitted = fit_em(samples, config);
    REQUIRE(fitted.k() == 1);
    CHECK(fitted.weights[0] == 1.0);

    Eigen::Vector4d mean = Eigen::Vector4d::Zero();
    for (const auto& s : samples) mean += s;
    mean /= static_cast<double>(samples.size());
    Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
    for (const auto& s : samples) cov += (s - mean) * (s - mean).transpose();
    cov /= static_cast<double>(samples.size());
    cov += config.reg_covar * Eigen::Matrix4d::Identity();

    for (int d = 0; d < 4; ++d) {
        CHECK(fitted.components[0].mean()[d] == doctest::Approx(mean[d]).epsilon(1e-12));
    }
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            CHECK(fitted.components[0].covariance()(r, c) ==
                  doctest::Approx(cov(r, c)).epsilon(1e-12));
        }
    }
}

TEST_CASE("fit_em input validation and K reduction") {
    CHECK_THROWS_AS(fit_em({}, FitConfig{}), NoSamplesError);

    SeededRng rng(6);
    auto samples = gaussian_cloud(rng, Eigen::Vector4d::Zero(), 0.5, 3);
    FitConfig config;  // k = 4
    GmmModel fitted = fit_em(samples, config);
    CHECK(fitted.k() == 1);  // max(1, floor(3/5)) = 1

    auto ten = gaussian_cloud(rng, Eigen::Vector4d::Zero(), 0.5, 10);
    CHECK(fit_em(ten, config).k() == 2);  // min(4, floor(10/5))

    FitConfig bad = config;
    bad.k = 0;
    CHECK_THROWS_AS(fit_em(ten, bad), ValidationError);
    bad = config;
    bad.tol = 0.0;
    CHECK_THROWS_AS(fit_em(ten, bad), ValidationError);
}

TEST_CASE("fit_em is deterministic and permutation invariant") {
    SeededRng rng(12);
    auto samples = gaussian_cloud(rng, {1.0, 1.0, 1.0, 1.0}, 0.6, 60);
    FitConfig config;
    config.k = 3;
    config.seed = 77;

    GmmModel a = fit_em(samples, config);
    GmmModel b = fit_em(samples, config);
    auto identical = [](const GmmModel& x, const GmmModel& y) {
        REQUIRE(x.k() == y.k());
        for (size_t k = 0; k < x.k(); ++k) {
            CHECK(x.weights[k] == y.weights[k]);
            CHECK((x.components[k].mean().array() == y.components[k].mean().array()).all());
            CHECK((x.components[k].covariance().array() == y.components[k].covariance().array())
                      .all());
        }
    };
    identical(a, b);

    std::vector<PairFeature> shuffled = samples;
    std::mt19937 urbg(4);
    std::shuffle(shuffled.begin(), shuffled.end(), urbg);
    identical(a, fit_em(shuffled, config));
}

TEST_CASE("fit traces are monotone and mean_loglik matches its definition") {
    SeededRng rng(21);
    for (uint64_t trial = 0; trial < 5; ++trial) {
        auto samples = gaussian_cloud(rng, {0.0, 0.0, 1.0, 1.0}, 0.8, 80);
        for (auto& s : samples) {
            if (rng.uniform() < 0.4) s += Eigen::Vector4d(2.0, 2.0, 0.5, 0.5);
        }
        FitConfig config;
        config.seed = trial;
        FitTrace trace;
        GmmModel fitted = fit_em(samples, config, &trace);
        REQUIRE(!trace.mean_loglik.empty());
        REQUIRE(trace.reg_dip_bound.size() >= trace.mean_loglik.size() - 1);
        for (size_t i = 1; i < trace.mean_loglik.size(); ++i) {
            // Monotone except for the covariance floor's provable allowance.
            CHECK(trace.mean_loglik[i] >=
                  trace.mean_loglik[i - 1] - 1e-9 - trace.reg_dip_bound[i - 1]);
        }

        double total = 0.0;
        for (const auto& s : samples) total += log_density(fitted, s);
        CHECK(mean_loglik(fitted, samples) ==
              doctest::Approx(total / static_cast<double>(samples.size())).epsilon(1e-12));

        double sum = 0.0;
        for (double w : fitted.weights) sum += w;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    GmmModel gmm = standard_normal();
    std::vector<PairFeature> at_mean = {Eigen::Vector4d::Zero()};
    CHECK(mean_loglik(gmm, at_mean) == doctest::Approx(-3.6757541).epsilon(1e-7));
    std::vector<PairFeature> doubled = {Eigen::Vector4d::Zero(), Eigen::Vector4d::Zero()};
    CHECK(mean_loglik(gmm, doubled) == mean_loglik(gmm, at_mean));
    CHECK_THROWS_AS(mean_loglik(gmm, {}), NoSamplesError);
}

TEST_CASE("fit_em recovers a planted two-component mixture") {
    SeededRng rng(2024);
    Eigen::Vector4d mean_a(0.0, 0.0, 1.0, 1.0);
    Eigen::Vector4d mean_b(3.0, 3.0, 2.0, 2.0);
    std::vector<PairFeature> samples;
    for (int i = 0; i < 5000; ++i) {
        const Eigen::Vector4d& mean = rng.uniform() < 0.5 ? mean_a : mean_b;
        PairFeature x;
        for (int d = 0; d < 4; ++d) x[d] = mean[d] + rng.normal();
        samples.push_back(x);
    }

    FitConfig config;
    config.k = 2;
    config.seed = 31;
    GmmModel fitted = fit_em(samples, config);
    REQUIRE(fitted.k() == 2);

    // Match fitted components to planted means by nearest mean.
    for (const Eigen::Vector4d& target : {mean_a, mean_b}) {
        double best = 1e9;
        size_t arg = 0;
        for (size_t k = 0; k < 2; ++k) {
            double d = (fitted.components[k].mean() - target).norm();
            if (d < best) {
                best = d;
                arg = k;
            }
        }
        for (int d = 0; d < 4; ++d) {
            CHECK(std::abs(fitted.components[arg].mean()[d] - target[d]) < 0.1);
        }
    }
}
