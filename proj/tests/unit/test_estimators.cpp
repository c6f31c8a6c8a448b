#include <doctest.h>

#include "dustat/crossfit.hpp"
#include "dustat/error.hpp"
#include "dustat/estimators.hpp"
#include "dustat/rng.hpp"
#include "dustat/simulate.hpp"
#include "dustat/ustat.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace dustat;

namespace {

std::vector<ColumnMeta> columns(std::size_t p) {
    std::vector<ColumnMeta> out;
    for (std::size_t k = 0; k < p; ++k) {
        out.push_back(ColumnMeta::continuous_column("x" + std::to_string(k + 1)));
    }
    return out;
}

oracle::Vec to_vec(const Eigen::VectorXd& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

// Positive outcome with a smooth dependence on two of three covariates.
Dataset lognormal_data(std::size_t n, std::uint64_t seed, double noise = 0.3) {
    Rng rng(seed);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        for (Eigen::Index k = 0; k < 3; ++k) {
            x(i, k) = rng.normal();
        }
        y[i] = std::exp(0.4 * x(i, 0) + 0.2 * x(i, 1) + noise * rng.normal());
    }
    return Dataset(y, x, columns(3));
}

std::vector<Eigen::VectorXd> random_block_values(const PairBlocks& blocks, std::size_t n, Rng& rng) {
    std::vector<Eigen::VectorXd> out;
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        for (auto& e : v) {
            e = rng.normal();
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace

TEST_CASE("classic Gini hand examples") {
    CHECK(gini_classic(Eigen::Vector3d(1, 2, 3)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(gini_classic(Eigen::Vector3d(4, 4, 4)) == 0.0);
    CHECK(gini_classic(Eigen::Vector2d(0, 1)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(gini_classic(Eigen::Vector2d(-1, -1)), DomainError);
    CHECK_THROWS_AS(gini_classic(Eigen::VectorXd::Ones(1)), DomainError);
}

TEST_CASE("classic Gini matches the pairwise oracle") {
    Rng rng(8);
    for (int rep = 0; rep < 10; ++rep) {
        Eigen::VectorXd y(57 + rep);
        for (auto& v : y) {
            v = std::exp(rng.normal());
        }
        CHECK(rel(gini_classic(y), oracle::gini(to_vec(y))) <= 1e-12);
    }
}

TEST_CASE("blockwise Gini with reversed fitted values is -1/3") {
    const PairBlocks blocks = make_pair_blocks(make_folds(3, 3, 1));
    const Eigen::Vector3d y(1, 2, 3);
    const std::vector<Eigen::VectorXd> gamma(blocks.size(), Eigen::Vector3d(3, 2, 1));
    CHECK(iop_gini_blockwise(y, blocks, gamma, Method::debiased_np) ==
          doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
    CHECK(iop_gini_blockwise(y, blocks, gamma, Method::debiased_general,
                             AlphaModel::Form::pairwise_sign) ==
          doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(iop_gini_blockwise(y, blocks, gamma, Method::plugin), UsageError);
    CHECK_THROWS_AS(iop_gini_blockwise(y, blocks, {gamma[0]}, Method::debiased_np), UsageError);
}

TEST_CASE("blockwise sum with one shared model equals the brute-force double sum") {
    Rng rng(21);
    const std::size_t n = 41;
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    Eigen::VectorXd g(static_cast<Eigen::Index>(n));
    Eigen::VectorXd a(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y[i] = std::exp(rng.normal());
        g[i] = y[i] + 0.5 * rng.normal();
        a[i] = rng.normal();
    }
    const auto Y = to_vec(y);
    const auto G = to_vec(g);
    const auto A = to_vec(a);
    const double den = oracle::pair_sum(n, [&](std::size_t i, std::size_t j) { return Y[i] + Y[j]; });
    for (int K : {3, 4, 5}) {
        CAPTURE(K);
        const PairBlocks blocks = make_pair_blocks(make_folds(n, K, 5));
        const std::vector<Eigen::VectorXd> shared(blocks.size(), g);
        const std::vector<Eigen::VectorXd> shared_a(blocks.size(), a);

        const double np = oracle::pair_sum(n, [&](std::size_t i, std::size_t j) {
            return oracle::sign(G[i] - G[j]) * (Y[i] - Y[j]);
        });
        CHECK(rel(iop_gini_blockwise(y, blocks, shared, Method::debiased_np), np / den) <= 1e-12);

        const double zero = oracle::pair_sum(n, [&](std::size_t i, std::size_t j) {
            return std::abs(G[i] - G[j]);
        });
        CHECK(rel(iop_gini_blockwise(y, blocks, shared, Method::debiased_general,
                                     AlphaModel::Form::zero),
                  zero / den) <= 1e-12);

        const double additive = oracle::pair_sum(n, [&](std::size_t i, std::size_t j) {
            return std::abs(G[i] - G[j]) + (A[i] - A[j]) * (Y[i] - Y[j] - G[i] + G[j]);
        });
        CHECK(rel(iop_gini_blockwise(y, blocks, shared, Method::debiased_general,
                                     AlphaModel::Form::additive, shared_a),
                  additive / den) <= 1e-12);
    }
}

TEST_CASE("general form with the pairwise sign alpha equals the joint-nonparametric form") {
    Rng rng(22);
    const std::size_t n = 60;
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (auto& v : y) {
        v = std::exp(rng.normal());
    }
    const PairBlocks blocks = make_pair_blocks(make_folds(n, 4, 9));
    const auto gamma = random_block_values(blocks, n, rng);
    const double np = iop_gini_blockwise(y, blocks, gamma, Method::debiased_np);
    const double general = iop_gini_blockwise(y, blocks, gamma, Method::debiased_general,
                                              AlphaModel::Form::pairwise_sign);
    CHECK(rel(general, np) <= 1e-12);

    const Dataset data = lognormal_data(200, 3);
    const FoldPartition folds = make_folds(200, 3, 4);
    const EstimateResult a = iop_gini_debiased_np(data, LearnerSpec::ridge(1.0), folds);
    const EstimateResult b = iop_gini_debiased_general(data, LearnerSpec::ridge(1.0),
                                                       AlphaModel::Form::pairwise_sign, folds);
    CHECK(rel(b.theta, a.theta) <= 1e-12);
    CHECK(rel(b.se, a.se) <= 1e-12);
    CHECK(b.alpha_learner == "pairwise_sign");
    CHECK_THROWS_AS(iop_gini_debiased_general(data, LearnerSpec::ridge(1.0),
                                              AlphaModel::Form::additive, folds),
                    ConfigError);
}

TEST_CASE("order-preserving fitted values reproduce the classic Gini") {
    Rng rng(31);
    const Eigen::Index n = 90;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        y[i] = std::exp(x(i, 0));
    }
    const Dataset data(y, x, columns(1));
    for (int K : {3, 5}) {
        const EstimateResult r = iop_gini_debiased_np(data, LearnerSpec::ridge(1e-3), make_folds(90, K, 2));
        CHECK(rel(r.theta, gini_classic(y)) <= 1e-12);
        CHECK(r.method == Method::debiased_np);
        CHECK(r.folds == K);
        CHECK(r.diagnostics.tie_fraction == 0.0);
        CHECK_FALSE(r.diagnostics.negative_iop);
        CHECK(r.ci_low <= r.theta);
        CHECK(r.theta <= r.ci_high);
    }
}

TEST_CASE("plug-in with an exact fit is the classic Gini of the outcome") {
    Rng rng(32);
    const Eigen::Index n = 50;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y[i] = std::exp(rng.normal());
        x(i, 0) = 3.0 * y[i] - 1.0;
    }
    const EstimateResult r = iop_gini_plugin(Dataset(y, x, columns(1)), LearnerSpec::ridge(0.0));
    CHECK(rel(r.theta, gini_classic(y)) <= 1e-10);
    CHECK(r.method == Method::plugin);
    CHECK(r.diagnostics.se_invalid);
    CHECK(r.se >= 0.0);
    REQUIRE(r.diagnostics.first_stage_rmse.has_value());
    CHECK(*r.diagnostics.first_stage_rmse <= 1e-10);
}

TEST_CASE("constant fitted values give zero with a degenerate flag") {
    const Dataset data = lognormal_data(120, 5);
    const FoldPartition folds = make_folds(120, 3, 1);
    const EstimateResult np = iop_gini_debiased_np(data, LearnerSpec::fixed(2.0), folds);
    CHECK(np.theta == 0.0);
    CHECK(np.se == 0.0);
    CHECK(np.diagnostics.degenerate);
    CHECK(np.diagnostics.tie_fraction == 1.0);
    const EstimateResult plug = iop_gini_plugin(data, LearnerSpec::fixed(2.0));
    CHECK(plug.theta == 0.0);

    const FittedModel constant = fit(LearnerSpec::fixed(2.0), data.x(), data.y());
    const VarianceParts v = iop_gini_se(data, constant, AlphaModel::pairwise_sign(), 0.0);
    CHECK(v.se == 0.0);
    CHECK(v.degenerate);
    CHECK(v.b == doctest::Approx(2.0 * data.y().mean()));
}

TEST_CASE("negative debiased estimates are reported with a flag") {
    bool found = false;
    for (std::uint64_t seed = 1; seed < 60 && !found; ++seed) {
        Rng rng(seed);
        Eigen::MatrixXd x(12, 1);
        Eigen::VectorXd y(12);
        for (Eigen::Index i = 0; i < 12; ++i) {
            x(i, 0) = rng.normal();
            y[i] = std::exp(rng.normal());
        }
        const EstimateResult r =
            iop_gini_debiased_np(Dataset(y, x, columns(1)), LearnerSpec::ridge(0.0), make_folds(12, 3, seed));
        if (r.theta < 0.0) {
            found = true;
            CHECK(r.diagnostics.negative_iop);
            bool warned = false;
            for (const auto& w : r.diagnostics.warnings) {
                warned = warned || w.find("negative") != std::string::npos;
            }
            CHECK(warned);
        } else {
            CHECK_FALSE(r.diagnostics.negative_iop);
        }
    }
    CHECK(found);
}

TEST_CASE("debiased Gini is invariant to rescaling the outcome") {
    const Dataset data = lognormal_data(150, 7);
    const FoldPartition folds = make_folds(150, 3, 3);
    const EstimateResult base = iop_gini_debiased_np(data, LearnerSpec::ridge(1.0), folds);
    for (double c : {0.01, 7.5, 1e4}) {
        CAPTURE(c);
        const EstimateResult scaled =
            iop_gini_debiased_np(data.with_outcome(c * data.y()), LearnerSpec::ridge(1.0), folds);
        CHECK(rel(scaled.theta, base.theta) <= 1e-12);
        CHECK(rel(scaled.se, base.se) <= 1e-10);
        CHECK(rel(scaled.ci_low, base.ci_low) <= 1e-10);
        CHECK(rel(scaled.ci_high, base.ci_high) <= 1e-10);

        const EstimateResult v0 = varfv_debiased(data, LearnerSpec::ridge(1.0), folds);
        const EstimateResult v1 = varfv_debiased(data.with_outcome(c * data.y()), LearnerSpec::ridge(1.0), folds);
        CHECK(rel(v1.theta, c * c * v0.theta) <= 1e-10);
    }
}

TEST_CASE("additive and pairwise corrections agree within two standard errors") {
    const Dataset data = lognormal_data(600, 11);
    const FoldPartition folds = make_folds(600, 3, 2);
    const EstimateResult np = iop_gini_debiased_np(data, LearnerSpec::ridge_cv(), folds);
    const EstimateResult add =
        iop_gini_debiased_general(data, LearnerSpec::ridge_cv(), LearnerSpec::ridge_cv(), folds);
    CHECK(add.method == Method::debiased_general);
    CHECK(std::abs(add.theta - np.theta) <= 2.0 * np.se);
    CHECK(add.se > 0.0);
}

TEST_CASE("sign alpha targets are leave-one-out sign means") {
    const Eigen::VectorXd g = (Eigen::VectorXd(5) << 1.0, 3.0, 3.0, -2.0, 0.5).finished();
    const Eigen::VectorXd t = sign_alpha_targets(g);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < g.size(); ++j) {
            if (j != i) {
                s += oracle::sign(g[i] - g[j]);
            }
        }
        CHECK(t[i] == doctest::Approx(s / 4.0).epsilon(1e-15));
    }
}

TEST_CASE("variance of fitted values: plug-in examples") {
    const Eigen::MatrixXd x = (Eigen::MatrixXd(2, 1) << 1.0, 3.0).finished();
    const EstimateResult pair = varfv_plugin(Dataset(Eigen::Vector2d(1, 3), x, columns(1)), LearnerSpec::ridge(0.0));
    CHECK(pair.theta == doctest::Approx(2.0).epsilon(1e-10));

    const Dataset data = lognormal_data(80, 12);
    CHECK(varfv_plugin(data, LearnerSpec::fixed(1.0)).theta == 0.0);
    const EstimateResult r = varfv_plugin(data, LearnerSpec::ridge(0.5));
    const Eigen::VectorXd g = predict(fit(LearnerSpec::ridge(0.5), data.x(), data.y()), data.x());
    CHECK(rel(r.theta, oracle::sample_variance(to_vec(g))) <= 1e-12);
    const auto G = to_vec(g);
    CHECK(rel(r.theta, oracle::pair_mean(80, [&](std::size_t i, std::size_t j) {
                  return 0.5 * (G[i] - G[j]) * (G[i] - G[j]);
              })) <= 1e-12);
    CHECK(r.diagnostics.se_invalid);
}

TEST_CASE("debiased variance of fitted values equals the plug-in for an interpolator") {
    Rng rng(13);
    const Eigen::Index n = 45;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        y[i] = 2.0 * x(i, 0) + 1.0;
    }
    const Dataset data(y, x, columns(1));
    const EstimateResult deb = varfv_debiased(data, LearnerSpec::ridge(0.0), make_folds(45, 3, 1));
    const EstimateResult plug = varfv_plugin(data, LearnerSpec::ridge(0.0));
    CHECK(rel(deb.theta, plug.theta) <= 1e-10);
    CHECK(rel(deb.theta, oracle::sample_variance(to_vec(y))) <= 1e-10);

    const EstimateResult flat = varfv_debiased(data, LearnerSpec::fixed(0.0), make_folds(45, 3, 1));
    CHECK(flat.theta == 0.0);
    CHECK(flat.diagnostics.degenerate);
}

TEST_CASE("ranking risk examples") {
    Rng rng(14);
    const Eigen::Index n = 60;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
        x(i, 0) = y[i];
    }
    const FoldPartition folds = make_folds(60, 3, 2);
    const EstimateResult perfect = ranking_risk_debiased(Dataset(y, x, columns(1)), LearnerSpec::ridge(0.0), folds);
    CHECK(perfect.theta == 0.0);

    const EstimateResult same = ranking_risk_debiased(
        Dataset(Eigen::VectorXd::Ones(n), x, columns(1)), LearnerSpec::ridge(1.0), folds);
    CHECK(same.theta == 0.0);

    Eigen::VectorXd bad = y;
    bad[3] = 0.5;
    CHECK_THROWS_AS(ranking_risk_debiased(Dataset(bad, x, columns(1)), LearnerSpec::ridge(1.0), folds),
                    DomainError);
}

TEST_CASE("ranking risk matches a brute-force pair sum with a shared model") {
    const Dataset data = gen_constant_label(40, 0.3, 5);
    const FoldPartition folds = make_folds(40, 4, 6);
    const EstimateResult r = ranking_risk_debiased(data, LearnerSpec::fixed(0.3), folds);
    const auto Y = to_vec(data.y());
    const double ref = oracle::pair_sum(40, [&](std::size_t i, std::size_t j) {
                           return (Y[i] - Y[j]) * (Y[i] - Y[j]);
                       }) /
                       (40.0 * 39.0);
    CHECK(rel(r.theta, ref) <= 1e-12);
}

TEST_CASE("ranking risk under a constant probability is close to p(1-p)") {
    double sum = 0.0;
    double sum2 = 0.0;
    const int reps = 60;
    for (int rep = 0; rep < reps; ++rep) {
        const Dataset data = gen_constant_label(400, 0.3, 500 + static_cast<std::uint64_t>(rep));
        const double t = ranking_risk_debiased(data, LearnerSpec::ridge(1.0), make_folds(400, 3, 1)).theta;
        sum += t;
        sum2 += t * t;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
    CHECK(std::abs(mean - 0.21) <= 3.0 * se);
}

TEST_CASE("treatment contrast on six rows equals the brute-force pair sum") {
    const Eigen::VectorXd y = (Eigen::VectorXd(6) << 1.0, 2.5, -0.5, 4.0, 3.0, 0.0).finished();
    const Eigen::VectorXd d = (Eigen::VectorXd(6) << 1, 0, 0, 1, 1, 0).finished();
    const Eigen::MatrixXd x = (Eigen::MatrixXd(6, 1) << 0.1, -0.3, 0.8, 1.2, -1.0, 0.4).finished();
    const Dataset data(y, x, columns(1), d);
    const oracle::Vec G(6, 0.5);
    const oracle::Vec A(6, 0.3);
    const FoldPartition folds = make_folds(6, 3, 1);
    using H = std::function<double(double, double)>;
    const std::vector<std::pair<Contrast, H>> contrasts = {
        {Contrast::difference, [](double a, double b) { return a - b; }},
        {Contrast::indicator_ge, [](double a, double b) { return a >= b ? 1.0 : 0.0; }}};
    for (const auto& [h, fn] : contrasts) {
        CAPTURE(to_string(h));
        const double ref = oracle::pair_mean(6, [&](std::size_t i, std::size_t j) {
            return oracle::te_psi(fn, to_vec(y), to_vec(d), G, A, i, j);
        });
        const EstimateResult r =
            contrast_te_debiased(data, h, LearnerSpec::fixed(0.5), LearnerSpec::fixed(0.3), folds);
        CHECK(rel(r.theta, ref) <= 1e-12);
        CHECK(r.estimand == "ate");
        CHECK(rel(te_moment_sum(data, h, Eigen::VectorXd::Constant(6, 0.5), Eigen::VectorXd::Constant(6, 0.3)),
                  ref * 15.0) <= 1e-12);
    }
}

TEST_CASE("treatment alpha targets match the numerical derivative") {
    Rng rng(15);
    const Eigen::Index n = 31;
    Eigen::VectorXd y(n);
    Eigen::VectorXd d(n);
    Eigen::VectorXd g(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y[i] = std::round(4.0 * rng.normal()) / 2.0;  // ties exercise the indicator branch
        d[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
        g[i] = 0.2 + 0.6 * rng.uniform();
    }
    using H = std::function<double(double, double)>;
    const std::vector<std::pair<Contrast, H>> contrasts = {
        {Contrast::difference, [](double a, double b) { return a - b; }},
        {Contrast::indicator_ge, [](double a, double b) { return a >= b ? 1.0 : 0.0; }}};
    for (const auto& [h, fn] : contrasts) {
        CAPTURE(to_string(h));
        const Eigen::VectorXd fast = te_alpha_targets(y, d, g, h);
        const oracle::Vec slow = oracle::te_alpha_numeric(fn, to_vec(y), to_vec(d), to_vec(g));
        for (Eigen::Index i = 0; i < n; ++i) {
            CHECK(std::abs(fast[i] - slow[static_cast<std::size_t>(i)]) <=
                  1e-6 * std::max(1.0, std::abs(fast[i])));
        }
    }
}

TEST_CASE("treatment contrast agrees with the inverse-probability estimator") {
    const Dataset data = gen_randomized_treatment(1500, 0.5, 1.0, 77);
    const EstimateResult r = contrast_te_debiased(data, Contrast::difference, LearnerSpec::fixed(0.5),
                                                  LearnerSpec::ridge(1.0), make_folds(1500, 3, 1));
    const Eigen::VectorXd half = Eigen::VectorXd::Constant(1500, 0.5);
    const double ipw = aipw_ate(data, half);
    Eigen::VectorXd terms(1500);
    for (Eigen::Index i = 0; i < terms.size(); ++i) {
        terms[i] = 2.0 * data.d()[i] * data.y()[i] - 2.0 * (1.0 - data.d()[i]) * data.y()[i];
    }
    const double ipw_se = std::sqrt(oracle::sample_variance(to_vec(terms)) / 1500.0);
    CHECK(std::abs(r.theta - ipw) <= 2.0 * std::hypot(r.se, ipw_se));
    CHECK(std::abs(r.theta - 1.0) <= 3.0 * r.se);
}

TEST_CASE("treatment contrast needs both arms") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(6, 1);
    const Dataset treated(Eigen::VectorXd::LinSpaced(6, 1, 6), x, columns(1), Eigen::VectorXd::Ones(6));
    CHECK_THROWS_AS(contrast_te_debiased(treated, Contrast::difference, LearnerSpec::fixed(0.5),
                                         LearnerSpec::fixed(0.0), make_folds(6, 3, 1)),
                    DomainError);
    const Dataset control(Eigen::VectorXd::LinSpaced(6, 1, 6), x, columns(1), Eigen::VectorXd::Zero(6));
    CHECK_THROWS_AS(contrast_te_debiased(control, Contrast::indicator_ge, LearnerSpec::fixed(0.5),
                                         LearnerSpec::fixed(0.0), make_folds(6, 3, 1)),
                    DomainError);
}

TEST_CASE("indicator contrast is one half under identical margins") {
    double sum = 0.0;
    double sum2 = 0.0;
    const int reps = 60;
    for (int rep = 0; rep < reps; ++rep) {
        const Dataset data = gen_randomized_treatment(200, 1.0, 0.0, 900 + static_cast<std::uint64_t>(rep));
        const double t = contrast_te_debiased(data, Contrast::indicator_ge, LearnerSpec::fixed(0.5),
                                              LearnerSpec::ridge(1.0), make_folds(200, 3, 1))
                             .theta;
        sum += t;
        sum2 += t * t;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum2 / reps - mean * mean) / reps);
    CHECK(std::abs(mean - 0.5) <= 3.0 * se);
}

TEST_CASE("orthogonal moments are flat along first-step perturbations") {
    const LinearGaussianDraw draw = gen_linear_gaussian(600, 3);
    const Eigen::VectorXd g = predict(fit(LearnerSpec::ridge(0.0), draw.data.x(), draw.data.y()), draw.data.x());
    const std::vector<double> eps = {1e-2, 1e-3};

    const OrthogonalityReport v =
        orthogonality_check(Estimand::varfv, draw.data, g, g, draw.theta_true, eps);
    CHECK(v.max_ratio < 0.1);
    for (double s : v.g_slope) {
        CHECK(std::abs(s) > 0.1);
    }

    const Dataset shifted = draw.data.with_outcome(draw.data.y().array() + 10.0);
    const Eigen::VectorXd gs = g.array() + 10.0;
    const Eigen::VectorXd dir = draw.data.x().col(0).array().tanh();
    const OrthogonalityReport iop =
        orthogonality_check(Estimand::iop, shifted, gs, dir, gini_classic(gs), eps);
    CHECK(iop.max_ratio < 0.1);

    const OrthogonalityReport flat = orthogonality_check(
        Estimand::varfv, draw.data, g, Eigen::VectorXd::Ones(600), draw.theta_true, eps);
    for (std::size_t k = 0; k < eps.size(); ++k) {
        CHECK(std::abs(flat.g_slope[k]) <= 1e-9);
        CHECK(std::abs(flat.psi_slope[k]) <= 1e-9);
    }
    CHECK_THROWS_AS(orthogonality_check(Estimand::varfv, draw.data, g, g, 0.0, {0.0}), ConfigError);
}

TEST_CASE("correction term has mean zero at a well-estimated first step") {
    // One draw split into a large training part and a 2000-row evaluation part.
    const LinearGaussianDraw draw = gen_linear_gaussian(52000, 40);
    const Eigen::MatrixXd& x = draw.data.x();
    const Eigen::VectorXd& y = draw.data.y();
    const FittedModel model = fit(LearnerSpec::ridge(0.0), x.topRows(50000), y.head(50000));
    const Eigen::VectorXd g = predict(model, x.bottomRows(2000));
    const Eigen::VectorXd ye = y.tail(2000);
    const double* gp = g.data();
    const double* yp = ye.data();
    auto check_zero = [&](auto&& phi) {
        const double mean = u_mean(phi, 2000);
        const Eigen::VectorXd s = loo_means(
            [&](std::size_t i, std::size_t j) { return phi(i, j) - mean; }, 2000);
        const double se = std::sqrt(sigma_hat(s) / 2000.0);
        CHECK(std::abs(mean) <= 3.0 * se);
    };
    check_zero([&](std::size_t i, std::size_t j) {
        const double dg = gp[i] - gp[j];
        return dg * (yp[i] - yp[j] - dg);
    });
    check_zero([&](std::size_t i, std::size_t j) {
        const double dg = gp[i] - gp[j];
        return oracle::sign(dg) * (yp[i] - yp[j] - dg);
    });
}

TEST_CASE("the theory-penalized lasso flags degeneracy under a constant mean") {
    int flagged = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Dataset data = gen_constant_mean(500, 0.1, 3000 + seed);
        flagged += varfv_debiased(data, LearnerSpec::lasso_theory(), make_folds(500, 5, seed))
                       .diagnostics.degenerate
                       ? 1
                       : 0;
    }
    CHECK(flagged >= 19);
}

TEST_CASE("options are validated") {
    const Dataset data = lognormal_data(30, 1);
    EstimateOptions bad;
    bad.level = 1.0;
    CHECK_THROWS_AS(iop_gini_plugin(data, LearnerSpec::ridge(1.0), bad), ConfigError);
    EstimateOptions cf;
    cf.crossfit_plugin = true;
    CHECK_THROWS_AS(iop_gini_plugin(data, LearnerSpec::ridge(1.0), cf), ConfigError);
    const FoldPartition folds = make_folds(30, 3, 1);
    const EstimateResult r = iop_gini_plugin(data, LearnerSpec::ridge(1.0), cf, &folds);
    CHECK(r.folds == 3);
    CHECK(method_from_string("debiased_general") == Method::debiased_general);
    CHECK_THROWS_AS(method_from_string("magic"), ConfigError);
    CHECK(normal_quantile(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-12));
}
