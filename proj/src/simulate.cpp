#include "dustat/simulate.hpp"

#include "dustat/crossfit.hpp"
#include "dustat/error.hpp"
#include "dustat/parallel.hpp"
#include "dustat/rng.hpp"
#include "dustat/ustat.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

namespace dustat {

std::string to_string(DgpKind kind) {
    switch (kind) {
        case DgpKind::linear_gaussian:
            return "linear";
        case DgpKind::saturated:
            return "saturated";
        case DgpKind::constant_mean:
            return "constant";
        case DgpKind::randomized_treatment:
            return "treatment";
        case DgpKind::constant_label:
            return "labels";
    }
    return "unknown";
}

DgpKind dgp_from_string(const std::string& name) {
    for (DgpKind k : {DgpKind::linear_gaussian, DgpKind::saturated, DgpKind::constant_mean,
                      DgpKind::randomized_treatment, DgpKind::constant_label}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw ConfigError("unknown DGP '" + name +
                      "' (expected linear, saturated, constant, treatment or labels)");
}

std::string to_string(McEstimator e) {
    switch (e) {
        case McEstimator::iop_plugin:
            return "iop_plugin";
        case McEstimator::iop_debiased:
            return "iop_debiased";
        case McEstimator::varfv_plugin:
            return "varfv_plugin";
        case McEstimator::varfv_debiased:
            return "varfv_debiased";
        case McEstimator::ranking_debiased:
            return "ranking_debiased";
        case McEstimator::ate_debiased:
            return "ate_debiased";
    }
    return "unknown";
}

McEstimator mc_estimator_from_string(const std::string& name) {
    for (McEstimator e : {McEstimator::iop_plugin, McEstimator::iop_debiased,
                          McEstimator::varfv_plugin, McEstimator::varfv_debiased,
                          McEstimator::ranking_debiased, McEstimator::ate_debiased}) {
        if (to_string(e) == name) {
            return e;
        }
    }
    throw ConfigError("unknown estimator '" + name + "'");
}

Eigen::Matrix3d linear_gaussian_cov() {
    Eigen::Matrix3d s;
    s << 1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0;
    return s;
}

namespace {

void check_n(std::size_t n) {
    if (n < 10) {
        throw ConfigError("simulated samples need n >= 10, got " + std::to_string(n));
    }
}

std::vector<ColumnMeta> continuous_columns(int p) {
    std::vector<ColumnMeta> cols;
    for (int j = 1; j <= p; ++j) {
        cols.push_back(ColumnMeta::continuous_column("x" + std::to_string(j)));
    }
    return cols;
}

Eigen::MatrixXd standard_normals(Rng& rng, std::size_t n, int p) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), p);
    for (std::size_t i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) {
            x(static_cast<Eigen::Index>(i), j) = rng.normal();
        }
    }
    return x;
}

}  // namespace

LinearGaussianDraw gen_linear_gaussian(std::size_t n, std::uint64_t seed) {
    check_n(n);
    Rng rng(seed);
    Eigen::Vector3d beta;
    for (int k = 0; k < 3; ++k) {
        beta[k] = rng.uniform(0.0, 2.0);
    }
    const Eigen::Matrix3d cov = linear_gaussian_cov();
    const Eigen::Matrix3d chol = cov.llt().matrixL();
    const double noise_sd = std::sqrt(0.1);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d xi = chol * z;
        x.row(static_cast<Eigen::Index>(i)) = xi.transpose();
        y[static_cast<Eigen::Index>(i)] = beta.dot(xi) + noise_sd * rng.normal();
    }
    return {Dataset(std::move(y), std::move(x), continuous_columns(3)), beta.dot(cov * beta), beta};
}

SaturatedCoefficients saturated_coefficients() {
    SaturatedCoefficients c;
    for (int m = 1; m <= 21; ++m) {
        c.beta.push_back(m % 2 == 1 ? 0.2 : -0.2);
    }
    for (int m = 1; m <= 490; ++m) {
        c.xi.push_back(1.0 / (2.0 * m * m));
    }
    return c;
}

double saturated_eta(const SaturatedCoefficients& coef, int a, int b, int c) {
    const int lv[3] = {a, b, c};
    double eta = coef.beta0;
    for (int k = 0; k < 3; ++k) {
        if (lv[k] > 0) {
            eta += coef.beta[static_cast<std::size_t>(7 * k + lv[k] - 1)];
        }
    }
    std::size_t m = 0;
    for (int k = 0; k < 3; ++k) {
        for (int kk = k + 1; kk < 3; ++kk) {
            for (int r = 1; r <= 7; ++r) {
                for (int s = 1; s <= 7; ++s, ++m) {
                    if (lv[k] == r && lv[kk] == s) {
                        eta += coef.xi[m];
                    }
                }
            }
        }
    }
    for (int r = 1; r <= 7; ++r) {
        for (int s = 1; s <= 7; ++s) {
            for (int t = 1; t <= 7; ++t, ++m) {
                if (a == r && b == s && c == t) {
                    eta += coef.xi[m];
                }
            }
        }
    }
    return eta;
}

Dataset gen_saturated(std::size_t n, double sigma, std::uint64_t seed) {
    check_n(n);
    if (!(sigma > 0.0)) {
        throw ConfigError("sigma must be positive");
    }
    const SaturatedCoefficients coef = saturated_coefficients();
    double eta[8][8][8];
    for (int a = 0; a < 8; ++a) {
        for (int b = 0; b < 8; ++b) {
            for (int c = 0; c < 8; ++c) {
                eta[a][b][c] = saturated_eta(coef, a, b, c);
            }
        }
    }
    Rng rng(seed);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        int lv[3];
        for (int k = 0; k < 3; ++k) {
            lv[k] = static_cast<int>(rng.below(8));
            x(static_cast<Eigen::Index>(i), k) = lv[k];
        }
        y[static_cast<Eigen::Index>(i)] = std::exp(eta[lv[0]][lv[1]][lv[2]] + sigma * rng.normal());
    }
    std::vector<ColumnMeta> cols;
    for (int k = 1; k <= 3; ++k) {
        cols.push_back(ColumnMeta::categorical_column("x" + std::to_string(k), 8));
    }
    return Dataset(std::move(y), std::move(x), std::move(cols));
}

double gini_of_cells(const SaturatedCoefficients& coef, double sigma) {
    if (!(sigma > 0.0)) {
        throw ConfigError("sigma must be positive");
    }
    std::vector<double> mu;
    mu.reserve(512);
    for (int a = 0; a < 8; ++a) {
        for (int b = 0; b < 8; ++b) {
            for (int c = 0; c < 8; ++c) {
                mu.push_back(std::exp(saturated_eta(coef, a, b, c) + 0.5 * sigma * sigma));
            }
        }
    }
    CompensatedSum diff;
    CompensatedSum total;
    for (double u : mu) {
        total.add(u);
        for (double v : mu) {
            diff.add(std::abs(u - v));
        }
    }
    return diff.value() / (2.0 * static_cast<double>(mu.size()) * total.value());
}

double true_gini_saturated(double sigma) { return gini_of_cells(saturated_coefficients(), sigma); }

Dataset gen_constant_mean(std::size_t n, double sigma, std::uint64_t seed) {
    check_n(n);
    Rng rng(seed);
    Eigen::MatrixXd x = standard_normals(rng, n, 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (auto& v : y) {
        v = 1.0 + sigma * rng.normal();
    }
    return Dataset(std::move(y), std::move(x), continuous_columns(3));
}

Dataset gen_randomized_treatment(std::size_t n, double sigma, double effect, std::uint64_t seed) {
    check_n(n);
    Rng rng(seed);
    Eigen::MatrixXd x = standard_normals(rng, n, 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    Eigen::VectorXd d(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        d[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        y[i] = 1.0 + x(i, 0) + 0.5 * x(i, 1) + effect * d[i] + sigma * rng.normal();
    }
    return Dataset(std::move(y), std::move(x), continuous_columns(3), std::move(d));
}

Dataset gen_constant_label(std::size_t n, double p, std::uint64_t seed) {
    check_n(n);
    if (!(p > 0.0 && p < 1.0)) {
        throw ConfigError("label probability must lie in (0, 1)");
    }
    Rng rng(seed);
    Eigen::MatrixXd x = standard_normals(rng, n, 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (auto& v : y) {
        v = rng.bernoulli(p) ? 1.0 : 0.0;
    }
    return Dataset(std::move(y), std::move(x), continuous_columns(3));
}

namespace {

bool estimand_matches(DgpKind dgp, McEstimator e) {
    switch (dgp) {
        case DgpKind::saturated:
            return e == McEstimator::iop_plugin || e == McEstimator::iop_debiased;
        case DgpKind::linear_gaussian:
        case DgpKind::constant_mean:
            return e == McEstimator::varfv_plugin || e == McEstimator::varfv_debiased;
        case DgpKind::constant_label:
            return e == McEstimator::ranking_debiased;
        case DgpKind::randomized_treatment:
            return e == McEstimator::ate_debiased;
    }
    return false;
}

void validate(const McConfig& c) {
    if (c.reps < 1) {
        throw ConfigError("reps must be at least 1");
    }
    if (c.n < 10) {
        throw ConfigError("n must be at least 10");
    }
    if (!(c.dgp.sigma > 0.0)) {
        throw ConfigError("sigma must be positive");
    }
    if (!estimand_matches(c.dgp.kind, c.estimator)) {
        throw ConfigError("estimator " + to_string(c.estimator) + " has no known truth under the " +
                          to_string(c.dgp.kind) + " DGP");
    }
    normal_quantile(c.level);
}

EstimateResult run_estimator(const McConfig& c, const Dataset& data, const LearnerSpec& learner,
                             const LearnerSpec& alpha, std::uint64_t fold_seed) {
    EstimateOptions options;
    options.level = c.level;
    const auto folds = [&] { return make_folds(data.n(), c.K, fold_seed); };
    switch (c.estimator) {
        case McEstimator::iop_plugin:
            return iop_gini_plugin(data, learner, options);
        case McEstimator::iop_debiased:
            return iop_gini_debiased_np(data, learner, folds(), options);
        case McEstimator::varfv_plugin:
            return varfv_plugin(data, learner, options);
        case McEstimator::varfv_debiased:
            return varfv_debiased(data, learner, folds(), options);
        case McEstimator::ranking_debiased:
            return ranking_risk_debiased(data, learner, folds(), options);
        case McEstimator::ate_debiased:
            return contrast_te_debiased(data, Contrast::difference, learner, alpha, folds(), options);
    }
    throw ConfigError("unknown estimator");
}

}  // namespace

std::pair<Dataset, double> draw_replication(const McConfig& c, int rep) {
    const std::uint64_t seed = derive_seed(c.seed, static_cast<std::uint64_t>(rep));
    switch (c.dgp.kind) {
        case DgpKind::linear_gaussian: {
            auto draw = gen_linear_gaussian(c.n, seed);
            return {std::move(draw.data), draw.theta_true};
        }
        case DgpKind::saturated:
            return {gen_saturated(c.n, c.dgp.sigma, seed), true_gini_saturated(c.dgp.sigma)};
        case DgpKind::constant_mean:
            return {gen_constant_mean(c.n, c.dgp.sigma, seed), 0.0};
        case DgpKind::randomized_treatment:
            return {gen_randomized_treatment(c.n, c.dgp.sigma, c.dgp.effect, seed), c.dgp.effect};
        case DgpKind::constant_label:
            return {gen_constant_label(c.n, c.dgp.p, seed), c.dgp.p * (1.0 - c.dgp.p)};
    }
    throw ConfigError("unknown DGP");
}

McReport run_mc(const McConfig& config) {
    validate(config);
    const auto reps = static_cast<std::size_t>(config.reps);
    McReport report;
    report.config = config;
    std::vector<double> est(reps), se(reps), truth(reps);
    std::vector<char> ok(reps, 0), degenerate(reps, 0);
    parallel_for(reps, resolve_threads(config.threads), [&](std::size_t r) {
        auto [data, theta] = draw_replication(config, static_cast<int>(r));
        truth[r] = theta;
        const LearnerSpec learner = config.learner.reseeded(r);
        const LearnerSpec alpha = config.alpha_learner.reseeded(r);
        try {
            const EstimateResult res = run_estimator(
                config, data, learner, alpha, derive_seed(derive_seed(config.seed, r), 1));
            est[r] = res.theta;
            se[r] = res.se;
            degenerate[r] = res.diagnostics.degenerate ? 1 : 0;
            ok[r] = 1;
        } catch (const NumericalError&) {
            ok[r] = 0;
        }
    });
    CompensatedSum err_sum, se_sum, truth_sum;
    int covered = 0;
    int degen = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        if (!ok[r]) {
            ++report.reps_failed;
            continue;
        }
        ++report.reps_ok;
        report.estimates.push_back(est[r]);
        report.ses.push_back(se[r]);
        report.truths.push_back(truth[r]);
        report.degenerate.push_back(degenerate[r]);
        err_sum.add(est[r] - truth[r]);
        se_sum.add(se[r]);
        truth_sum.add(truth[r]);
        const double z = normal_quantile(config.level);
        covered += (est[r] - z * se[r] <= truth[r] && truth[r] <= est[r] + z * se[r]) ? 1 : 0;
        degen += degenerate[r];
    }
    if (report.reps_ok == 0) {
        throw NumericalError("all " + std::to_string(config.reps) + " replications failed");
    }
    const double m = report.reps_ok;
    report.bias = err_sum.value() / m;
    report.mean_se = se_sum.value() / m;
    report.truth = truth_sum.value() / m;
    report.coverage = covered / m;
    report.degenerate_rate = degen / m;
    double ss_est = 0.0;
    double ss_err = 0.0;
    const double mean_est = report.bias + report.truth;
    for (std::size_t k = 0; k < report.estimates.size(); ++k) {
        ss_est += std::pow(report.estimates[k] - mean_est, 2);
        ss_err += std::pow(report.estimates[k] - report.truths[k] - report.bias, 2);
    }
    if (report.reps_ok > 1) {
        report.sd_estimates = std::sqrt(ss_est / (m - 1));
        report.bias_se = std::sqrt(ss_err / (m - 1)) / std::sqrt(m);
    }
    return report;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::string mc_csv_header() {
    return "dgp,sigma,n,reps,estimator,learner,K,level,seed,truth,bias,coverage,sd_estimates,"
           "mean_se,bias_se,degenerate_rate,reps_ok,reps_failed";
}

std::string mc_csv_row(const McReport& r) {
    const McConfig& c = r.config;
    std::ostringstream out;
    out << to_string(c.dgp.kind) << ',' << number(c.dgp.sigma) << ',' << c.n << ',' << c.reps << ','
        << to_string(c.estimator) << ",\"" << c.learner.describe() << "\"," << c.K << ','
        << number(c.level) << ',' << c.seed << ',' << number(r.truth) << ',' << number(r.bias)
        << ',' << number(r.coverage) << ',' << number(r.sd_estimates) << ',' << number(r.mean_se)
        << ',' << number(r.bias_se) << ',' << number(r.degenerate_rate) << ',' << r.reps_ok << ','
        << r.reps_failed;
    return out.str();
}

void write_mc_table(std::ostream& out, const std::vector<McReport>& reports) {
    const std::vector<std::string> head = {"estimator", "learner", "n",  "truth", "bias",
                                           "coverage",  "sd",      "se", "failed"};
    std::vector<std::vector<std::string>> rows{head};
    for (const auto& r : reports) {
        rows.push_back({to_string(r.config.estimator), r.config.learner.describe(),
                        std::to_string(r.config.n), fixed(r.truth, 4), fixed(r.bias, 4),
                        fixed(r.coverage, 3), fixed(r.sd_estimates, 4), fixed(r.mean_se, 4),
                        std::to_string(r.reps_failed)});
    }
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            width[k] = std::max(width[k], row[k].size());
        }
    }
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k > 0) {
                out << "  ";
            }
            if (k < 2) {
                out << std::left << std::setw(static_cast<int>(width[k])) << row[k];
            } else {
                out << std::right << std::setw(static_cast<int>(width[k])) << row[k];
            }
        }
        out << '\n';
    }
}

}  // namespace dustat
