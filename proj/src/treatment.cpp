#include "dustat/error.hpp"
#include "dustat/estimators.hpp"
#include "dustat/ustat.hpp"
#include "estimators_detail.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dustat {

std::string to_string(Contrast h) {
    return h == Contrast::difference ? "difference" : "indicator_ge";
}

double contrast_value(Contrast h, double a, double b) {
    return h == Contrast::difference ? a - b : (a >= b ? 1.0 : 0.0);
}

namespace {

double g_term(Contrast h, double yi, double yj, double di, double dj, double gi, double gj) {
    double v = 0.0;
    if (di == 1.0 && dj == 0.0) {
        v += contrast_value(h, yi, yj) / (gi * (1.0 - gj));
    }
    if (dj == 1.0 && di == 0.0) {
        v += contrast_value(h, yj, yi) / (gj * (1.0 - gi));
    }
    return 0.5 * v;
}

struct TeKernel {
    Contrast h;
    const double* y;
    const double* d;
    const double* g;
    const double* a;
    double theta;

    double operator()(std::size_t i, std::size_t j) const {
        return g_term(h, y[i], y[j], d[i], d[j], g[i], g[j]) + a[i] * (d[i] - g[i]) +
               a[j] * (d[j] - g[j]) - theta;
    }
};

void check_treatment(const Dataset& data) {
    const Eigen::VectorXd& d = data.d();
    const double treated = d.sum();
    if (treated == 0.0 || treated == static_cast<double>(d.size())) {
        throw DomainError("treatment contrast needs both treated and control observations");
    }
}

}  // namespace

Eigen::VectorXd te_alpha_targets(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                                 const Eigen::VectorXd& gamma, Contrast h) {
    const auto n = y.size();
    if (n < 2) {
        throw UsageError("alpha targets need at least 2 observations");
    }
    Eigen::VectorXd out(n);
    if (h == Contrast::difference) {
        // Terms with j == i vanish because they need d_i != d_j.
        CompensatedSum a1, a0, b1, b0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (d[j] == 1.0) {
                a1.add(y[j] / gamma[j]);
                a0.add(1.0 / gamma[j]);
            } else {
                b1.add(y[j] / (1.0 - gamma[j]));
                b0.add(1.0 / (1.0 - gamma[j]));
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const double gi = gamma[i];
            double v = 0.0;
            if (d[i] == 0.0) {
                v = (a1.value() - y[i] * a0.value()) / ((1.0 - gi) * (1.0 - gi));
            } else {
                v = -(y[i] * b0.value() - b1.value()) / (gi * gi);
            }
            out[i] = 0.5 * v / static_cast<double>(n - 1);
        }
        return out;
    }
    // Indicator contrast: prefix sums over outcome-sorted treated and control units.
    std::vector<std::pair<double, double>> treated;
    std::vector<std::pair<double, double>> control;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (d[j] == 1.0) {
            treated.emplace_back(y[j], 1.0 / gamma[j]);
        } else {
            control.emplace_back(y[j], 1.0 / (1.0 - gamma[j]));
        }
    }
    std::sort(treated.begin(), treated.end());
    std::sort(control.begin(), control.end());
    std::vector<double> treated_suffix(treated.size() + 1, 0.0);
    for (std::size_t k = treated.size(); k > 0; --k) {
        treated_suffix[k - 1] = treated_suffix[k] + treated[k - 1].second;
    }
    std::vector<double> control_prefix(control.size() + 1, 0.0);
    for (std::size_t k = 0; k < control.size(); ++k) {
        control_prefix[k + 1] = control_prefix[k] + control[k].second;
    }
    auto key_less = [](const std::pair<double, double>& p, double v) { return p.first < v; };
    auto key_greater = [](double v, const std::pair<double, double>& p) { return v < p.first; };
    for (Eigen::Index i = 0; i < n; ++i) {
        const double gi = gamma[i];
        double v = 0.0;
        if (d[i] == 0.0) {
            const auto k = std::lower_bound(treated.begin(), treated.end(), y[i], key_less) -
                           treated.begin();
            v = treated_suffix[static_cast<std::size_t>(k)] / ((1.0 - gi) * (1.0 - gi));
        } else {
            const auto k = std::upper_bound(control.begin(), control.end(), y[i], key_greater) -
                           control.begin();
            v = -control_prefix[static_cast<std::size_t>(k)] / (gi * gi);
        }
        out[i] = 0.5 * v / static_cast<double>(n - 1);
    }
    return out;
}

double te_moment_sum(const Dataset& data, Contrast h, const Eigen::VectorXd& gamma,
                     const Eigen::VectorXd& alpha) {
    const TeKernel k{h, data.y().data(), data.d().data(), gamma.data(), alpha.data(), 0.0};
    return u_sum(k, data.n());
}

double aipw_ate(const Dataset& data, const Eigen::VectorXd& gamma) {
    const Eigen::VectorXd& y = data.y();
    const Eigen::VectorXd& d = data.d();
    CompensatedSum s;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        s.add(d[i] * y[i] / gamma[i] - (1.0 - d[i]) * y[i] / (1.0 - gamma[i]));
    }
    return s.value() / static_cast<double>(y.size());
}

EstimateResult contrast_te_debiased(const Dataset& data, Contrast h,
                                    const LearnerSpec& propensity_spec,
                                    const LearnerSpec& alpha_spec, const FoldPartition& folds,
                                    const EstimateOptions& options) {
    check_treatment(data);
    if (alpha_spec.transform != OutcomeTransform::none) {
        throw ConfigError("the alpha learner cannot use an outcome transform");
    }
    if (propensity_spec.transform != OutcomeTransform::none) {
        throw ConfigError("the propensity learner cannot use an outcome transform");
    }
    normal_quantile(options.level);
    EstimateResult r;
    r.estimand = "ate";
    r.method = Method::debiased_general;
    r.level = options.level;
    r.n = data.n();
    r.folds = folds.K;
    r.learner = propensity_spec.describe();
    r.alpha_learner = alpha_spec.describe();

    const Eigen::VectorXd& y = data.y();
    const Eigen::VectorXd& d = data.d();
    const detail::Bounds bounds{kPropensityFloor, 1.0 - kPropensityFloor};
    detail::AlphaStep step;
    step.spec = alpha_spec;
    step.targets = [&](const Eigen::VectorXd& g, const std::vector<std::size_t>& rows) {
        return te_alpha_targets(take_rows(y, rows), take_rows(d, rows), g, h);
    };
    const PairBlocks blocks = make_pair_blocks(folds);
    const auto cf =
        detail::crossfit_first_step(data, d, propensity_spec, blocks, &step, bounds, options.threads);
    CompensatedSum total;
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const TeKernel k{h, y.data(), d.data(), cf.gamma[l].data(), cf.alpha[l].data(), 0.0};
        blocks.for_each_pair(l, [&](std::size_t i, std::size_t j) { total.add(k(i, j)); });
    }
    r.theta = total.value() / (0.5 * static_cast<double>(data.n()) * static_cast<double>(data.n() - 1));
    if (!std::isfinite(r.theta)) {
        throw NumericalError("non-finite treatment contrast estimate");
    }
    r.diagnostics.first_stage_rmse = cf.oof_rmse;

    const FittedModel full = fit(propensity_spec, data.x(), d, data.columns(), options.threads);
    Eigen::VectorXd g = predict(full, data.x());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        g[i] = detail::clamp(g[i], bounds);
    }
    const FittedModel alpha_full =
        fit(alpha_spec, data.x(), te_alpha_targets(y, d, g, h), data.columns(), options.threads);
    const Eigen::VectorXd a = predict(alpha_full, data.x());
    const TeKernel psi{h, y.data(), d.data(), g.data(), a.data(), r.theta};
    const Eigen::VectorXd s = loo_means(psi, data.n(), true, options.threads);
    const double scale = h == Contrast::difference
                             ? std::sqrt((y.array() - y.mean()).square().sum() /
                                         static_cast<double>(y.size() - 1))
                             : 1.0;
    detail::finish(r, detail::variance_parts(sigma_hat(s), -1.0, data.n(), scale));
    return r;
}

}  // namespace dustat
