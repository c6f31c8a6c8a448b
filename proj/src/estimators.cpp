#include "dustat/estimators.hpp"

#include "dustat/error.hpp"
#include "estimators_detail.hpp"
#include "dustat/ustat.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace dustat {

std::string to_string(Method method) {
    switch (method) {
        case Method::plugin:
            return "plugin";
        case Method::debiased_np:
            return "debiased_np";
        case Method::debiased_general:
            return "debiased_general";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    if (name == "plugin") {
        return Method::plugin;
    }
    if (name == "debiased_np") {
        return Method::debiased_np;
    }
    if (name == "debiased_general") {
        return Method::debiased_general;
    }
    throw ConfigError("unknown method '" + name + "'");
}

double normal_quantile(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw ConfigError("confidence level must lie strictly between 0 and 1");
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(),
                                 1.0 - (1.0 - level) / 2.0);
}

AlphaModel AlphaModel::zero() { return AlphaModel{}; }

AlphaModel AlphaModel::pairwise_sign() {
    AlphaModel a;
    a.form_ = Form::pairwise_sign;
    return a;
}

AlphaModel AlphaModel::additive(FittedModel component, double center) {
    AlphaModel a;
    a.form_ = Form::additive;
    a.component_ = std::move(component);
    a.center_ = center;
    return a;
}

Eigen::VectorXd AlphaModel::component_values(const Eigen::MatrixXd& x) const {
    if (form_ != Form::additive) {
        return Eigen::VectorXd::Zero(x.rows());
    }
    return predict(*component_, x);
}

double AlphaModel::operator()(double gamma_i, double gamma_j, double a_i, double a_j) const {
    switch (form_) {
        case Form::zero:
            return 0.0;
        case Form::pairwise_sign:
            return detail::sgn(gamma_i - gamma_j);
        case Form::additive:
            return a_i - a_j - center_;
    }
    return 0.0;
}

Eigen::VectorXd sign_alpha_targets(const Eigen::VectorXd& gamma) {
    const auto n = static_cast<std::size_t>(gamma.size());
    if (n < 2) {
        throw UsageError("alpha targets need at least 2 fitted values");
    }
    std::vector<double> sorted(gamma.data(), gamma.data() + n);
    std::sort(sorted.begin(), sorted.end());
    Eigen::VectorXd out(gamma.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double g = gamma[static_cast<Eigen::Index>(i)];
        const auto below = std::lower_bound(sorted.begin(), sorted.end(), g) - sorted.begin();
        const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), g);
        out[static_cast<Eigen::Index>(i)] =
            static_cast<double>(below - above) / static_cast<double>(n - 1);
    }
    return out;
}

AlphaModel fit_sign_alpha(const LearnerSpec& alpha_spec, const Eigen::MatrixXd& x,
                          const std::vector<ColumnMeta>& columns, const Eigen::VectorXd& gamma,
                          int threads) {
    if (alpha_spec.transform != OutcomeTransform::none) {
        throw ConfigError("the alpha learner cannot use an outcome transform");
    }
    const Eigen::VectorXd targets = sign_alpha_targets(gamma);
    // The sign kernel is antisymmetric, so its mean over ordered pairs is 0.
    return AlphaModel::additive(fit(alpha_spec, x, targets, columns, threads), 0.0);
}

double gini_classic(const Eigen::VectorXd& y) {
    const auto n = static_cast<std::size_t>(y.size());
    if (n < 2) {
        throw DomainError("the Gini coefficient needs at least 2 values");
    }
    std::vector<double> sorted(y.data(), y.data() + n);
    std::sort(sorted.begin(), sorted.end());
    CompensatedSum num;
    CompensatedSum total;
    for (std::size_t k = 0; k < n; ++k) {
        num.add((2.0 * static_cast<double>(k) - static_cast<double>(n) + 1.0) * sorted[k]);
        total.add(sorted[k]);
    }
    const double den = static_cast<double>(n - 1) * total.value();
    if (!(den > 0.0)) {
        throw DomainError("Gini denominator nonpositive");
    }
    return num.value() / den;
}

namespace detail {

double clamp(double v, const Bounds& b) { return std::min(std::max(v, b.lo), b.hi); }

CrossFit crossfit_first_step(const Dataset& data, const Eigen::VectorXd& target,
                             const LearnerSpec& spec, const PairBlocks& blocks,
                             const AlphaStep* alpha, const Bounds& bounds, int threads) {
    const std::size_t L = blocks.size();
    const auto n = static_cast<Eigen::Index>(data.n());
    CrossFit cf;
    cf.gamma.assign(L, Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN()));
    cf.alpha.assign(L, Eigen::VectorXd::Zero(n));
    std::vector<std::vector<std::size_t>> train(L);
    for (std::size_t l = 0; l < L; ++l) {
        train[l] = training_indices(blocks, l);
    }
    parallel_for(L, threads, [&](std::size_t l) {
        const Eigen::MatrixXd xt = take_rows(data.x(), train[l]);
        const FittedModel model =
            fit(spec.reseeded(l), xt, take_rows(target, train[l]), data.columns(), 1);
        const std::vector<std::size_t> members = blocks.members(l);
        const Eigen::MatrixXd xm = take_rows(data.x(), members);
        const Eigen::VectorXd gm = predict(model, xm);
        for (std::size_t k = 0; k < members.size(); ++k) {
            cf.gamma[l][static_cast<Eigen::Index>(members[k])] =
                clamp(gm[static_cast<Eigen::Index>(k)], bounds);
        }
        if (alpha != nullptr) {
            Eigen::VectorXd gt = predict(model, xt);
            for (Eigen::Index k = 0; k < gt.size(); ++k) {
                gt[k] = clamp(gt[k], bounds);
            }
            const Eigen::VectorXd targets = alpha->targets(gt, train[l]);
            const FittedModel am =
                fit(alpha->spec.reseeded(L + l), xt, targets, data.columns(), 1);
            const Eigen::VectorXd av = predict(am, xm);
            for (std::size_t k = 0; k < members.size(); ++k) {
                cf.alpha[l][static_cast<Eigen::Index>(members[k])] = av[static_cast<Eigen::Index>(k)];
            }
        }
    });
    // Diagonal blocks predict every observation exactly once from the other folds.
    CompensatedSum sse;
    for (std::size_t l = 0; l < L; ++l) {
        if (!blocks.block_folds(l).diagonal()) {
            continue;
        }
        for (std::size_t i : blocks.folds().members[static_cast<std::size_t>(blocks.block_folds(l).first)]) {
            const auto r = static_cast<Eigen::Index>(i);
            const double e = target[r] - cf.gamma[l][r];
            sse.add(e * e);
        }
    }
    cf.oof_rmse = std::sqrt(sse.value() / static_cast<double>(n));
    return cf;
}

void finish(EstimateResult& r, const VarianceParts& v) {
    r.sigma = v.sigma;
    r.b = v.b;
    r.se = v.se;
    const double z = normal_quantile(r.level);
    r.ci_low = r.theta - z * r.se;
    r.ci_high = r.theta + z * r.se;
    r.diagnostics.degenerate = v.degenerate;
    if (v.degenerate) {
        r.diagnostics.warnings.push_back(
            "variance estimate is near zero (degenerate kernel); the interval is unreliable");
    }
}

VarianceParts variance_parts(double sigma, double b, std::size_t n, double theta_scale) {
    VarianceParts v;
    v.sigma = std::max(sigma, 0.0);
    v.b = b;
    v.v = v.sigma / (b * b);
    v.se = std::sqrt(v.v / static_cast<double>(n));
    v.degenerate = degeneracy_diagnostic(sigma, std::abs(b) * theta_scale);
    return v;
}

}  // namespace detail

using detail::sgn;

namespace {

constexpr detail::Bounds kUnbounded{-std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity()};

EstimateResult base_result(const std::string& estimand, Method method, const Dataset& data,
                           const LearnerSpec& spec, const EstimateOptions& options, int folds) {
    normal_quantile(options.level);
    EstimateResult r;
    r.estimand = estimand;
    r.method = method;
    r.level = options.level;
    r.n = data.n();
    r.folds = folds;
    r.learner = spec.describe();
    return r;
}

double tie_share(const PairBlocks& blocks, const std::vector<Eigen::VectorXd>& gamma) {
    std::uint64_t ties = 0;
    std::uint64_t total = 0;
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const double* g = gamma[l].data();
        blocks.for_each_pair(l, [&](std::size_t i, std::size_t j) {
            ties += g[i] == g[j] ? 1 : 0;
            ++total;
        });
    }
    return total > 0 ? static_cast<double>(ties) / static_cast<double>(total) : 0.0;
}

template <class Term>
double block_sum(const PairBlocks& blocks, Term&& term) {
    CompensatedSum s;
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        blocks.for_each_pair(l, [&](std::size_t i, std::size_t j) {
            const double v = term(l, i, j);
            if (!std::isfinite(v)) {
                detail::non_finite_kernel(i, j);
            }
            s.add(v);
        });
    }
    return s.value();
}

double pairs_of(std::size_t n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

double sample_variance(const Eigen::VectorXd& y) {
    const double m = y.mean();
    return (y.array() - m).square().sum() / static_cast<double>(y.size() - 1);
}

void check_binary(const Eigen::VectorXd& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) {
            throw DomainError("ranking risk needs 0/1 labels; row " + std::to_string(i + 1) +
                              " has " + std::to_string(y[i]));
        }
    }
}

struct GiniVariance {
    const Eigen::VectorXd& y;
    const Eigen::VectorXd& g;
    const Eigen::VectorXd& a;
    const AlphaModel& alpha;
    double theta;

    double operator()(std::size_t i, std::size_t j) const {
        const double dg = g[static_cast<Eigen::Index>(i)] - g[static_cast<Eigen::Index>(j)];
        const double dy = y[static_cast<Eigen::Index>(i)] - y[static_cast<Eigen::Index>(j)];
        const double al = alpha(g[static_cast<Eigen::Index>(i)], g[static_cast<Eigen::Index>(j)],
                                a[static_cast<Eigen::Index>(i)], a[static_cast<Eigen::Index>(j)]);
        return theta * (y[static_cast<Eigen::Index>(i)] + y[static_cast<Eigen::Index>(j)]) -
               std::abs(dg) - al * (dy - dg);
    }
};

}  // namespace

VarianceParts iop_gini_se(const Dataset& data, const FittedModel& gamma_full,
                          const AlphaModel& alpha_full, double theta, int threads) {
    const Eigen::VectorXd g = predict(gamma_full, data.x());
    const Eigen::VectorXd a = alpha_full.component_values(data.x());
    const GiniVariance psi{data.y(), g, a, alpha_full, theta};
    const Eigen::VectorXd s = loo_means(psi, data.n(), true, threads);
    const double b = 2.0 * data.y().mean();
    return detail::variance_parts(sigma_hat(s), b, data.n(), 1.0);
}

EstimateResult iop_gini_plugin(const Dataset& data, const LearnerSpec& spec,
                               const EstimateOptions& options, const FoldPartition* folds) {
    auto warnings = validate_for_iop(data);
    EstimateResult r = base_result("iop", Method::plugin, data, spec, options, 0);
    r.diagnostics.warnings = std::move(warnings);
    const FittedModel model = fit(spec, data.x(), data.y(), data.columns(), options.threads);
    const Eigen::VectorXd g = predict(model, data.x());
    r.diagnostics.first_stage_rmse = rmse(model, data.x(), data.y());
    if (options.crossfit_plugin) {
        if (folds == nullptr) {
            throw ConfigError("cross-fitted plug-in needs a fold partition");
        }
        const PairBlocks blocks = make_pair_blocks(*folds);
        const auto cf = detail::crossfit_first_step(data, data.y(), spec, blocks, nullptr,
                                                    kUnbounded, options.threads);
        const double num = block_sum(blocks, [&](std::size_t l, std::size_t i, std::size_t j) {
            return std::abs(cf.gamma[l][static_cast<Eigen::Index>(i)] -
                            cf.gamma[l][static_cast<Eigen::Index>(j)]);
        });
        const double den = block_sum(blocks, [&](std::size_t l, std::size_t i, std::size_t j) {
            return cf.gamma[l][static_cast<Eigen::Index>(i)] + cf.gamma[l][static_cast<Eigen::Index>(j)];
        });
        if (!(den > 0.0)) {
            throw DomainError("Gini denominator nonpositive");
        }
        r.theta = num / den;
        r.folds = folds->K;
        r.diagnostics.first_stage_rmse = cf.oof_rmse;
    } else {
        r.theta = gini_classic(g);
    }
    // Naive delta-method SE treating the fitted values as data.
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(g.size());
    const AlphaModel none = AlphaModel::zero();
    const GiniVariance psi{g, g, zero, none, r.theta};
    const Eigen::VectorXd s = loo_means(psi, data.n(), true, options.threads);
    detail::finish(r, detail::variance_parts(sigma_hat(s), 2.0 * g.mean(), data.n(), 1.0));
    r.diagnostics.se_invalid = true;
    r.diagnostics.warnings.push_back(
        "plug-in standard error ignores first-step estimation; standard inference on this "
        "estimate is invalid");
    return r;
}

double iop_gini_blockwise(const Eigen::VectorXd& y, const PairBlocks& blocks,
                          const std::vector<Eigen::VectorXd>& gamma, Method method,
                          AlphaModel::Form form, const std::vector<Eigen::VectorXd>& alpha) {
    if (gamma.size() != blocks.size() ||
        (form == AlphaModel::Form::additive && alpha.size() != blocks.size())) {
        throw UsageError("first-step values must be given for every pair block");
    }
    if (method == Method::plugin) {
        throw UsageError("the blockwise Gini is defined for the debiased methods only");
    }
    const double den = static_cast<double>(y.size() - 1) * y.sum();
    if (!(den > 0.0)) {
        throw DomainError("Gini denominator nonpositive");
    }
    const double* yp = y.data();
    double num = 0.0;
    if (method == Method::debiased_np) {
        num = block_sum(blocks, [&](std::size_t l, std::size_t i, std::size_t j) {
            const double* g = gamma[l].data();
            return sgn(g[i] - g[j]) * (yp[i] - yp[j]);
        });
    } else {
        num = block_sum(blocks, [&](std::size_t l, std::size_t i, std::size_t j) {
            const double* g = gamma[l].data();
            const double dg = g[i] - g[j];
            double al = 0.0;
            if (form == AlphaModel::Form::additive) {
                al = alpha[l][static_cast<Eigen::Index>(i)] - alpha[l][static_cast<Eigen::Index>(j)];
            } else if (form == AlphaModel::Form::pairwise_sign) {
                al = sgn(dg);
            }
            return std::abs(dg) + al * (yp[i] - yp[j] - dg);
        });
    }
    return num / den;
}

namespace {

EstimateResult iop_debiased(const Dataset& data, const LearnerSpec& spec,
                            const FoldPartition& folds, const EstimateOptions& options,
                            Method method, AlphaModel::Form form, const LearnerSpec* alpha_spec) {
    auto warnings = validate_for_iop(data);
    EstimateResult r = base_result("iop", method, data, spec, options, folds.K);
    r.diagnostics.warnings = std::move(warnings);
    if (alpha_spec != nullptr) {
        r.alpha_learner = alpha_spec->describe();
        if (alpha_spec->transform != OutcomeTransform::none) {
            throw ConfigError("the alpha learner cannot use an outcome transform");
        }
    }
    const PairBlocks blocks = make_pair_blocks(folds);
    detail::AlphaStep step;
    if (alpha_spec != nullptr) {
        step.spec = *alpha_spec;
        step.targets = [](const Eigen::VectorXd& g, const std::vector<std::size_t>&) {
            return sign_alpha_targets(g);
        };
    }
    const auto cf = detail::crossfit_first_step(data, data.y(), spec, blocks,
                                                alpha_spec != nullptr ? &step : nullptr,
                                                kUnbounded, options.threads);
    const Eigen::VectorXd& y = data.y();
    const AlphaModel block_alpha = form == AlphaModel::Form::pairwise_sign
                                       ? AlphaModel::pairwise_sign()
                                       : AlphaModel::zero();
    r.theta = iop_gini_blockwise(y, blocks, cf.gamma, method, form, cf.alpha);
    r.diagnostics.first_stage_rmse = cf.oof_rmse;
    r.diagnostics.tie_fraction = tie_share(blocks, cf.gamma);
    r.diagnostics.negative_iop = r.theta < 0.0;

    const FittedModel full = fit(spec, data.x(), y, data.columns(), options.threads);
    AlphaModel alpha_full = block_alpha;
    if (form == AlphaModel::Form::additive) {
        alpha_full = fit_sign_alpha(*alpha_spec, data.x(), data.columns(), predict(full, data.x()),
                                    options.threads);
    } else if (method == Method::debiased_np) {
        alpha_full = AlphaModel::pairwise_sign();
    }
    detail::finish(r, iop_gini_se(data, full, alpha_full, r.theta, options.threads));
    if (r.diagnostics.negative_iop) {
        r.diagnostics.warnings.push_back("negative inequality-of-opportunity estimate");
    }
    return r;
}

}  // namespace

EstimateResult iop_gini_debiased_np(const Dataset& data, const LearnerSpec& spec,
                                    const FoldPartition& folds, const EstimateOptions& options) {
    return iop_debiased(data, spec, folds, options, Method::debiased_np,
                        AlphaModel::Form::pairwise_sign, nullptr);
}

EstimateResult iop_gini_debiased_general(const Dataset& data, const LearnerSpec& spec,
                                         const LearnerSpec& alpha_spec, const FoldPartition& folds,
                                         const EstimateOptions& options) {
    return iop_debiased(data, spec, folds, options, Method::debiased_general,
                        AlphaModel::Form::additive, &alpha_spec);
}

EstimateResult iop_gini_debiased_general(const Dataset& data, const LearnerSpec& spec,
                                         AlphaModel::Form form, const FoldPartition& folds,
                                         const EstimateOptions& options) {
    if (form == AlphaModel::Form::additive) {
        throw ConfigError("an additive alpha needs an alpha learner");
    }
    EstimateResult r =
        iop_debiased(data, spec, folds, options, Method::debiased_general, form, nullptr);
    r.alpha_learner = form == AlphaModel::Form::zero ? "zero" : "pairwise_sign";
    return r;
}

EstimateResult varfv_plugin(const Dataset& data, const LearnerSpec& spec,
                            const EstimateOptions& options) {
    EstimateResult r = base_result("varfv", Method::plugin, data, spec, options, 0);
    const FittedModel model = fit(spec, data.x(), data.y(), data.columns(), options.threads);
    const Eigen::VectorXd g = predict(model, data.x());
    r.diagnostics.first_stage_rmse = rmse(model, data.x(), data.y());
    const double* gp = g.data();
    r.theta = u_mean(
        [&](std::size_t i, std::size_t j) {
            const double d = gp[i] - gp[j];
            return 0.5 * d * d;
        },
        data.n(), options.threads);
    const double theta = r.theta;
    const Eigen::VectorXd s = loo_means(
        [&](std::size_t i, std::size_t j) {
            const double d = gp[i] - gp[j];
            return 0.5 * d * d - theta;
        },
        data.n(), true, options.threads);
    detail::finish(r, detail::variance_parts(sigma_hat(s), -1.0, data.n(), sample_variance(data.y())));
    r.diagnostics.se_invalid = true;
    r.diagnostics.warnings.push_back(
        "plug-in standard error ignores first-step estimation; standard inference on this "
        "estimate is invalid");
    return r;
}

EstimateResult varfv_debiased(const Dataset& data, const LearnerSpec& spec,
                              const FoldPartition& folds, const EstimateOptions& options) {
    EstimateResult r = base_result("varfv", Method::debiased_np, data, spec, options, folds.K);
    const PairBlocks blocks = make_pair_blocks(folds);
    const auto cf = detail::crossfit_first_step(data, data.y(), spec, blocks, nullptr, kUnbounded,
                                                options.threads);
    const Eigen::VectorXd& y = data.y();
    const double* yp = y.data();
    const double total = block_sum(blocks, [&](std::size_t l, std::size_t i, std::size_t j) {
        const double* g = cf.gamma[l].data();
        const double dg = g[i] - g[j];
        return dg * (yp[i] - yp[j] - 0.5 * dg);
    });
    r.theta = total / pairs_of(data.n());
    r.diagnostics.first_stage_rmse = cf.oof_rmse;
    r.diagnostics.tie_fraction = tie_share(blocks, cf.gamma);

    const FittedModel full = fit(spec, data.x(), y, data.columns(), options.threads);
    const Eigen::VectorXd g = predict(full, data.x());
    const double* gp = g.data();
    const double theta = r.theta;
    const Eigen::VectorXd s = loo_means(
        [&](std::size_t i, std::size_t j) {
            const double dg = gp[i] - gp[j];
            return dg * (yp[i] - yp[j] - 0.5 * dg) - theta;
        },
        data.n(), true, options.threads);
    detail::finish(r, detail::variance_parts(sigma_hat(s), -1.0, data.n(), sample_variance(y)));
    return r;
}

EstimateResult ranking_risk_debiased(const Dataset& data, const LearnerSpec& spec,
                                     const FoldPartition& folds, const EstimateOptions& options,
                                     const LearnerSpec* alpha_spec) {
    check_binary(data.y());
    const Method method = alpha_spec != nullptr ? Method::debiased_general : Method::debiased_np;
    EstimateResult r = base_result("ranking", method, data, spec, options, folds.K);
    if (alpha_spec != nullptr) {
        r.alpha_learner = alpha_spec->describe();
        if (alpha_spec->transform != OutcomeTransform::none) {
            throw ConfigError("the alpha learner cannot use an outcome transform");
        }
    }
    const PairBlocks blocks = make_pair_blocks(folds);
    detail::AlphaStep step;
    if (alpha_spec != nullptr) {
        step.spec = *alpha_spec;
        step.targets = [](const Eigen::VectorXd& g, const std::vector<std::size_t>&) {
            return sign_alpha_targets(g);
        };
    }
    const detail::Bounds unit{0.0, 1.0};
    const auto cf = detail::crossfit_first_step(data, data.y(), spec, blocks,
                                                alpha_spec != nullptr ? &step : nullptr, unit,
                                                options.threads);
    const double* yp = data.y().data();
    auto kernel = [&](const double* g, const double* a, std::size_t i, std::size_t j,
                      const AlphaModel& alpha) {
        const double dy = yp[i] - yp[j];
        const double dg = g[i] - g[j];
        if (alpha.form() == AlphaModel::Form::pairwise_sign) {
            return dy * (dy - sgn(dg));
        }
        return dy * dy - std::abs(dg) - alpha(g[i], g[j], a[i], a[j]) * (dy - dg);
    };
    const double total = block_sum(blocks, [&](std::size_t l, std::size_t i, std::size_t j) {
        const double* g = cf.gamma[l].data();
        if (alpha_spec == nullptr) {
            return kernel(g, nullptr, i, j, AlphaModel::pairwise_sign());
        }
        const double* a = cf.alpha[l].data();
        const double dy = yp[i] - yp[j];
        const double dg = g[i] - g[j];
        return dy * dy - std::abs(dg) - (a[i] - a[j]) * (dy - dg);
    });
    r.theta = total / (2.0 * pairs_of(data.n()));
    r.diagnostics.first_stage_rmse = cf.oof_rmse;
    r.diagnostics.tie_fraction = tie_share(blocks, cf.gamma);

    const FittedModel full = fit(spec, data.x(), data.y(), data.columns(), options.threads);
    Eigen::VectorXd g = predict(full, data.x());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        g[i] = detail::clamp(g[i], unit);
    }
    AlphaModel alpha_full = AlphaModel::pairwise_sign();
    if (alpha_spec != nullptr) {
        alpha_full = fit_sign_alpha(*alpha_spec, data.x(), data.columns(), g, options.threads);
    }
    const Eigen::VectorXd a = alpha_full.component_values(data.x());
    const double theta = r.theta;
    const Eigen::VectorXd s = loo_means(
        [&](std::size_t i, std::size_t j) {
            return 0.5 * kernel(g.data(), a.data(), i, j, alpha_full) - theta;
        },
        data.n(), true, options.threads);
    detail::finish(r, detail::variance_parts(sigma_hat(s), -1.0, data.n(), 1.0));
    return r;
}

namespace {

std::array<double, 2> orthogonality_moments(Estimand estimand, const Dataset& data,
                                            const Eigen::VectorXd& g, double theta) {
    const double* yp = data.y().data();
    const double* gp = g.data();
    CompensatedSum psi;
    CompensatedSum ident;
    const std::size_t n = data.n();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dy = yp[i] - yp[j];
            const double dg = gp[i] - gp[j];
            switch (estimand) {
                case Estimand::varfv:
                    psi.add(dg * (dy - 0.5 * dg) - theta);
                    ident.add(0.5 * dg * dg - theta);
                    break;
                case Estimand::iop:
                    psi.add(std::abs(dg) + sgn(dg) * (dy - dg) - theta * (yp[i] + yp[j]));
                    ident.add(std::abs(dg) - theta * (gp[i] + gp[j]));
                    break;
                case Estimand::ranking:
                    psi.add(0.5 * (dy * dy - std::abs(dg) - sgn(dg) * (dy - dg)) - theta);
                    ident.add(0.5 * (dy * dy - std::abs(dg)) - theta);
                    break;
            }
        }
    }
    const double pairs = pairs_of(n);
    return {psi.value() / pairs, ident.value() / pairs};
}

}  // namespace

OrthogonalityReport orthogonality_check(Estimand estimand, const Dataset& data,
                                        const Eigen::VectorXd& gamma,
                                        const Eigen::VectorXd& direction, double theta,
                                        const std::vector<double>& eps_grid) {
    if (gamma.size() != static_cast<Eigen::Index>(data.n()) || direction.size() != gamma.size()) {
        throw UsageError("fitted values and direction must have one entry per observation");
    }
    if (estimand == Estimand::ranking) {
        check_binary(data.y());
    }
    OrthogonalityReport report;
    report.eps = eps_grid;
    const auto base = orthogonality_moments(estimand, data, gamma, theta);
    report.psi_base = base[0];
    report.g_base = base[1];
    for (double eps : eps_grid) {
        if (!(eps != 0.0) || !std::isfinite(eps)) {
            throw ConfigError("perturbation sizes must be finite and nonzero");
        }
        const Eigen::VectorXd moved = gamma + eps * direction;
        const auto m = orthogonality_moments(estimand, data, moved, theta);
        const double ps = (m[0] - base[0]) / eps;
        const double gs = (m[1] - base[1]) / eps;
        report.psi_slope.push_back(ps);
        report.g_slope.push_back(gs);
        const double ratio = gs != 0.0 ? std::abs(ps) / std::abs(gs)
                                       : std::numeric_limits<double>::infinity();
        report.max_ratio = std::max(report.max_ratio, ratio);
    }
    return report;
}

OrthogonalityReport orthogonality_check(
    Estimand estimand, const Dataset& data, const FittedModel& gamma,
    const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& direction, double theta,
    const std::vector<double>& eps_grid) {
    return orthogonality_check(estimand, data, predict(gamma, data.x()), direction(data.x()), theta,
                               eps_grid);
}

}  // namespace dustat
