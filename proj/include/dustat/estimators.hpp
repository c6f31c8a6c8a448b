#pragma once

#include "dustat/crossfit.hpp"
#include "dustat/data.hpp"
#include "dustat/learners.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dustat {

enum class Method { plugin, debiased_np, debiased_general };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct Diagnostics {
    bool degenerate = false;
    bool negative_iop = false;
    bool se_invalid = false;  ///< plug-in SE ignores first-step estimation
    std::optional<double> first_stage_rmse;
    double tie_fraction = 0.0;  ///< share of pairs with equal fitted values
    std::vector<std::string> warnings;
};

struct EstimateResult {
    std::string estimand;  ///< iop | varfv | ranking | ate
    Method method = Method::debiased_np;
    double theta = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double level = 0.95;
    double sigma = 0.0;  ///< Sigma-hat
    double b = 0.0;      ///< B-hat
    std::size_t n = 0;
    int folds = 0;  ///< 0 when no cross-fitting was used
    std::string learner;
    std::string alpha_learner;
    Diagnostics diagnostics;
};

struct EstimateOptions {
    double level = 0.95;
    int threads = 1;
    /// Plug-in estimators average cross-fitted block values instead of
    /// refitting once on the full sample (ablation only).
    bool crossfit_plugin = false;
};

/// z quantile used for intervals of the given level.
double normal_quantile(double level);

// Representation of the Riesz-type correction alpha(x_i, x_j) for the Gini
// family: zero, the joint-nonparametric sgn(gamma_i - gamma_j), or the
// additive a(x_i) - a(x_j) - center with a fitted component a.
class AlphaModel {
public:
    enum class Form { zero, pairwise_sign, additive };

    static AlphaModel zero();
    static AlphaModel pairwise_sign();
    static AlphaModel additive(FittedModel component, double center);

    Form form() const { return form_; }
    const FittedModel* component() const { return component_ ? &*component_ : nullptr; }
    double center() const { return center_; }

    /// Component values a(x) (zeros unless additive).
    Eigen::VectorXd component_values(const Eigen::MatrixXd& x) const;

    double operator()(double gamma_i, double gamma_j, double a_i, double a_j) const;

private:
    Form form_ = Form::zero;
    std::optional<FittedModel> component_;
    double center_ = 0.0;
};

/// Leave-one-out means (n-1)^{-1} sum_{j != i} sgn(gamma_i - gamma_j).
Eigen::VectorXd sign_alpha_targets(const Eigen::VectorXd& gamma);

/// Regresses the sign targets of `gamma` on x with alpha_spec.
AlphaModel fit_sign_alpha(const LearnerSpec& alpha_spec, const Eigen::MatrixXd& x,
                          const std::vector<ColumnMeta>& columns, const Eigen::VectorXd& gamma,
                          int threads = 1);

struct VarianceParts {
    double sigma = 0.0;
    double b = 0.0;
    double v = 0.0;
    double se = 0.0;
    bool degenerate = false;
};

/// Sum_{i<j}|y_i - y_j| / Sum_{i<j}(y_i + y_j).
double gini_classic(const Eigen::VectorXd& y);

EstimateResult iop_gini_plugin(const Dataset& data, const LearnerSpec& spec,
                               const EstimateOptions& options = {},
                               const FoldPartition* folds = nullptr);
EstimateResult iop_gini_debiased_np(const Dataset& data, const LearnerSpec& spec,
                                    const FoldPartition& folds, const EstimateOptions& options = {});
EstimateResult iop_gini_debiased_general(const Dataset& data, const LearnerSpec& spec,
                                         const LearnerSpec& alpha_spec, const FoldPartition& folds,
                                         const EstimateOptions& options = {});
/// Same estimator with a caller-chosen alpha form for every block (zero or
/// pairwise sign; additive forms are fitted per block by the overload above).
EstimateResult iop_gini_debiased_general(const Dataset& data, const LearnerSpec& spec,
                                         AlphaModel::Form form, const FoldPartition& folds,
                                         const EstimateOptions& options = {});

/// Debiased Gini numerator over all blocks divided by sum_{i<j}(y_i + y_j),
/// given per-block first-step values: gamma[l] (and alpha[l] for the additive
/// form) must be filled at the members of block l. debiased_np uses
/// sgn(dgamma) dy; debiased_general uses |dgamma| + alpha (dy - dgamma).
double iop_gini_blockwise(const Eigen::VectorXd& y, const PairBlocks& blocks,
                          const std::vector<Eigen::VectorXd>& gamma, Method method,
                          AlphaModel::Form form = AlphaModel::Form::pairwise_sign,
                          const std::vector<Eigen::VectorXd>& alpha = {});

/// Standard error of the Gini estimators from full-sample first steps.
VarianceParts iop_gini_se(const Dataset& data, const FittedModel& gamma_full,
                          const AlphaModel& alpha_full, double theta, int threads = 1);

EstimateResult varfv_plugin(const Dataset& data, const LearnerSpec& spec,
                            const EstimateOptions& options = {});
EstimateResult varfv_debiased(const Dataset& data, const LearnerSpec& spec,
                              const FoldPartition& folds, const EstimateOptions& options = {});

/// Labels must be 0/1. Without alpha_spec the joint-nonparametric form is used.
EstimateResult ranking_risk_debiased(const Dataset& data, const LearnerSpec& spec,
                                     const FoldPartition& folds,
                                     const EstimateOptions& options = {},
                                     const LearnerSpec* alpha_spec = nullptr);

enum class Contrast { difference, indicator_ge };

std::string to_string(Contrast h);
double contrast_value(Contrast h, double a, double b);

/// Propensity bounds used by the treatment contrast.
inline constexpr double kPropensityFloor = 0.01;

/// Sum over i<j of g + phi for given propensities and alpha values.
double te_moment_sum(const Dataset& data, Contrast h, const Eigen::VectorXd& gamma,
                     const Eigen::VectorXd& alpha);

/// Leave-one-out means of the derivative delta(W_i, W_j, gamma) over j != i.
Eigen::VectorXd te_alpha_targets(const Eigen::VectorXd& y, const Eigen::VectorXd& d,
                                 const Eigen::VectorXd& gamma, Contrast h);

EstimateResult contrast_te_debiased(const Dataset& data, Contrast h,
                                    const LearnerSpec& propensity_spec,
                                    const LearnerSpec& alpha_spec, const FoldPartition& folds,
                                    const EstimateOptions& options = {});

/// Inverse-probability-weighted augmented estimator with a zero outcome model.
double aipw_ate(const Dataset& data, const Eigen::VectorXd& gamma);

enum class Estimand { varfv, iop, ranking };

struct OrthogonalityReport {
    std::vector<double> eps;
    double psi_base = 0.0;
    double g_base = 0.0;
    std::vector<double> psi_slope;
    std::vector<double> g_slope;
    /// Largest |psi slope| / |g slope| over the grid.
    double max_ratio = 0.0;
};

// Finite-difference slopes of the empirical orthogonal moment (psi) and of the
// identifying moment (g) under gamma + eps * direction, with theta fixed.
OrthogonalityReport orthogonality_check(Estimand estimand, const Dataset& data,
                                        const Eigen::VectorXd& gamma,
                                        const Eigen::VectorXd& direction, double theta,
                                        const std::vector<double>& eps_grid);
OrthogonalityReport orthogonality_check(
    Estimand estimand, const Dataset& data, const FittedModel& gamma,
    const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& direction, double theta,
    const std::vector<double>& eps_grid);

}  // namespace dustat
