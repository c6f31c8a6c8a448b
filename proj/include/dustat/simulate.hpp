#pragma once

#include "dustat/data.hpp"
#include "dustat/estimators.hpp"
#include "dustat/learners.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace dustat {

enum class DgpKind {
    linear_gaussian,       ///< three correlated normals, linear mean, variance-of-fit truth
    saturated,             ///< three 8-level factors, fully saturated log-linear model
    constant_mean,         ///< outcome independent of covariates
    randomized_treatment,  ///< coin-flip treatment with a constant effect
    constant_label,        ///< 0/1 labels with a constant success probability
};

std::string to_string(DgpKind kind);
DgpKind dgp_from_string(const std::string& name);

struct DgpSpec {
    DgpKind kind = DgpKind::saturated;
    double sigma = 0.1;  ///< noise standard deviation
    double p = 0.3;      ///< constant_label success probability
    double effect = 1.0; ///< randomized_treatment effect
};

struct LinearGaussianDraw {
    Dataset data;
    double theta_true;
    Eigen::Vector3d beta;
};

/// The 3x3 tridiagonal covariance with unit diagonal and 0.5 off-diagonal.
Eigen::Matrix3d linear_gaussian_cov();

LinearGaussianDraw gen_linear_gaussian(std::size_t n, std::uint64_t seed);

struct SaturatedCoefficients {
    double beta0 = 5.0;
    std::vector<double> beta;  ///< 21 main effects, factor-major
    std::vector<double> xi;    ///< 147 pairwise then 343 threewise interactions
    std::size_t count() const { return 1 + beta.size() + xi.size(); }
};

SaturatedCoefficients saturated_coefficients();

/// Conditional mean of ln Y for levels (a, b, c) in 0..7.
double saturated_eta(const SaturatedCoefficients& coef, int a, int b, int c);

/// Covariates stored as categorical codes (8 levels each).
Dataset gen_saturated(std::size_t n, double sigma, std::uint64_t seed);

/// Gini of E[Y|X] over the 512 equally likely cells.
double true_gini_saturated(double sigma);
/// Same enumeration for arbitrary coefficients (used to check zeroing).
double gini_of_cells(const SaturatedCoefficients& coef, double sigma);

Dataset gen_constant_mean(std::size_t n, double sigma, std::uint64_t seed);
Dataset gen_randomized_treatment(std::size_t n, double sigma, double effect, std::uint64_t seed);
Dataset gen_constant_label(std::size_t n, double p, std::uint64_t seed);

enum class McEstimator {
    iop_plugin,
    iop_debiased,
    varfv_plugin,
    varfv_debiased,
    ranking_debiased,
    ate_debiased,
};

std::string to_string(McEstimator e);
McEstimator mc_estimator_from_string(const std::string& name);

struct McConfig {
    DgpSpec dgp;
    std::size_t n = 1000;
    int reps = 200;
    McEstimator estimator = McEstimator::iop_debiased;
    LearnerSpec learner;
    LearnerSpec alpha_learner = LearnerSpec::lasso_cv();
    int K = 5;
    double level = 0.95;
    std::uint64_t seed = 42;
    int threads = 1;
};

struct McReport {
    McConfig config;
    double truth = 0.0;  ///< mean of the per-replication truths
    double bias = 0.0;
    double coverage = 0.0;
    double sd_estimates = 0.0;
    double mean_se = 0.0;
    double bias_se = 0.0;  ///< Monte Carlo standard error of the bias
    double degenerate_rate = 0.0;
    int reps_failed = 0;
    int reps_ok = 0;
    std::vector<double> estimates;
    std::vector<double> ses;
    std::vector<double> truths;
    std::vector<char> degenerate;
};

/// Draws one dataset for replication `rep` and returns it with its truth.
std::pair<Dataset, double> draw_replication(const McConfig& config, int rep);

McReport run_mc(const McConfig& config);

std::string mc_csv_header();
std::string mc_csv_row(const McReport& report);
/// Aligned plain-text table with one line per report.
void write_mc_table(std::ostream& out, const std::vector<McReport>& reports);

}  // namespace dustat
