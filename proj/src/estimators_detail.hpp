#pragma once

#include "dustat/crossfit.hpp"
#include "dustat/estimators.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace dustat::detail {

inline double sgn(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

struct Bounds {
    double lo;
    double hi;
};

double clamp(double v, const Bounds& b);

// Regression of per-observation correction targets on the covariates of a
// block's training set. targets() receives the in-sample first-step values on
// the training rows and the row indices themselves.
struct AlphaStep {
    LearnerSpec spec;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&, const std::vector<std::size_t>&)> targets;
};

struct CrossFit {
    std::vector<Eigen::VectorXd> gamma;  ///< per block; NaN outside block members
    std::vector<Eigen::VectorXd> alpha;  ///< per block component values (zeros if unused)
    std::optional<double> oof_rmse;
};

CrossFit crossfit_first_step(const Dataset& data, const Eigen::VectorXd& target,
                             const LearnerSpec& spec, const PairBlocks& blocks,
                             const AlphaStep* alpha, const Bounds& bounds, int threads);

VarianceParts variance_parts(double sigma, double b, std::size_t n, double theta_scale);

void finish(EstimateResult& r, const VarianceParts& v);

}  // namespace dustat::detail
