#pragma once

#include "dustat/learners.hpp"
#include "dustat/rng.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace dustat::fixture {

struct Problem {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
};

inline Problem random_problem(std::uint64_t seed, Eigen::Index n, Eigen::Index p, double noise = 0.5) {
    Rng rng(seed);
    Problem pr{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
    Eigen::VectorXd beta(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        beta[j] = rng.uniform(-2.0, 2.0) * (j % 3 == 0 ? 0.0 : 1.0);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            pr.x(i, j) = rng.normal() * (1.0 + 0.3 * static_cast<double>(j)) + 0.5 * static_cast<double>(j);
        }
        pr.y[i] = 1.5 + pr.x.row(i).dot(beta) + noise * rng.normal();
    }
    return pr;
}

inline oracle::Mat to_rows(const Eigen::MatrixXd& x) {
    oracle::Mat m(static_cast<std::size_t>(x.rows()), oracle::Vec(static_cast<std::size_t>(x.cols())));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = x(i, j);
        }
    }
    return m;
}

inline oracle::Vec to_vec(const Eigen::VectorXd& v) { return oracle::Vec(v.data(), v.data() + v.size()); }

// Largest KKT violation of a lasso fit on the standardized (1/n) scale.
inline double lasso_kkt(const FittedModel& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const double lambda = m.linear()->lambda;
    const Eigen::VectorXd r = y - predict(m, x);
    const auto n = static_cast<double>(x.rows());
    double worst = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mu = x.col(j).mean();
        const double sd = std::sqrt((x.col(j).array() - mu).square().sum() / n);
        const double grad = ((x.col(j).array() - mu) / sd * r.array()).sum() / n;
        const double b = m.linear()->beta[j];
        const double v = b != 0.0 ? std::abs(grad - (b > 0 ? lambda : -lambda))
                                  : std::max(0.0, std::abs(grad) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace dustat::fixture
