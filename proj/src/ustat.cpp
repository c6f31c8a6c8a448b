#include "dustat/ustat.hpp"

#include <algorithm>

namespace dustat {

double u_mean(const PairKernel& k, std::size_t n, int threads) {
    return u_mean<PairKernel>(k, n, threads);
}

Eigen::VectorXd loo_means(const PairKernel& k, std::size_t n, int threads) {
    return loo_means<PairKernel>(k, n, k.symmetric, threads);
}

double sigma_hat(const Eigen::VectorXd& loo) {
    if (loo.size() == 0) {
        return 0.0;
    }
    CompensatedSum s;
    for (Eigen::Index i = 0; i < loo.size(); ++i) {
        s.add(loo[i] * loo[i]);
    }
    return 4.0 * s.value() / static_cast<double>(loo.size());
}

Eigen::MatrixXd sigma_hat(const Eigen::MatrixXd& loo) {
    if (loo.rows() == 0) {
        return Eigen::MatrixXd::Zero(loo.cols(), loo.cols());
    }
    return 4.0 * (loo.transpose() * loo) / static_cast<double>(loo.rows());
}

bool degeneracy_diagnostic(double sigma, double theta_scale) {
    return sigma < 1e-10 * std::max(1.0, theta_scale * theta_scale);
}

}  // namespace dustat
