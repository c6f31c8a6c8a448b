#pragma once

#include "dustat/error.hpp"
#include "dustat/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace dustat {

// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Pair kernel k(i, j) over observation indices, evaluated lazily.
struct PairKernel {
    std::function<double(std::size_t, std::size_t)> eval;
    bool symmetric = true;

    double operator()(std::size_t i, std::size_t j) const { return eval(i, j); }
};

namespace detail {

[[noreturn]] inline void non_finite_kernel(std::size_t i, std::size_t j) {
    throw NumericalError("non-finite kernel value at pair (" + std::to_string(i + 1) + ", " +
                         std::to_string(j + 1) + ")");
}

}  // namespace detail

/// Sum over i < j of k(i, j). Row partial sums are combined in row order, so
/// the result does not depend on the thread count.
template <class Kernel>
double u_sum(const Kernel& k, std::size_t n, int threads = 1) {
    std::vector<double> rows(n, 0.0);
    parallel_for(n, threads, [&](std::size_t i) {
        CompensatedSum s;
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = k(i, j);
            if (!std::isfinite(v)) {
                detail::non_finite_kernel(i, j);
            }
            s.add(v);
        }
        rows[i] = s.value();
    });
    CompensatedSum total;
    for (double r : rows) {
        total.add(r);
    }
    return total.value();
}

/// C(n,2)^{-1} sum_{i<j} k(i, j).
template <class Kernel>
double u_mean(const Kernel& k, std::size_t n, int threads = 1) {
    if (n < 2) {
        throw UsageError("a U-statistic needs n >= 2");
    }
    return u_sum(k, n, threads) / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

/// s_i = (n-1)^{-1} sum_{j != i} k(i, j). Asymmetric kernels are symmetrized
/// by averaging k(i, j) and k(j, i).
template <class Kernel>
Eigen::VectorXd loo_means(const Kernel& k, std::size_t n, bool symmetric = true, int threads = 1) {
    if (n < 2) {
        throw UsageError("leave-one-out means need n >= 2");
    }
    Eigen::VectorXd s(static_cast<Eigen::Index>(n));
    parallel_for(n, threads, [&](std::size_t i) {
        CompensatedSum acc;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            double v = k(i, j);
            if (!symmetric) {
                v = 0.5 * (v + k(j, i));
            }
            if (!std::isfinite(v)) {
                detail::non_finite_kernel(i, j);
            }
            acc.add(v);
        }
        s[static_cast<Eigen::Index>(i)] = acc.value() / static_cast<double>(n - 1);
    });
    return s;
}

double u_mean(const PairKernel& k, std::size_t n, int threads = 1);
Eigen::VectorXd loo_means(const PairKernel& k, std::size_t n, int threads = 1);

/// 4/(n(n-1)^2) sum_i (sum_{j != i} psi_ij)^2, written in leave-one-out means
/// as (4/n) sum_i s_i^2.
double sigma_hat(const Eigen::VectorXd& loo);

/// Vector-kernel form: rows of `loo` are s_i'; returns (4/n) sum_i s_i s_i'.
Eigen::MatrixXd sigma_hat(const Eigen::MatrixXd& loo);

/// True when sigma < 1e-10 * max(1, scale^2).
bool degeneracy_diagnostic(double sigma, double theta_scale);

}  // namespace dustat
