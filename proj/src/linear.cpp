#include "dustat/crossfit.hpp"
#include "dustat/error.hpp"
#include "dustat/learners.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dustat::detail {

namespace {

// Raw cross-products of a row subset.
struct Moments {
    Eigen::MatrixXd xx;  // upper triangle filled
    Eigen::VectorXd xs;
    Eigen::VectorXd xt;
    double ts = 0.0;
    double tt = 0.0;
    double n = 0.0;

    explicit Moments(std::size_t p)
        : xx(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p))),
          xs(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p))),
          xt(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p))) {}

    void add_row(const SparseRows& rows, std::size_t r, double t) {
        const std::size_t begin = rows.row_ptr[r];
        const std::size_t end = rows.row_ptr[r + 1];
        for (std::size_t a = begin; a < end; ++a) {
            const int ja = rows.index[a];
            const double va = rows.value[a];
            xs[ja] += va;
            xt[ja] += va * t;
            for (std::size_t b = a; b < end; ++b) {
                const int jb = rows.index[b];
                if (ja <= jb) {
                    xx(ja, jb) += va * rows.value[b];
                } else {
                    xx(jb, ja) += va * rows.value[b];
                }
            }
        }
        ts += t;
        tt += t * t;
        n += 1.0;
    }

    Moments& operator-=(const Moments& o) {
        xx -= o.xx;
        xs -= o.xs;
        xt -= o.xt;
        ts -= o.ts;
        tt -= o.tt;
        n -= o.n;
        return *this;
    }
    Moments& operator+=(const Moments& o) {
        xx += o.xx;
        xs += o.xs;
        xt += o.xt;
        ts += o.ts;
        tt += o.tt;
        n += o.n;
        return *this;
    }
};

// Correlation-scale problem on the features with positive variance.
struct Standardized {
    std::vector<int> active;
    Eigen::VectorXd mean;   // all features
    Eigen::VectorXd scale;  // all features, 0 when excluded
    Eigen::MatrixXd C;      // active x active
    Eigen::VectorXd c;      // active
    double tbar = 0.0;
    double tsd = 0.0;
};

// Drops features that are (numerically) exact linear combinations of earlier
// ones, scanning in design order with an incremental Cholesky factor.
void drop_dependent(Standardized& s) {
    const auto q = static_cast<Eigen::Index>(s.active.size());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(q, q);
    std::vector<Eigen::Index> kept;
    for (Eigen::Index a = 0; a < q; ++a) {
        const auto k = static_cast<Eigen::Index>(kept.size());
        Eigen::VectorXd row(k);
        for (Eigen::Index u = 0; u < k; ++u) {
            row[u] = s.C(a, kept[static_cast<std::size_t>(u)]);
        }
        if (k > 0) {
            L.topLeftCorner(k, k).triangularView<Eigen::Lower>().solveInPlace(row);
        }
        const double resid = s.C(a, a) - row.squaredNorm();
        if (resid > 1e-9 * s.C(a, a)) {
            L.row(k).head(k) = row.transpose();
            L(k, k) = std::sqrt(resid);
            kept.push_back(a);
        }
    }
    if (static_cast<Eigen::Index>(kept.size()) == q) {
        return;
    }
    const auto r = static_cast<Eigen::Index>(kept.size());
    Eigen::MatrixXd C(r, r);
    Eigen::VectorXd c(r);
    std::vector<int> active(kept.size());
    for (Eigen::Index u = 0; u < r; ++u) {
        const Eigen::Index a = kept[static_cast<std::size_t>(u)];
        active[static_cast<std::size_t>(u)] = s.active[static_cast<std::size_t>(a)];
        c[u] = s.c[a];
        for (Eigen::Index v = 0; v < r; ++v) {
            C(u, v) = s.C(a, kept[static_cast<std::size_t>(v)]);
        }
    }
    for (Eigen::Index a = 0; a < q; ++a) {
        if (std::find(kept.begin(), kept.end(), a) == kept.end()) {
            s.scale[s.active[static_cast<std::size_t>(a)]] = 0.0;
        }
    }
    s.active = std::move(active);
    s.C = std::move(C);
    s.c = std::move(c);
}

Standardized standardize(const Moments& m, bool prune) {
    const auto p = m.xs.size();
    Standardized s;
    s.mean = m.xs / m.n;
    s.scale = Eigen::VectorXd::Zero(p);
    s.tbar = m.ts / m.n;
    s.tsd = std::sqrt(std::max(0.0, m.tt / m.n - s.tbar * s.tbar));
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mu = s.mean[j];
        const double var = m.xx(j, j) / m.n - mu * mu;
        if (var > 1e-12 * std::max(1.0, mu * mu)) {
            s.scale[j] = std::sqrt(var);
            s.active.push_back(static_cast<int>(j));
        }
    }
    const auto q = static_cast<Eigen::Index>(s.active.size());
    s.C.resize(q, q);
    s.c.resize(q);
    for (Eigen::Index a = 0; a < q; ++a) {
        const int ja = s.active[static_cast<std::size_t>(a)];
        for (Eigen::Index b = a; b < q; ++b) {
            const int jb = s.active[static_cast<std::size_t>(b)];
            const double g = m.xx(std::min(ja, jb), std::max(ja, jb));
            const double v = (g / m.n - s.mean[ja] * s.mean[jb]) / (s.scale[ja] * s.scale[jb]);
            s.C(a, b) = v;
            s.C(b, a) = v;
        }
        s.c[a] = (m.xt[ja] / m.n - s.mean[ja] * s.tbar) / s.scale[ja];
    }
    if (prune) {
        drop_dependent(s);
    }
    return s;
}

// Primal active-set solver for
//   min_b 1/2 b'Cb - c'b + lambda |b|_1
// with C positive definite. The support S and its signs are kept between
// calls, so walking down a penalty path only pays for support changes. Each
// step solves the sign-restricted quadratic on S exactly through a Cholesky
// factor of C_SS that is updated in place. When that solution flips a sign
// the step stops at the first zero crossing and the variable leaves S;
// otherwise the worst KKT violator outside S enters with the sign of its
// correlation.
class ActiveSetLasso {
public:
    ActiveSetLasso(const Eigen::MatrixXd& C, const Eigen::VectorXd& c)
        : C_(C), c_(c), L_(C.rows(), C.rows()), member_(static_cast<std::size_t>(C.rows()), 0) {}

    // Returns the number of steps taken; b receives the full solution.
    int solve(double lambda, double tol, Eigen::VectorXd& b) {
        const auto q = C_.rows();
        const int max_steps = 100 + 20 * static_cast<int>(q);
        Eigen::VectorXd full(q);
        Eigen::VectorXd r(q);
        for (int step = 1; step <= max_steps; ++step) {
            const auto m = static_cast<Eigen::Index>(support_.size());
            Eigen::VectorXd x(m);
            for (Eigen::Index k = 0; k < m; ++k) {
                x[k] = c_[support_[static_cast<std::size_t>(k)]] - lambda * sign_[static_cast<std::size_t>(k)];
            }
            if (m > 0) {
                const auto L = L_.topLeftCorner(m, m).triangularView<Eigen::Lower>();
                L.solveInPlace(x);
                L.transpose().solveInPlace(x);
            }
            double t = 1.0;
            Eigen::Index leaving = -1;
            for (Eigen::Index k = 0; k < m; ++k) {
                if (x[k] * sign_[static_cast<std::size_t>(k)] <= 0.0) {
                    const double denom = value_[k] - x[k];
                    const double tk = denom != 0.0 ? value_[k] / denom : 0.0;
                    if (tk < t) {
                        t = tk;
                        leaving = k;
                    }
                }
            }
            if (leaving >= 0) {
                value_.head(m) += t * (x - value_.head(m));
                remove(leaving);
                continue;
            }
            value_.head(m) = x;
            full.setZero();
            for (Eigen::Index k = 0; k < m; ++k) {
                full[support_[static_cast<std::size_t>(k)]] = value_[k];
            }
            // The gradient vanishes on S at a face optimum, so only the rest of
            // r = c - Cb is needed; take the cheaper of the two ways to get it.
            const bool by_columns = 2 * m < q;
            if (by_columns) {
                r = c_;
                for (Eigen::Index k = 0; k < m; ++k) {
                    r.noalias() -= value_[k] * C_.col(support_[static_cast<std::size_t>(k)]);
                }
            }
            Eigen::Index entering = -1;
            double worst = tol;
            double entering_r = 0.0;
            for (Eigen::Index j = 0; j < q; ++j) {
                if (in_support(j)) {
                    continue;
                }
                const double rj = by_columns ? r[j] : c_[j] - C_.col(j).dot(full);
                const double v = std::abs(rj) - lambda;
                if (v > worst) {
                    worst = v;
                    entering = j;
                    entering_r = rj;
                }
            }
            if (entering < 0) {
                b = full;
                return step;
            }
            add(entering, entering_r > 0 ? 1.0 : -1.0);
        }
        throw NumericalError("lasso active-set solver did not converge in " +
                             std::to_string(max_steps) + " steps at lambda " +
                             std::to_string(lambda));
    }

private:
    bool in_support(Eigen::Index j) const { return member_[static_cast<std::size_t>(j)] != 0; }

    void add(Eigen::Index j, double sign) {
        const auto m = static_cast<Eigen::Index>(support_.size());
        Eigen::VectorXd l(m);
        for (Eigen::Index k = 0; k < m; ++k) {
            l[k] = C_(support_[static_cast<std::size_t>(k)], j);
        }
        if (m > 0) {
            L_.topLeftCorner(m, m).triangularView<Eigen::Lower>().solveInPlace(l);
        }
        const double d2 = C_(j, j) - l.squaredNorm();
        if (!(d2 > 1e-13 * C_(j, j))) {
            throw NumericalError("lasso design is numerically rank deficient");
        }
        L_.row(m).head(m) = l.transpose();
        L_(m, m) = std::sqrt(d2);
        support_.push_back(j);
        sign_.push_back(sign);
        member_[static_cast<std::size_t>(j)] = 1;
        if (value_.size() < m + 1) {
            value_.conservativeResize(C_.rows());
        }
        value_[m] = 0.0;
    }

    // Deletes position k of the support and restores the Cholesky factor
    // with a rank-one update of the trailing block.
    void remove(Eigen::Index k) {
        const auto m = static_cast<Eigen::Index>(support_.size());
        const Eigen::Index tail = m - k - 1;
        Eigen::VectorXd x = L_.col(k).segment(k + 1, tail);
        for (Eigen::Index i = 0; i < tail; ++i) {
            const Eigen::Index ii = k + 1 + i;
            const double lii = L_(ii, ii);
            const double rr = std::hypot(lii, x[i]);
            const double cs = rr / lii;
            const double sn = x[i] / lii;
            L_(ii, ii) = rr;
            for (Eigen::Index j = i + 1; j < tail; ++j) {
                const Eigen::Index jj = k + 1 + j;
                L_(jj, ii) = (L_(jj, ii) + sn * x[j]) / cs;
                x[j] = cs * x[j] - sn * L_(jj, ii);
            }
        }
        for (Eigen::Index i = k; i + 1 < m; ++i) {
            L_.row(i).head(k) = L_.row(i + 1).head(k);
            L_.row(i).segment(k, i - k + 1) = L_.row(i + 1).segment(k + 1, i - k + 1);
            value_[i] = value_[i + 1];
        }
        member_[static_cast<std::size_t>(support_[static_cast<std::size_t>(k)])] = 0;
        support_.erase(support_.begin() + k);
        sign_.erase(sign_.begin() + k);
    }

    const Eigen::MatrixXd& C_;
    const Eigen::VectorXd& c_;
    Eigen::MatrixXd L_;
    Eigen::VectorXd value_;
    std::vector<Eigen::Index> support_;
    std::vector<double> sign_;
    std::vector<char> member_;
};

Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& C, const Eigen::VectorXd& c, double lambda) {
    const auto q = C.rows();
    if (q == 0) {
        return Eigen::VectorXd(0);
    }
    Eigen::MatrixXd A = C;
    A.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    const Eigen::VectorXd d = ldlt.vectorD().cwiseAbs();
    if (ldlt.info() != Eigen::Success || d.minCoeff() <= 1e-12 * std::max(1.0, d.maxCoeff())) {
        throw NumericalError(
            "ridge system is singular (collinear covariates); use a penalty lambda > 0");
    }
    return ldlt.solve(c);
}

double tolerance(const Standardized& s) { return 1e-8 * std::max(1.0, s.tsd); }

// Original-scale model from a standardized solution.
LinearModel to_original(const DesignLayout& layout, const Standardized& s,
                        const Eigen::VectorXd& b, double lambda) {
    LinearModel m;
    m.layout = layout;
    m.center = s.mean;
    m.scale = s.scale;
    m.beta = Eigen::VectorXd::Zero(s.mean.size());
    m.intercept = s.tbar;
    for (std::size_t a = 0; a < s.active.size(); ++a) {
        const int j = s.active[a];
        m.beta[j] = b[static_cast<Eigen::Index>(a)] / s.scale[j];
        m.intercept -= s.mean[j] * m.beta[j];
    }
    m.lambda = lambda;
    return m;
}

double predict_row(const SparseRows& rows, std::size_t r, double intercept,
                   const Eigen::VectorXd& beta) {
    double v = intercept;
    for (std::size_t k = rows.row_ptr[r]; k < rows.row_ptr[r + 1]; ++k) {
        v += rows.value[k] * beta[rows.index[k]];
    }
    return v;
}

std::vector<double> default_grid(LearnerKind kind, const Standardized& s) {
    const double lmax = s.c.size() > 0 ? s.c.cwiseAbs().maxCoeff() : 0.0;
    const double top = kind == LearnerKind::ridge ? 1000.0 * lmax : lmax;
    if (!(top > 0.0)) {
        return {1.0};
    }
    std::vector<double> grid(100);
    for (int k = 0; k < 100; ++k) {
        grid[static_cast<std::size_t>(k)] = top * std::pow(1e-4, k / 99.0);
    }
    return grid;
}

}  // namespace

double theory_lambda(std::size_t n, std::size_t width, double outcome_sd) {
    const double nn = static_cast<double>(n);
    const double g = 0.1 / std::log(std::max(nn, 3.0));
    const double tail = g / (2.0 * static_cast<double>(std::max<std::size_t>(width, 1)));
    const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - tail);
    return 1.1 * outcome_sd * z / std::sqrt(nn);
}

LinearModel fit_linear(LearnerKind kind, const DesignLayout& layout, const SparseRows& rows,
                       const Eigen::VectorXd& t, double lambda) {
    Moments m(rows.cols);
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        m.add_row(rows, r, t[static_cast<Eigen::Index>(r)]);
    }
    const Standardized s = standardize(m, kind == LearnerKind::lasso);
    Eigen::VectorXd b;
    int iterations = 0;
    if (kind == LearnerKind::ridge) {
        b = ridge_solve(s.C, s.c, lambda);
    } else {
        ActiveSetLasso solver(s.C, s.c);
        iterations = solver.solve(lambda, tolerance(s), b);
    }
    LinearModel model = to_original(layout, s, b, lambda);
    model.iterations = iterations;
    return model;
}

CvReport cv_linear(LearnerKind kind, const PenaltySpec& penalty, const SparseRows& rows,
                   const Eigen::VectorXd& t) {
    const std::size_t n = rows.rows();
    if (n < static_cast<std::size_t>(penalty.folds)) {
        throw ConfigError("cross-validation needs n >= folds (n = " + std::to_string(n) +
                          ", folds = " + std::to_string(penalty.folds) + ")");
    }
    const FoldPartition folds = make_folds(n, penalty.folds, penalty.seed);
    std::vector<Moments> part(static_cast<std::size_t>(folds.K), Moments(rows.cols));
    Moments total(rows.cols);
    for (std::size_t r = 0; r < n; ++r) {
        part[static_cast<std::size_t>(folds.assignment[r])].add_row(rows, r,
                                                                    t[static_cast<Eigen::Index>(r)]);
    }
    for (const auto& p : part) {
        total += p;
    }

    CvReport report;
    report.grid = penalty.grid.empty() ? default_grid(kind, standardize(total, false)) : penalty.grid;
    const std::size_t G = report.grid.size();
    std::vector<std::size_t> order(G);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return report.grid[a] > report.grid[b]; });

    std::vector<double> sse(G, 0.0);
    for (int k = 0; k < folds.K; ++k) {
        Moments train = total;
        train -= part[static_cast<std::size_t>(k)];
        const Standardized s = standardize(train, kind == LearnerKind::lasso);
        const auto& held = folds.members[static_cast<std::size_t>(k)];
        auto accumulate = [&](std::size_t g, const Eigen::VectorXd& b) {
            const LinearModel m = to_original(DesignLayout{}, s, b, report.grid[g]);
            for (std::size_t r : held) {
                const double e = t[static_cast<Eigen::Index>(r)] - predict_row(rows, r, m.intercept, m.beta);
                sse[g] += e * e;
            }
        };
        if (kind == LearnerKind::ridge) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
            Eigen::VectorXd vc;
            if (s.C.rows() > 0) {
                eig.compute(s.C);
                vc = eig.eigenvectors().transpose() * s.c;
            }
            for (std::size_t g : order) {
                Eigen::VectorXd b(s.C.rows());
                if (s.C.rows() > 0) {
                    const Eigen::VectorXd denom = eig.eigenvalues().array() + report.grid[g];
                    if (denom.minCoeff() <= 1e-12 * std::max(1.0, denom.maxCoeff())) {
                        throw NumericalError(
                            "ridge system is singular (collinear covariates); use a penalty lambda > 0");
                    }
                    b = eig.eigenvectors() * (vc.array() / denom.array()).matrix();
                }
                accumulate(g, b);
            }
        } else {
            ActiveSetLasso solver(s.C, s.c);
            Eigen::VectorXd b;
            for (std::size_t g : order) {
                solver.solve(report.grid[g], tolerance(s), b);
                accumulate(g, b);
            }
        }
    }
    report.rmse.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
        report.rmse[g] = std::sqrt(sse[g] / static_cast<double>(n));
        if (!std::isfinite(report.rmse[g])) {
            throw NumericalError("non-finite cross-validation error at lambda " +
                                 std::to_string(report.grid[g]));
        }
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g : order) {
        if (report.rmse[g] < best) {
            best = report.rmse[g];
            report.chosen = report.grid[g];
        }
    }
    return report;
}

Eigen::VectorXd predict_linear(const LinearModel& model, const SparseRows& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.rows()));
    for (std::size_t r = 0; r < rows.rows(); ++r) {
        out[static_cast<Eigen::Index>(r)] = predict_row(rows, r, model.intercept, model.beta);
    }
    return out;
}

}  // namespace dustat::detail
