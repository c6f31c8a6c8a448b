#include "dustat/learners.hpp"

#include "dustat/error.hpp"
#include "dustat/rng.hpp"

#include <cmath>
#include <sstream>

namespace dustat {

LearnerSpec LearnerSpec::ridge(double lambda) {
    LearnerSpec s;
    s.kind = LearnerKind::ridge;
    s.penalty.mode = PenaltySpec::Mode::fixed;
    s.penalty.lambda = lambda;
    return s;
}

LearnerSpec LearnerSpec::ridge_cv() {
    LearnerSpec s;
    s.kind = LearnerKind::ridge;
    return s;
}

LearnerSpec LearnerSpec::lasso(double lambda) {
    LearnerSpec s;
    s.penalty.mode = PenaltySpec::Mode::fixed;
    s.penalty.lambda = lambda;
    return s;
}

LearnerSpec LearnerSpec::lasso_cv() { return LearnerSpec{}; }

LearnerSpec LearnerSpec::lasso_theory() {
    LearnerSpec s;
    s.penalty.mode = PenaltySpec::Mode::theory;
    return s;
}

LearnerSpec LearnerSpec::random_forest(int n_trees, int min_node) {
    LearnerSpec s;
    s.kind = LearnerKind::random_forest;
    s.forest.n_trees = n_trees;
    s.forest.min_node = min_node;
    return s;
}

LearnerSpec LearnerSpec::fixed(double value) {
    LearnerSpec s;
    s.kind = LearnerKind::fixed;
    s.fixed_value = value;
    return s;
}

std::string to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::ridge:
            return "ridge";
        case LearnerKind::lasso:
            return "lasso";
        case LearnerKind::random_forest:
            return "rf";
        case LearnerKind::fixed:
            return "fixed";
    }
    return "unknown";
}

void LearnerSpec::validate(std::size_t p) const {
    if (kind == LearnerKind::ridge || kind == LearnerKind::lasso) {
        if (penalty.mode == PenaltySpec::Mode::fixed) {
            if (!(penalty.lambda >= 0.0) || !std::isfinite(penalty.lambda)) {
                throw ConfigError("penalty lambda must be finite and >= 0");
            }
        } else if (penalty.mode == PenaltySpec::Mode::theory) {
            if (kind != LearnerKind::lasso) {
                throw ConfigError("the theory penalty is available for lasso only");
            }
        } else {
            for (double g : penalty.grid) {
                if (!(g > 0.0) || !std::isfinite(g)) {
                    throw ConfigError("cross-validation grid values must be finite and > 0");
                }
            }
            if (penalty.folds < 2) {
                throw ConfigError("cross-validation needs at least 2 folds");
            }
        }
        if (interaction_order < 1 || interaction_order > 3) {
            throw ConfigError("interaction order must be 1, 2 or 3");
        }
    }
    if (kind == LearnerKind::random_forest) {
        if (forest.n_trees < 1) {
            throw ConfigError("random forest needs n_trees >= 1");
        }
        if (forest.min_node < 1) {
            throw ConfigError("random forest needs min_node >= 1");
        }
        if (forest.mtry < 0 || static_cast<std::size_t>(forest.mtry) > p) {
            throw ConfigError("mtry must lie in 1..p (p = " + std::to_string(p) + ")");
        }
    }
    if (kind == LearnerKind::fixed && !std::isfinite(fixed_value)) {
        throw ConfigError("fixed learner value must be finite");
    }
    if (kind == LearnerKind::fixed && transform == OutcomeTransform::log_exp && !(fixed_value > 0)) {
        throw ConfigError("fixed learner value must be positive with the log transform");
    }
}

std::string LearnerSpec::describe() const {
    std::ostringstream out;
    out << to_string(kind);
    switch (kind) {
        case LearnerKind::ridge:
        case LearnerKind::lasso:
            if (penalty.mode == PenaltySpec::Mode::fixed) {
                out << "(lambda=" << penalty.lambda;
            } else if (penalty.mode == PenaltySpec::Mode::theory) {
                out << "(theory";
            } else {
                out << "(cv=" << penalty.folds;
            }
            if (interaction_order > 1) {
                out << ",order=" << interaction_order;
            }
            out << ")";
            break;
        case LearnerKind::random_forest:
            out << "(trees=" << forest.n_trees << ",min_node=" << forest.min_node;
            if (forest.mtry > 0) {
                out << ",mtry=" << forest.mtry;
            }
            out << ")";
            break;
        case LearnerKind::fixed:
            out << "(" << fixed_value << ")";
            break;
    }
    if (transform == OutcomeTransform::log_exp) {
        out << "+log";
    }
    return out.str();
}

LearnerSpec LearnerSpec::reseeded(std::uint64_t stream) const {
    LearnerSpec s = *this;
    s.penalty.seed = derive_seed(penalty.seed, stream);
    s.forest.seed = derive_seed(forest.seed, stream);
    return s;
}

namespace {

std::vector<int> column_levels(const std::vector<ColumnMeta>& columns, std::size_t p) {
    std::vector<int> levels(p, 0);
    for (std::size_t j = 0; j < columns.size() && j < p; ++j) {
        if (columns[j].kind == ColumnMeta::Kind::categorical) {
            levels[j] = columns[j].levels;
        }
    }
    return levels;
}

Eigen::VectorXd link_target(OutcomeTransform transform, const Eigen::VectorXd& y) {
    if (transform == OutcomeTransform::none) {
        return y;
    }
    if ((y.array() <= 0.0).any()) {
        throw DomainError("the log outcome transform needs every outcome to be positive");
    }
    return y.array().log().matrix();
}

}  // namespace

FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                const std::vector<ColumnMeta>& columns, int threads) {
    const auto p = static_cast<std::size_t>(x.cols());
    spec.validate(p);
    if (x.rows() != y.size()) {
        throw UsageError("covariate rows and outcome length differ");
    }
    if (y.size() < 2) {
        throw DataError("a learner needs at least 2 observations");
    }
    if (!columns.empty() && columns.size() != p) {
        throw UsageError("column metadata does not match the covariate matrix");
    }
    const Eigen::VectorXd t = link_target(spec.transform, y);

    FittedModel model;
    model.kind_ = spec.kind;
    model.transform_ = spec.transform;
    model.p_ = p;
    model.description_ = spec.describe();
    switch (spec.kind) {
        case LearnerKind::fixed:
            model.fixed_value_ = spec.fixed_value;
            break;
        case LearnerKind::ridge:
        case LearnerKind::lasso: {
            const DesignLayout layout(columns, p, spec.interaction_order);
            const SparseRows rows = layout.expand(x);
            double lambda = spec.penalty.lambda;
            if (spec.penalty.mode == PenaltySpec::Mode::cv) {
                model.cv_ = detail::cv_linear(spec.kind, spec.penalty, rows, t);
                lambda = model.cv_->chosen;
            } else if (spec.penalty.mode == PenaltySpec::Mode::theory) {
                const double mean = t.mean();
                const double sd = std::sqrt((t.array() - mean).square().mean());
                lambda = detail::theory_lambda(rows.rows(), rows.cols, sd);
            }
            model.linear_ = std::make_shared<const LinearModel>(
                detail::fit_linear(spec.kind, layout, rows, t, lambda));
            break;
        }
        case LearnerKind::random_forest:
            model.forest_ = std::make_shared<const ForestModel>(
                detail::fit_forest(spec.forest, x, t, column_levels(columns, p), threads));
            break;
    }
    return model;
}

FittedModel fit_rows(const LearnerSpec& spec, const Dataset& data,
                     const std::vector<std::size_t>& rows, int threads) {
    return fit(spec, take_rows(data.x(), rows), take_rows(data.y(), rows), data.columns(), threads);
}

Eigen::VectorXd FittedModel::predict_link(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != p_) {
        throw UsageError("model was trained on " + std::to_string(p_) +
                         " covariate columns, got " + std::to_string(x.cols()));
    }
    switch (kind_) {
        case LearnerKind::fixed: {
            const double v = transform_ == OutcomeTransform::log_exp ? std::log(fixed_value_)
                                                                     : fixed_value_;
            return Eigen::VectorXd::Constant(x.rows(), v);
        }
        case LearnerKind::ridge:
        case LearnerKind::lasso:
            return detail::predict_linear(*linear_, linear_->layout.expand(x));
        case LearnerKind::random_forest:
            return detail::predict_forest(*forest_, x);
    }
    return {};
}

Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& x) {
    Eigen::VectorXd link = model.predict_link(x);
    if (model.transform() == OutcomeTransform::log_exp) {
        return link.array().exp().matrix();
    }
    return link;
}

CvReport cv_tune(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const std::vector<ColumnMeta>& columns) {
    const auto p = static_cast<std::size_t>(x.cols());
    spec.validate(p);
    if (spec.kind != LearnerKind::ridge && spec.kind != LearnerKind::lasso) {
        throw ConfigError("cross-validated tuning applies to ridge and lasso only");
    }
    if (spec.penalty.mode != PenaltySpec::Mode::cv) {
        throw ConfigError("cross-validated tuning needs a cv penalty");
    }
    const DesignLayout layout(columns, p, spec.interaction_order);
    return detail::cv_linear(spec.kind, spec.penalty, layout.expand(x),
                             link_target(spec.transform, y));
}

double rmse(const FittedModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::VectorXd e = y - predict(model, x);
    return std::sqrt(e.squaredNorm() / static_cast<double>(e.size()));
}

}  // namespace dustat
