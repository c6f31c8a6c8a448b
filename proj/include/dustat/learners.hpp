#pragma once

#include "dustat/data.hpp"
#include "dustat/design.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dustat {

enum class LearnerKind { ridge, lasso, random_forest, fixed };

struct PenaltySpec {
    /// theory: lasso only, lambda = 1.1 sd(y) z(1 - g/(2q)) / sqrt(n) with
    /// g = 0.1 / ln n and q the design width, recomputed for every fit.
    enum class Mode { fixed, cv, theory };
    Mode mode = Mode::cv;
    double lambda = 0.0;       ///< fixed mode
    std::vector<double> grid;  ///< cv mode; empty selects the default 100-point path
    int folds = 10;
    std::uint64_t seed = 1;
};

struct ForestParams {
    int n_trees = 500;
    int mtry = 0;  ///< 0 selects max(1, ceil(p/3))
    int min_node = 5;
    std::uint64_t seed = 1;
    bool bootstrap = true;
};

struct LearnerSpec {
    LearnerKind kind = LearnerKind::lasso;
    PenaltySpec penalty;
    ForestParams forest;
    OutcomeTransform transform = OutcomeTransform::none;
    int interaction_order = 1;  ///< ridge/lasso design expansion
    double fixed_value = 0.0;   ///< fixed learner prediction (level scale)

    static LearnerSpec ridge(double lambda);
    static LearnerSpec ridge_cv();
    static LearnerSpec lasso(double lambda);
    static LearnerSpec lasso_cv();
    static LearnerSpec lasso_theory();
    static LearnerSpec random_forest(int n_trees = 500, int min_node = 5);
    static LearnerSpec fixed(double value);

    /// Throws ConfigError on an invalid combination; p is the raw column count.
    void validate(std::size_t p) const;
    /// Short human-readable label, e.g. "lasso(cv=10)".
    std::string describe() const;
    /// Same spec with every seed replaced by a child stream of it.
    LearnerSpec reseeded(std::uint64_t stream) const;
};

std::string to_string(LearnerKind kind);

struct CvReport {
    std::vector<double> grid;
    std::vector<double> rmse;
    double chosen = 0.0;
};

// Ridge or lasso fit on standardized features; coefficients are kept on the
// original feature scale.
struct LinearModel {
    DesignLayout layout;
    double intercept = 0.0;
    Eigen::VectorXd beta;
    Eigen::VectorXd center;  ///< feature means of the training data
    Eigen::VectorXd scale;   ///< feature standard deviations (0 when dropped)
    double lambda = 0.0;
    int iterations = 0;  ///< active-set steps (lasso)
};

struct TreeNode {
    int feature = -1;  ///< -1 marks a leaf
    bool categorical = false;
    double threshold = 0.0;           ///< go left when x <= threshold
    std::uint64_t left_levels = 0;    ///< categorical: bit r set sends level r left
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
    double predict(const Eigen::MatrixXd& x, Eigen::Index row) const;
};

struct ForestModel {
    std::vector<Tree> trees;
    std::vector<int> levels;  ///< per raw column; 0 = ordered splits
    int mtry = 1;
    std::size_t leaf_count() const;
};

class FittedModel {
public:
    LearnerKind kind() const { return kind_; }
    OutcomeTransform transform() const { return transform_; }
    std::size_t input_cols() const { return p_; }
    const std::optional<CvReport>& cv() const { return cv_; }
    const LinearModel* linear() const { return linear_.get(); }
    const ForestModel* forest() const { return forest_.get(); }
    double fixed_value() const { return fixed_value_; }
    std::string description() const { return description_; }

    /// Predictions on the transform scale (ln y for log_exp).
    Eigen::VectorXd predict_link(const Eigen::MatrixXd& x) const;

private:
    friend FittedModel fit(const LearnerSpec&, const Eigen::MatrixXd&, const Eigen::VectorXd&,
                           const std::vector<ColumnMeta>&, int);

    LearnerKind kind_ = LearnerKind::fixed;
    OutcomeTransform transform_ = OutcomeTransform::none;
    std::size_t p_ = 0;
    double fixed_value_ = 0.0;
    std::string description_;
    std::optional<CvReport> cv_;
    std::shared_ptr<const LinearModel> linear_;
    std::shared_ptr<const ForestModel> forest_;
};

/// Trains a learner. Column metadata marks categorical columns; when empty,
/// every column is treated as continuous.
FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                const std::vector<ColumnMeta>& columns = {}, int threads = 1);

/// Fit on a subset of rows of a dataset.
FittedModel fit_rows(const LearnerSpec& spec, const Dataset& data,
                     const std::vector<std::size_t>& rows, int threads = 1);

/// Level-scale predictions. Throws UsageError on a column-count mismatch.
Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& x);

/// Cross-validated RMSE along the penalty grid (ridge/lasso in cv mode).
CvReport cv_tune(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const std::vector<ColumnMeta>& columns = {});

/// Level-scale root mean squared error.
double rmse(const FittedModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

namespace detail {

LinearModel fit_linear(LearnerKind kind, const DesignLayout& layout, const SparseRows& rows,
                       const Eigen::VectorXd& t, double lambda);
/// Penalty of the theory mode on the correlation scale of the fit.
double theory_lambda(std::size_t n, std::size_t width, double outcome_sd);

CvReport cv_linear(LearnerKind kind, const PenaltySpec& penalty, const SparseRows& rows,
                   const Eigen::VectorXd& t);
Eigen::VectorXd predict_linear(const LinearModel& model, const SparseRows& rows);
ForestModel fit_forest(const ForestParams& params, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& t, const std::vector<int>& levels, int threads);
Eigen::VectorXd predict_forest(const ForestModel& model, const Eigen::MatrixXd& x);

}  // namespace detail

}  // namespace dustat
