#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace dustat {

/// How a covariate column is stored in Dataset::x().
struct ColumnMeta {
    enum class Kind {
        continuous,   ///< real-valued
        categorical,  ///< integer codes 0..levels-1, level 0 is the reference
        dummy,        ///< 0/1 indicator expanded from a categorical column
    };

    std::string name;
    Kind kind = Kind::continuous;
    int levels = 0;           ///< categorical only
    std::string source;       ///< dummy only: original column name
    std::string level_label;  ///< dummy only: level this indicator encodes

    static ColumnMeta continuous_column(std::string name);
    static ColumnMeta categorical_column(std::string name, int levels);
    static ColumnMeta dummy_column(std::string source, std::string level);
};

/// Optional transform applied by learners before fitting: fit on ln(y) and
/// exponentiate predictions. Estimators always see level-scale outcomes.
enum class OutcomeTransform { none, log_exp };

// An immutable i.i.d. sample W_i = (Y_i, [D_i,] X_i). Construction validates
// every invariant; afterwards the object is safe to share across threads.
class Dataset {
public:
    Dataset(Eigen::VectorXd y, Eigen::MatrixXd x, std::vector<ColumnMeta> columns,
            std::optional<Eigen::VectorXd> treatment = std::nullopt);

    std::size_t n() const { return static_cast<std::size_t>(y_.size()); }
    std::size_t p() const { return static_cast<std::size_t>(x_.cols()); }

    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::MatrixXd& x() const { return x_; }
    const std::vector<ColumnMeta>& columns() const { return columns_; }
    bool has_treatment() const { return d_.has_value(); }
    /// Throws ConfigError when the sample has no treatment column.
    const Eigen::VectorXd& d() const;

    /// Copy of this sample with a different outcome vector.
    Dataset with_outcome(Eigen::VectorXd y) const;

private:
    Eigen::VectorXd y_;
    Eigen::MatrixXd x_;
    std::optional<Eigen::VectorXd> d_;
    std::vector<ColumnMeta> columns_;
};

struct LoadOptions {
    /// Keep string columns as integer codes (kind categorical) instead of
    /// expanding them to reference-level dummies.
    bool categorical_codes = false;
    /// Numeric columns to treat as categorical, like string columns.
    std::vector<std::string> factors;
};

/// Reads a comma-separated file with a header row. An empty covariate list
/// selects every column other than the outcome and treatment.
Dataset load_csv(const std::string& path, const std::string& outcome_col,
                 const std::optional<std::string>& treatment_col,
                 const std::vector<std::string>& covariate_cols, LoadOptions options = {});

/// Writes y, optional d, then every covariate column with 17 significant digits.
void write_csv(const Dataset& data, const std::string& path,
               const std::string& outcome_col = "y", const std::string& treatment_col = "d");

/// Checks that the Gini denominator is positive. Returns warnings (negative
/// outcomes are allowed); throws DomainError when mean(y) <= 0.
std::vector<std::string> validate_for_iop(const Dataset& data);

/// Rows of x restricted to `rows`.
Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows);
Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows);

}  // namespace dustat
