#pragma once

#include "dustat/data.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace dustat {

// Compressed sparse rows of an expanded design matrix.
struct SparseRows {
    std::size_t cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<int> index;
    std::vector<double> value;

    std::size_t rows() const { return row_ptr.size() - 1; }
    Eigen::MatrixXd to_dense() const;
};

// Maps raw covariate columns to linear-model features. Continuous and dummy
// columns pass through; a categorical column with m levels becomes m-1
// indicators (level 0 is the reference). With interaction_order 2 or 3 the
// products of indicators across distinct categorical columns are appended:
// main effects, then pairwise blocks (k, k') for k < k' with levels (r, s) in
// row-major order, then threewise blocks in the same order.
class DesignLayout {
public:
    DesignLayout() = default;
    DesignLayout(const std::vector<ColumnMeta>& columns, std::size_t raw_cols,
                 int interaction_order);

    std::size_t width() const { return width_; }
    std::size_t raw_cols() const { return raw_cols_; }
    int interaction_order() const { return order_; }
    const std::vector<std::string>& names() const { return names_; }

    SparseRows expand(const Eigen::MatrixXd& x) const;

private:
    struct Main {
        std::size_t column;
        int levels;  // 0 for pass-through columns
        std::size_t offset;
    };
    struct Block {
        std::vector<std::size_t> cats;  // positions in categorical_
        std::size_t offset;
    };

    std::size_t raw_cols_ = 0;
    int order_ = 1;
    std::size_t width_ = 0;
    std::vector<Main> main_;
    std::vector<std::size_t> categorical_;  // indices into main_
    std::vector<Block> blocks_;
    std::vector<std::string> names_;
};

}  // namespace dustat
