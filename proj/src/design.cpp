#include "dustat/design.hpp"

#include "dustat/error.hpp"

#include <cmath>

namespace dustat {

Eigen::MatrixXd SparseRows::to_dense() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows()),
                                                static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows(); ++r) {
        for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            out(static_cast<Eigen::Index>(r), index[k]) += value[k];
        }
    }
    return out;
}

DesignLayout::DesignLayout(const std::vector<ColumnMeta>& columns, std::size_t raw_cols,
                           int interaction_order)
    : raw_cols_(raw_cols), order_(interaction_order) {
    if (interaction_order < 1 || interaction_order > 3) {
        throw ConfigError("interaction order must be 1, 2 or 3, got " +
                          std::to_string(interaction_order));
    }
    if (!columns.empty() && columns.size() != raw_cols) {
        throw UsageError("column metadata does not match the covariate matrix");
    }
    for (std::size_t j = 0; j < raw_cols; ++j) {
        const bool categorical =
            !columns.empty() && columns[j].kind == ColumnMeta::Kind::categorical;
        const std::string name = columns.empty() ? "x" + std::to_string(j + 1) : columns[j].name;
        if (categorical) {
            const int m = columns[j].levels;
            categorical_.push_back(main_.size());
            main_.push_back({j, m, width_});
            for (int r = 1; r < m; ++r) {
                names_.push_back(name + "=" + std::to_string(r));
            }
            width_ += static_cast<std::size_t>(m - 1);
        } else {
            main_.push_back({j, 0, width_});
            names_.push_back(name);
            width_ += 1;
        }
    }
    auto level_name = [&](std::size_t cat, int r) {
        const auto& mm = main_[categorical_[cat]];
        return names_[mm.offset + static_cast<std::size_t>(r - 1)];
    };
    const std::size_t q = categorical_.size();
    if (order_ >= 2) {
        for (std::size_t a = 0; a < q; ++a) {
            for (std::size_t b = a + 1; b < q; ++b) {
                blocks_.push_back({{a, b}, width_});
                const int ma = main_[categorical_[a]].levels;
                const int mb = main_[categorical_[b]].levels;
                for (int r = 1; r < ma; ++r) {
                    for (int s = 1; s < mb; ++s) {
                        names_.push_back(level_name(a, r) + ":" + level_name(b, s));
                    }
                }
                width_ += static_cast<std::size_t>((ma - 1) * (mb - 1));
            }
        }
    }
    if (order_ >= 3) {
        for (std::size_t a = 0; a < q; ++a) {
            for (std::size_t b = a + 1; b < q; ++b) {
                for (std::size_t c = b + 1; c < q; ++c) {
                    blocks_.push_back({{a, b, c}, width_});
                    const int ma = main_[categorical_[a]].levels;
                    const int mb = main_[categorical_[b]].levels;
                    const int mc = main_[categorical_[c]].levels;
                    for (int r = 1; r < ma; ++r) {
                        for (int s = 1; s < mb; ++s) {
                            for (int t = 1; t < mc; ++t) {
                                names_.push_back(level_name(a, r) + ":" + level_name(b, s) + ":" +
                                                 level_name(c, t));
                            }
                        }
                    }
                    width_ += static_cast<std::size_t>((ma - 1) * (mb - 1) * (mc - 1));
                }
            }
        }
    }
}

SparseRows DesignLayout::expand(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != raw_cols_) {
        throw UsageError("expected " + std::to_string(raw_cols_) + " covariate columns, got " +
                         std::to_string(x.cols()));
    }
    SparseRows out;
    out.cols = width_;
    const auto n = static_cast<std::size_t>(x.rows());
    out.row_ptr.reserve(n + 1);
    out.index.reserve(n * (main_.size() + blocks_.size()));
    out.value.reserve(n * (main_.size() + blocks_.size()));
    std::vector<int> level(categorical_.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        std::size_t cat = 0;
        for (const auto& m : main_) {
            const double v = x(r, static_cast<Eigen::Index>(m.column));
            if (m.levels == 0) {
                if (v != 0.0) {
                    out.index.push_back(static_cast<int>(m.offset));
                    out.value.push_back(v);
                }
                continue;
            }
            const int code = static_cast<int>(std::lround(v));
            if (code < 0 || code >= m.levels) {
                throw UsageError("categorical code " + std::to_string(code) +
                                 " out of range at row " + std::to_string(i + 1));
            }
            level[cat++] = code;
            if (code > 0) {
                out.index.push_back(static_cast<int>(m.offset + static_cast<std::size_t>(code - 1)));
                out.value.push_back(1.0);
            }
        }
        for (const auto& b : blocks_) {
            std::size_t pos = 0;
            bool active = true;
            for (std::size_t c : b.cats) {
                const int code = level[c];
                if (code == 0) {
                    active = false;
                    break;
                }
                const int m = main_[categorical_[c]].levels;
                pos = pos * static_cast<std::size_t>(m - 1) + static_cast<std::size_t>(code - 1);
            }
            if (active) {
                out.index.push_back(static_cast<int>(b.offset + pos));
                out.value.push_back(1.0);
            }
        }
        out.row_ptr.push_back(out.index.size());
    }
    return out;
}

}  // namespace dustat
