#include "dustat/data.hpp"

#include "dustat/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace dustat {

ColumnMeta ColumnMeta::continuous_column(std::string name) {
    ColumnMeta meta;
    meta.name = std::move(name);
    return meta;
}

ColumnMeta ColumnMeta::categorical_column(std::string name, int levels) {
    ColumnMeta meta;
    meta.name = std::move(name);
    meta.kind = Kind::categorical;
    meta.levels = levels;
    return meta;
}

ColumnMeta ColumnMeta::dummy_column(std::string source, std::string level) {
    ColumnMeta meta;
    meta.name = source + "=" + level;
    meta.kind = Kind::dummy;
    meta.source = std::move(source);
    meta.level_label = std::move(level);
    return meta;
}

Dataset::Dataset(Eigen::VectorXd y, Eigen::MatrixXd x, std::vector<ColumnMeta> columns,
                 std::optional<Eigen::VectorXd> treatment)
    : y_(std::move(y)), x_(std::move(x)), d_(std::move(treatment)), columns_(std::move(columns)) {
    const auto n = y_.size();
    if (n < 2) {
        throw DataError("sample needs at least 2 rows, got " + std::to_string(n));
    }
    if (x_.rows() != n) {
        throw DataError("covariate matrix has " + std::to_string(x_.rows()) + " rows, outcome has " +
                        std::to_string(n));
    }
    if (static_cast<std::size_t>(x_.cols()) != columns_.size()) {
        throw DataError("column metadata count does not match covariate columns");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(y_[i])) {
            throw DataError("non-finite outcome at row " + std::to_string(i + 1));
        }
        for (Eigen::Index j = 0; j < x_.cols(); ++j) {
            if (!std::isfinite(x_(i, j))) {
                throw DataError("non-finite covariate at row " + std::to_string(i + 1) +
                                ", column '" + columns_[static_cast<std::size_t>(j)].name + "'");
            }
        }
    }
    for (std::size_t j = 0; j < columns_.size(); ++j) {
        const auto& meta = columns_[j];
        if (meta.kind != ColumnMeta::Kind::categorical) {
            continue;
        }
        if (meta.levels < 1) {
            throw DataError("categorical column '" + meta.name + "' needs at least one level");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = x_(i, static_cast<Eigen::Index>(j));
            if (v != std::floor(v) || v < 0 || v >= meta.levels) {
                throw DataError("categorical column '" + meta.name + "' has invalid code at row " +
                                std::to_string(i + 1));
            }
        }
    }
    if (d_) {
        if (d_->size() != n) {
            throw DataError("treatment length does not match outcome length");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = (*d_)[i];
            if (v != 0.0 && v != 1.0) {
                throw DataError("treatment must be 0/1, row " + std::to_string(i + 1));
            }
        }
    }
}

const Eigen::VectorXd& Dataset::d() const {
    if (!d_) {
        throw ConfigError("sample has no treatment column");
    }
    return *d_;
}

Dataset Dataset::with_outcome(Eigen::VectorXd y) const {
    return Dataset(std::move(y), x_, columns_, d_);
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(rows[r]));
    }
    return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out[static_cast<Eigen::Index>(r)] = v[static_cast<Eigen::Index>(rows[r])];
    }
    return out;
}

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

// RFC 4180 style split: quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted) {
        throw DataError("unterminated quote on line " + std::to_string(line_no));
    }
    fields.push_back(trim(field));
    return fields;
}

bool is_missing_token(const std::string& s) {
    static const std::set<std::string> tokens = {"", "NA", "N/A", "NaN", "nan", "NAN", "null",
                                                 "NULL", "."};
    return tokens.count(s) > 0;
}

std::optional<double> parse_number(const std::string& s) {
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (begin != end && *begin == '+') {
        ++begin;
    }
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end) {
        return std::nullopt;
    }
    return value;
}

double numeric_cell(const std::string& cell, std::size_t row, const std::string& column) {
    if (is_missing_token(cell)) {
        throw DataError("missing value in column '" + column + "' at row " + std::to_string(row));
    }
    const auto value = parse_number(cell);
    if (!value) {
        throw DataError("non-numeric value '" + cell + "' in column '" + column + "' at row " +
                        std::to_string(row));
    }
    if (!std::isfinite(*value)) {
        throw DataError("non-finite value in column '" + column + "' at row " + std::to_string(row));
    }
    return *value;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& outcome_col,
                 const std::optional<std::string>& treatment_col,
                 const std::vector<std::string>& covariate_cols, LoadOptions options) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("'" + path + "' is empty; a header row is required");
    }
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
        line.erase(0, 3);
    }
    const auto header = split_record(line, 1);
    std::map<std::string, std::size_t> index;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (!index.emplace(header[j], j).second) {
            throw DataError("duplicate column name '" + header[j] + "'");
        }
    }
    auto locate = [&](const std::string& name) {
        const auto it = index.find(name);
        if (it == index.end()) {
            throw ConfigError("column '" + name + "' not found in '" + path + "'");
        }
        return it->second;
    };
    const std::size_t y_idx = locate(outcome_col);
    std::optional<std::size_t> d_idx;
    if (treatment_col) {
        d_idx = locate(*treatment_col);
    }
    std::vector<std::string> cov_names = covariate_cols;
    if (cov_names.empty()) {
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j != y_idx && (!d_idx || j != *d_idx)) {
                cov_names.push_back(header[j]);
            }
        }
    }
    std::vector<std::size_t> cov_idx;
    for (const auto& name : cov_names) {
        cov_idx.push_back(locate(name));
    }
    for (const auto& name : options.factors) {
        if (std::find(cov_names.begin(), cov_names.end(), name) == cov_names.end()) {
            throw ConfigError("factor column '" + name + "' is not a covariate");
        }
    }

    std::vector<std::vector<std::string>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        auto fields = split_record(line, line_no);
        if (fields.size() != header.size()) {
            throw DataError("row " + std::to_string(rows.size() + 1) + " has " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(header.size()));
        }
        rows.push_back(std::move(fields));
    }
    const std::size_t n = rows.size();
    if (n < 2) {
        throw DataError("'" + path + "' has " + std::to_string(n) + " data rows; at least 2 needed");
    }

    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        y[static_cast<Eigen::Index>(i)] = numeric_cell(rows[i][y_idx], i + 1, outcome_col);
    }
    std::optional<Eigen::VectorXd> d;
    if (d_idx) {
        Eigen::VectorXd dv(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const double v = numeric_cell(rows[i][*d_idx], i + 1, *treatment_col);
            if (v != 0.0 && v != 1.0) {
                throw DataError("treatment column '" + *treatment_col + "' must be 0/1 at row " +
                                std::to_string(i + 1));
            }
            dv[static_cast<Eigen::Index>(i)] = v;
        }
        d = std::move(dv);
    }

    std::vector<Eigen::VectorXd> columns;
    std::vector<ColumnMeta> metas;
    for (std::size_t c = 0; c < cov_idx.size(); ++c) {
        const std::size_t j = cov_idx[c];
        const std::string& name = cov_names[c];
        bool numeric = true;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& cell = rows[i][j];
            if (is_missing_token(cell)) {
                throw DataError("missing value in column '" + name + "' at row " +
                                std::to_string(i + 1));
            }
            if (!parse_number(cell)) {
                numeric = false;
            }
        }
        const bool factor = std::find(options.factors.begin(), options.factors.end(), name) !=
                            options.factors.end();
        if (numeric && !factor) {
            Eigen::VectorXd col(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                col[static_cast<Eigen::Index>(i)] = numeric_cell(rows[i][j], i + 1, name);
            }
            columns.push_back(std::move(col));
            metas.push_back(ColumnMeta::continuous_column(name));
            continue;
        }
        // Levels in sorted order (numeric order for declared factors); the first is the reference.
        std::set<std::string> level_set;
        for (std::size_t i = 0; i < n; ++i) {
            level_set.insert(rows[i][j]);
        }
        std::vector<std::string> levels(level_set.begin(), level_set.end());
        if (numeric) {
            std::sort(levels.begin(), levels.end(), [](const std::string& a, const std::string& b) {
                return *parse_number(a) < *parse_number(b);
            });
        }
        std::map<std::string, int> code;
        for (std::size_t l = 0; l < levels.size(); ++l) {
            code[levels[l]] = static_cast<int>(l);
        }
        if (options.categorical_codes) {
            Eigen::VectorXd col(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                col[static_cast<Eigen::Index>(i)] = code[rows[i][j]];
            }
            columns.push_back(std::move(col));
            metas.push_back(ColumnMeta::categorical_column(name, static_cast<int>(levels.size())));
            continue;
        }
        for (std::size_t l = 1; l < levels.size(); ++l) {
            Eigen::VectorXd col = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
            for (std::size_t i = 0; i < n; ++i) {
                if (code[rows[i][j]] == static_cast<int>(l)) {
                    col[static_cast<Eigen::Index>(i)] = 1.0;
                }
            }
            columns.push_back(std::move(col));
            metas.push_back(ColumnMeta::dummy_column(name, levels[l]));
        }
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        x.col(static_cast<Eigen::Index>(c)) = columns[c];
    }
    return Dataset(std::move(y), std::move(x), std::move(metas), std::move(d));
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    return out + "\"";
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_csv(const Dataset& data, const std::string& path, const std::string& outcome_col,
               const std::string& treatment_col) {
    std::ofstream out(path);
    if (!out) {
        throw ConfigError("cannot write '" + path + "'");
    }
    out << csv_escape(outcome_col);
    if (data.has_treatment()) {
        out << ',' << csv_escape(treatment_col);
    }
    for (const auto& meta : data.columns()) {
        out << ',' << csv_escape(meta.name);
    }
    out << '\n';
    for (std::size_t i = 0; i < data.n(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out << format_number(data.y()[r]);
        if (data.has_treatment()) {
            out << ',' << format_number(data.d()[r]);
        }
        for (Eigen::Index j = 0; j < data.x().cols(); ++j) {
            out << ',' << format_number(data.x()(r, j));
        }
        out << '\n';
    }
}

std::vector<std::string> validate_for_iop(const Dataset& data) {
    const double mean = data.y().mean();
    if (!(mean > 0.0)) {
        throw DomainError("Gini denominator nonpositive: mean outcome is " + format_number(mean));
    }
    std::vector<std::string> warnings;
    const auto negatives = (data.y().array() < 0.0).count();
    if (negatives > 0) {
        warnings.push_back(std::to_string(negatives) +
                           " negative outcome value(s); the Gini ratio remains defined because the "
                           "mean outcome is positive");
    }
    return warnings;
}

}  // namespace dustat
