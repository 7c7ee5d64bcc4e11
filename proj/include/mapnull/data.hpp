#pragma once

#include "mapnull/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace mapnull {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// n x p observation matrix with row and feature labels.
///
/// Construction validates n >= 2, p >= 2 and finiteness; a DataMatrix that
/// exists is always usable by the pipeline.
class DataMatrix {
public:
    explicit DataMatrix(Matrix values, std::vector<std::string> feature_names = {},
                        std::vector<std::string> row_ids = {})
        : values_(std::move(values))
        , feature_names_(std::move(feature_names))
        , row_ids_(std::move(row_ids))
    {
        require(values_.rows() >= 2, ErrorKind::input, "data matrix needs at least 2 rows");
        require(values_.cols() >= 2, ErrorKind::input, "data matrix needs at least 2 columns");
        for (Eigen::Index j = 0; j < values_.cols(); ++j)
            for (Eigen::Index i = 0; i < values_.rows(); ++i)
                if (!std::isfinite(values_(i, j)))
                    throw Error(ErrorKind::input, "non-finite entry at row " + std::to_string(i) +
                                                      ", column " + std::to_string(j));
        if (feature_names_.empty())
            for (Eigen::Index j = 0; j < values_.cols(); ++j)
                feature_names_.push_back("f" + std::to_string(j));
        if (row_ids_.empty())
            for (Eigen::Index i = 0; i < values_.rows(); ++i)
                row_ids_.push_back(std::to_string(i));
        require(feature_names_.size() == static_cast<std::size_t>(values_.cols()), ErrorKind::input,
                "feature name count does not match column count");
        require(row_ids_.size() == static_cast<std::size_t>(values_.rows()), ErrorKind::input,
                "row id count does not match row count");
    }

    Eigen::Index rows() const noexcept { return values_.rows(); }
    Eigen::Index cols() const noexcept { return values_.cols(); }
    const Matrix& values() const noexcept { return values_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }

private:
    Matrix values_;
    std::vector<std::string> feature_names_;
    std::vector<std::string> row_ids_;
};

/// Centers each column and divides by its sample standard deviation
/// (n - 1). Constant columns are centered only.
inline Matrix standardize_columns(const Matrix& x)
{
    Matrix out = x.rowwise() - x.colwise().mean();
    const double denom = static_cast<double>(x.rows() - 1);
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double sd = std::sqrt(out.col(j).squaredNorm() / denom);
        if (sd > 0)
            out.col(j) /= sd;
    }
    return out;
}

} // namespace mapnull
