#pragma once

#include "mapnull/data.hpp"
#include "mapnull/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mapnull {

enum class Metric { euclidean, variance_normalized_euclidean, pearson_correlation };

inline const char* to_string(Metric m)
{
    switch (m) {
    case Metric::euclidean: return "euclidean";
    case Metric::variance_normalized_euclidean: return "variance_normalized_euclidean";
    case Metric::pearson_correlation: return "pearson_correlation";
    }
    return "unknown";
}

/// Symmetric, non-negative, zero-diagonal n x n distance matrix.
class DistMatrix {
public:
    DistMatrix(Matrix values, Metric metric)
        : values_(std::move(values))
        , metric_(metric)
    {
        require(values_.rows() == values_.cols(), ErrorKind::input, "distance matrix must be square");
    }

    Eigen::Index size() const noexcept { return values_.rows(); }
    const Matrix& values() const noexcept { return values_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
    Metric metric() const noexcept { return metric_; }

private:
    Matrix values_;
    Metric metric_;
};

namespace detail {

inline Matrix pairwise_euclidean(const Matrix& x)
{
    const Eigen::Index n = x.rows();
    Matrix d = Matrix::Zero(n, n);
    const Matrix xt = x.transpose(); // column access is contiguous
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = (xt.col(i) - xt.col(j)).norm();
            d(i, j) = v;
            d(j, i) = v;
        }
    return d;
}

} // namespace detail

/// Divides each column by its sample standard deviation; zero-variance
/// columns are a metric error.
inline Matrix variance_normalize(const DataMatrix& x)
{
    Matrix scaled = x.values();
    const Eigen::Index n = x.rows();
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double mean = scaled.col(j).mean();
        const double var = (scaled.col(j).array() - mean).square().sum() / static_cast<double>(n - 1);
        if (!(var > 0))
            throw Error(ErrorKind::metric, "feature '" + x.feature_names()[j] +
                                               "' has zero variance; variance-normalized distance undefined");
        scaled.col(j) /= std::sqrt(var);
    }
    return scaled;
}

inline DistMatrix distance_matrix(const DataMatrix& x, Metric metric)
{
    const Eigen::Index n = x.rows();
    switch (metric) {
    case Metric::euclidean:
        return DistMatrix(detail::pairwise_euclidean(x.values()), metric);
    case Metric::variance_normalized_euclidean:
        return DistMatrix(detail::pairwise_euclidean(variance_normalize(x)), metric);
    case Metric::pearson_correlation: {
        // Rows standardized across features; correlation is then an inner product.
        const double denom = static_cast<double>(x.cols() - 1);
        Matrix z = x.values();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mean = z.row(i).mean();
            z.row(i).array() -= mean;
            const double sd = std::sqrt(z.row(i).squaredNorm() / denom);
            if (!(sd > 0))
                throw Error(ErrorKind::metric, "row '" + x.row_ids()[i] +
                                                   "' has zero variance across features; correlation undefined");
            z.row(i) /= sd;
        }
        Matrix corr = (z * z.transpose()) / denom;
        Matrix d(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            d(j, j) = 0.0;
            for (Eigen::Index i = j + 1; i < n; ++i) {
                const double r = std::clamp(0.5 * (corr(i, j) + corr(j, i)), -1.0, 1.0);
                d(i, j) = 1.0 - r;
                d(j, i) = d(i, j);
            }
        }
        return DistMatrix(std::move(d), metric);
    }
    }
    throw Error(ErrorKind::parameter, "unknown metric");
}

} // namespace mapnull
