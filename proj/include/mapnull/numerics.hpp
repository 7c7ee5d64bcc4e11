#pragma once

#include "mapnull/data.hpp"
#include "mapnull/error.hpp"
#include "mapnull/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace mapnull {

/// Relative eigenvalue cutoff for the reduced-rank sampler: lambda_i is
/// retained iff lambda_i > kRetainRelTol * lambda_max.
inline constexpr double kRetainRelTol = 1e-12;
/// Ridge applies when the smallest eigenvalue falls below this.
inline constexpr double kRidgeTrigger = 1e-10;
/// Floor added on top of max(0, -lambda_min).
inline constexpr double kRidgeFloor = 1e-6;

enum class SamplingStrategy { ridge, reduced_rank };

/// Covariance matrix together with its eigendecomposition.
///
/// Eigenvalues are stored non-increasing with matching eigenvector columns.
/// `epsilon` records any ridge shift already folded into `matrix`.
class CovModel {
public:
    /// Decomposes a symmetric matrix. Only the lower triangle is read by the
    /// solver; the stored matrix is symmetrized explicitly.
    static CovModel from_matrix(const Matrix& m, double epsilon = 0.0)
    {
        require(m.rows() == m.cols() && m.rows() >= 1, ErrorKind::input, "covariance must be square");
        CovModel c;
        c.matrix_ = 0.5 * (m + m.transpose());
        c.epsilon_ = epsilon;
        Eigen::SelfAdjointEigenSolver<Matrix> solver(c.matrix_);
        require(solver.info() == Eigen::Success, ErrorKind::degenerate_covariance,
                "eigendecomposition of covariance failed");
        const Eigen::Index p = m.rows();
        c.eigenvalues_.resize(p);
        c.eigenvectors_.resize(p, p);
        // Eigen returns ascending order.
        for (Eigen::Index i = 0; i < p; ++i) {
            c.eigenvalues_(i) = solver.eigenvalues()(p - 1 - i);
            c.eigenvectors_.col(i) = solver.eigenvectors().col(p - 1 - i);
        }
        c.update_rank();
        return c;
    }

    Eigen::Index dim() const noexcept { return matrix_.rows(); }
    const Matrix& matrix() const noexcept { return matrix_; }
    double epsilon() const noexcept { return epsilon_; }
    const Vector& eigenvalues() const noexcept { return eigenvalues_; }
    const Matrix& eigenvectors() const noexcept { return eigenvectors_; }
    /// Number of eigenvalues above kRetainRelTol * lambda_max.
    Eigen::Index effective_rank() const noexcept { return rank_; }
    double min_eigenvalue() const { return eigenvalues_(eigenvalues_.size() - 1); }

    /// Same eigenvectors, eigenvalues and matrix shifted by `eps`.
    CovModel shifted(double eps) const
    {
        CovModel c = *this;
        c.matrix_.diagonal().array() += eps;
        c.eigenvalues_.array() += eps;
        c.epsilon_ = epsilon_ + eps;
        c.update_rank();
        return c;
    }

private:
    void update_rank()
    {
        rank_ = 0;
        const double top = eigenvalues_.size() > 0 ? eigenvalues_(0) : 0.0;
        if (top <= 0)
            return;
        for (Eigen::Index i = 0; i < eigenvalues_.size(); ++i)
            if (eigenvalues_(i) > kRetainRelTol * top)
                ++rank_;
    }

    Matrix matrix_;
    double epsilon_ = 0.0;
    Vector eigenvalues_;
    Matrix eigenvectors_;
    Eigen::Index rank_ = 0;
};

/// Unbiased sample covariance (X - mean)^T (X - mean) / (n - 1).
inline CovModel sample_covariance(const DataMatrix& x)
{
    const Matrix centered = x.values().rowwise() - x.values().colwise().mean();
    Matrix cov = (centered.adjoint() * centered) / static_cast<double>(x.rows() - 1);
    return CovModel::from_matrix(cov);
}

/// Returns `c` unchanged when lambda_min >= 1e-10, otherwise adds
/// eps * I with eps = max(0, -lambda_min) + 1e-6.
inline CovModel ridge_regularize(const CovModel& c)
{
    const double lmin = c.min_eigenvalue();
    if (lmin >= kRidgeTrigger)
        return c;
    return c.shifted(std::max(0.0, -lmin) + kRidgeFloor);
}

/// n iid draws from N(0, C). Rows are Z * Lambda^{1/2} * V^T where the
/// ridge strategy uses every eigenpair (C must be positive definite) and the
/// reduced-rank strategy only the retained ones.
inline DataMatrix sample_gaussian(const CovModel& c, Eigen::Index n, SamplingStrategy strategy, Rng& rng)
{
    require(n >= 2, ErrorKind::parameter, "sample size must be at least 2");
    Eigen::Index r = 0;
    if (strategy == SamplingStrategy::ridge) {
        require(c.min_eigenvalue() > 0, ErrorKind::degenerate_covariance,
                "ridge sampling needs a positive definite covariance (min eigenvalue " +
                    std::to_string(c.min_eigenvalue()) + ")");
        r = c.dim();
    } else {
        r = c.effective_rank();
        require(r > 0, ErrorKind::degenerate_covariance, "covariance has zero retained rank");
    }
    Matrix z(n, r);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < r; ++k)
            z(i, k) = normal(rng);
    const Vector scale = c.eigenvalues().head(r).cwiseSqrt();
    Matrix loadings = c.eigenvectors().leftCols(r) * scale.asDiagonal(); // p x r
    Matrix out = z * loadings.transpose();
    return DataMatrix(std::move(out));
}

/// Flips each column so its largest-magnitude entry (first on ties) is positive.
inline void canonicalize_signs(Matrix& coords)
{
    for (Eigen::Index j = 0; j < coords.cols(); ++j) {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < coords.rows(); ++i)
            if (std::abs(coords(i, j)) > std::abs(coords(best, j)))
                best = i;
        if (coords.rows() > 0 && coords(best, j) < 0)
            coords.col(j) = -coords.col(j);
    }
}

/// Classical (Torgerson) MDS.
///
/// B = -1/2 H M H with M = D o D when `square_entries` is set and M = D
/// otherwise; B is symmetrized before the eigensolve so asymmetric inputs
/// (directed path lengths) are accepted. Returns n x k coordinates along the
/// k largest positive eigenvalues, each column scaled by sqrt(lambda).
/// An all-zero B yields all-zero coordinates.
inline Matrix classical_mds(const Matrix& d, Eigen::Index k, bool square_entries)
{
    require(d.rows() == d.cols(), ErrorKind::input, "dissimilarity matrix must be square");
    require(k >= 1, ErrorKind::parameter, "target dimension must be at least 1");
    require(d.allFinite(), ErrorKind::input, "dissimilarity matrix has non-finite entries");
    const Eigen::Index n = d.rows();

    Matrix m = square_entries ? Matrix(d.cwiseProduct(d)) : d;
    // -1/2 H M H via row/column/grand means.
    const Vector row_mean = m.rowwise().mean();
    const Eigen::RowVectorXd col_mean = m.colwise().mean();
    const double grand = m.mean();
    Matrix b(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            b(i, j) = -0.5 * (m(i, j) - row_mean(i) - col_mean(j) + grand);
    b = 0.5 * (b + b.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> solver(b);
    require(solver.info() == Eigen::Success, ErrorKind::dimension, "MDS eigendecomposition failed");
    const Vector& evals = solver.eigenvalues(); // ascending
    const double scale = evals.cwiseAbs().maxCoeff();
    if (scale == 0.0 || scale < 1e-300)
        return Matrix::Zero(n, k);
    const double tol = 1e-12 * scale;

    Matrix coords(n, k);
    Eigen::Index taken = 0;
    Eigen::Index positive = 0;
    for (Eigen::Index idx = n - 1; idx >= 0; --idx) {
        const double lambda = evals(idx);
        if (lambda <= tol)
            continue;
        ++positive;
        if (taken < k) {
            coords.col(taken) = solver.eigenvectors().col(idx) * std::sqrt(lambda);
            ++taken;
        }
    }
    if (taken < k)
        throw Error(ErrorKind::dimension, "requested " + std::to_string(k) + " MDS dimensions but only " +
                                              std::to_string(positive) + " positive eigenvalues are available");
    canonicalize_signs(coords);
    return coords;
}

} // namespace mapnull
