#pragma once

// Numerical checks of the two limit results behind the test: covariance
// alone forces a positive population dissociation, and the label-permutation
// dissociation vanishes as n grows. Used by the test suite and the `oracle`
// subcommand; not needed to run the test itself.

#include "mapnull/data.hpp"
#include "mapnull/error.hpp"
#include "mapnull/numerics.hpp"
#include "mapnull/parallel.hpp"
#include "mapnull/rng.hpp"
#include "mapnull/teststat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace mapnull::verification {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Breakpoints b_1 < ... < b_{K-1} splitting the real line into K intervals
/// (-inf, b_1], (b_1, b_2], ..., (b_{K-1}, inf).
struct IntervalPartition {
    std::vector<double> breakpoints;

    int intervals() const { return static_cast<int>(breakpoints.size()) + 1; }

    void validate() const
    {
        require(!breakpoints.empty(), ErrorKind::parameter, "partition needs at least 2 intervals");
        for (std::size_t i = 1; i < breakpoints.size(); ++i)
            require(breakpoints[i] > breakpoints[i - 1], ErrorKind::parameter,
                    "breakpoints must be strictly increasing");
    }

    int locate(double f) const
    {
        return static_cast<int>(std::lower_bound(breakpoints.begin(), breakpoints.end(), f) - breakpoints.begin());
    }

    double lower(int k) const
    {
        return k == 0 ? -std::numeric_limits<double>::infinity() : breakpoints[static_cast<std::size_t>(k - 1)];
    }
    double upper(int k) const
    {
        return k == intervals() - 1 ? std::numeric_limits<double>::infinity()
                                    : breakpoints[static_cast<std::size_t>(k)];
    }
};

/// E[f | a < f <= b] for f ~ N(0, variance).
inline double truncated_normal_mean(double variance, double a, double b)
{
    const double s = std::sqrt(variance);
    const double za = a / s, zb = b / s;
    const double pa = std::isinf(za) ? 0.0 : normal_pdf(za);
    const double pb = std::isinf(zb) ? 0.0 : normal_pdf(zb);
    // Upper-tail probabilities keep precision for intervals far right.
    const double mass = za > 0 ? normal_cdf(-za) - normal_cdf(-zb) : normal_cdf(zb) - normal_cdf(za);
    require(mass > 0, ErrorKind::precision, "interval has zero probability");
    return s * (pa - pb) / mass;
}

/// Closed-form conditional means of the leading principal score on each interval.
inline std::vector<double> interval_means(double lambda1, const IntervalPartition& part)
{
    part.validate();
    std::vector<double> m;
    for (int k = 0; k < part.intervals(); ++k)
        m.push_back(truncated_normal_mean(lambda1, part.lower(k), part.upper(k)));
    return m;
}

struct PopulationCheck {
    double estimate = 0.0;       // MC estimate of the population dissociation
    double standard_error = 0.0; // batch means over 20 batches
    double bound = 0.0;          // closed-form lower bound
    double loading_a = 0.0;      // average leading-eigenvector loading on block A
    double loading_b = 0.0;
    std::vector<double> interval_probability;
    bool holds(double n_se = 3.0) const { return estimate >= bound - n_se * standard_error; }
};

namespace detail {

// D over intervals from per-interval sums of the two block averages.
inline double interval_dissociation(const std::vector<double>& sa, const std::vector<double>& sb,
                                    const std::vector<double>& cnt)
{
    double d = 0.0;
    const std::size_t k = cnt.size();
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) {
            if (cnt[i] == 0 || cnt[j] == 0)
                throw Error(ErrorKind::precision, "an interval received no samples; increase the sample count");
            d = std::max(d, std::abs(sa[i] / cnt[i] - sa[j] / cnt[j]));
            d = std::max(d, std::abs(sb[i] / cnt[i] - sb[j] / cnt[j]));
        }
    return d;
}

} // namespace detail

inline constexpr int kBatches = 20;

/// Leading eigenvector with its largest-magnitude entry positive.
inline Vector leading_direction(const CovModel& sigma)
{
    Matrix u = sigma.eigenvectors().col(0);
    canonicalize_signs(u);
    return u.col(0);
}

/// Monte Carlo population dissociation when communities are the intervals
/// of the leading principal score f = u1' X, X ~ N(0, Sigma), against the
/// lower bound max(|mean_A u1|, |mean_B u1|) * |E[f | I_max] - E[f | I_min]|.
/// Sign of u1 is irrelevant to both quantities up to interval order, so u1
/// is taken with a non-negative largest entry.
inline PopulationCheck population_dissociation_mc(const CovModel& sigma, const IntervalPartition& part,
                                                  const FeatureSplit& split, long samples, Rng& rng)
{
    part.validate();
    validate_split(split, sigma.dim());
    require(sigma.dim() >= 2, ErrorKind::parameter, "covariance must be at least 2 x 2");
    const double l1 = sigma.eigenvalues()(0), l2 = sigma.eigenvalues()(1);
    require(l1 > 0 && l1 - l2 > 1e-8 * l1, ErrorKind::parameter, "leading eigenvalue must be simple");
    require(samples >= 2L * kBatches, ErrorKind::parameter, "too few samples");

    const Vector u = leading_direction(sigma);
    PopulationCheck out;
    for (Index j : split.block_a)
        out.loading_a += u(j);
    for (Index j : split.block_b)
        out.loading_b += u(j);
    out.loading_a /= static_cast<double>(split.block_a.size());
    out.loading_b /= static_cast<double>(split.block_b.size());
    const auto means = interval_means(l1, part);
    out.bound = std::max(std::abs(out.loading_a), std::abs(out.loading_b)) * std::abs(means.back() - means.front());

    const int k = part.intervals();
    const auto zero = std::vector<double>(static_cast<std::size_t>(k), 0.0);
    std::vector<double> sa = zero, sb = zero, cnt = zero;
    std::vector<double> batch_d;
    const long per_batch = samples / kBatches;
    const long chunk = 50000;
    std::vector<double> bsa = zero, bsb = zero, bcnt = zero;
    long in_batch = 0;
    for (long done = 0; done < samples;) {
        const long m = std::min(chunk, samples - done);
        const DataMatrix x = sample_gaussian(sigma, std::max(m, 2L), SamplingStrategy::reduced_rank, rng);
        const auto [ya, yb] = block_scores(x, split);
        const Vector f = x.values() * u;
        for (long i = 0; i < m; ++i) {
            const int c = part.locate(f(i));
            bsa[c] += ya(i), bsb[c] += yb(i), bcnt[c] += 1;
            if (++in_batch == per_batch && static_cast<long>(batch_d.size()) < kBatches) {
                batch_d.push_back(detail::interval_dissociation(bsa, bsb, bcnt));
                for (int c2 = 0; c2 < k; ++c2) {
                    sa[c2] += bsa[c2], sb[c2] += bsb[c2], cnt[c2] += bcnt[c2];
                }
                bsa = zero, bsb = zero, bcnt = zero;
                in_batch = 0;
            }
        }
        done += m;
    }
    for (int c = 0; c < k; ++c)
        sa[c] += bsa[c], sb[c] += bsb[c], cnt[c] += bcnt[c];
    out.estimate = detail::interval_dissociation(sa, sb, cnt);
    out.standard_error = mean_sd(batch_d).second / std::sqrt(static_cast<double>(batch_d.size()));
    for (int c = 0; c < k; ++c)
        out.interval_probability.push_back(cnt[c] / static_cast<double>(samples));
    return out;
}

/// Community labels with sizes round(pi_k n), the last taking the remainder.
inline std::vector<int> proportional_labels(Index n, const std::vector<double>& pis)
{
    require(pis.size() >= 2, ErrorKind::parameter, "need at least 2 communities");
    double total = 0.0;
    for (double pi : pis) {
        require(pi > 0 && pi < 1, ErrorKind::parameter, "proportions must lie in (0, 1)");
        total += pi;
    }
    require(std::abs(total - 1.0) < 1e-9, ErrorKind::parameter, "proportions must sum to 1");
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k + 1 < pis.size(); ++k) {
        const auto size = static_cast<Index>(std::llround(pis[k] * static_cast<double>(n)));
        labels.insert(labels.end(), static_cast<std::size_t>(size), static_cast<int>(k));
    }
    require(static_cast<Index>(labels.size()) < n, ErrorKind::parameter, "n too small for these proportions");
    labels.resize(static_cast<std::size_t>(n), static_cast<int>(pis.size() - 1));
    return labels;
}

/// Permuted dissociation of fixed data: `n_perm` uniform relabelings of
/// `labels` (sizes preserved).
inline std::vector<double> permuted_dissociations(const DataMatrix& x, const std::vector<int>& labels,
                                                  const FeatureSplit& split, int n_perm, Rng& rng)
{
    const auto [ya, yb] = block_scores(x, split);
    std::vector<Index> members(static_cast<std::size_t>(x.rows()));
    for (Index i = 0; i < x.rows(); ++i)
        members[static_cast<std::size_t>(i)] = i;
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<int> perm = labels;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_perm));
    for (int b = 0; b < n_perm; ++b) {
        shuffle(perm, rng);
        out.push_back(dissociation_from_scores(ya, yb, members, perm, k));
    }
    return out;
}

inline double median(std::vector<double> v)
{
    require(!v.empty(), ErrorKind::parameter, "median of an empty sample");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1)
        return hi;
    return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
}

/// Ordinary least squares slope of y on x.
inline double ols_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    require(x.size() == y.size() && x.size() >= 2, ErrorKind::parameter, "need at least 2 points for a slope");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        mx += x[i], my += y[i];
    mx /= n, my /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
        sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
    return sxy / sxx;
}

struct DecayCheck {
    std::vector<Index> n_grid;
    std::vector<double> median_d;
    double slope = 0.0; // of log median D on log n
};

/// Median permuted D on N(0, Sigma) data over an increasing grid of n.
/// Grid point i draws its data and permutations from derive_seed(seed, i).
inline DecayCheck permutation_decay_check(const std::vector<Index>& n_grid, const std::vector<double>& pis,
                                          const CovModel& sigma, const FeatureSplit& split, int n_perm,
                                          std::uint64_t seed, int workers = 1)
{
    require(n_grid.size() >= 2, ErrorKind::parameter, "need at least 2 grid points");
    for (std::size_t i = 1; i < n_grid.size(); ++i)
        require(n_grid[i] > n_grid[i - 1], ErrorKind::parameter, "n_grid must be increasing");
    DecayCheck out;
    out.n_grid = n_grid;
    out.median_d.assign(n_grid.size(), 0.0);
    parallel_for(n_grid.size(), workers, [&](std::size_t i) {
        Rng rng(derive_seed(seed, i));
        const DataMatrix x = sample_gaussian(sigma, n_grid[i], SamplingStrategy::reduced_rank, rng);
        const auto labels = proportional_labels(n_grid[i], pis);
        out.median_d[i] = median(permuted_dissociations(x, labels, split, n_perm, rng));
    });
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        lx.push_back(std::log(static_cast<double>(n_grid[i])));
        ly.push_back(std::log(out.median_d[i]));
    }
    out.slope = ols_slope(lx, ly);
    return out;
}

struct VarianceCheck {
    double empirical = 0.0;
    double formula = 0.0; // (1/n_k - 1/n) S_A^2
    double relative_error() const { return std::abs(empirical - formula) / formula; }
};

/// Variance of one permuted community's block-A mean against the
/// sampling-without-replacement formula, S_A^2 the n - 1 variance of the
/// per-point block-A averages.
inline VarianceCheck finite_population_variance_check(const DataMatrix& x, Index community_size,
                                                      const FeatureSplit& split, int n_perm, Rng& rng)
{
    const Index n = x.rows();
    require(community_size >= 1 && community_size < n, ErrorKind::parameter, "community size must lie in [1, n)");
    const auto scores = block_scores(x, split);
    const Vector& ya = scores.first;
    std::vector<double> pop(ya.data(), ya.data() + n);
    const double s2 = std::pow(mean_sd(pop).second, 2);
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
        idx[static_cast<std::size_t>(i)] = i;
    std::vector<double> means;
    means.reserve(static_cast<std::size_t>(n_perm));
    for (int b = 0; b < n_perm; ++b) {
        // partial Fisher-Yates: the first community_size slots are a uniform sample
        double s = 0.0;
        for (Index i = 0; i < community_size; ++i) {
            const auto j = static_cast<std::size_t>(i) +
                           static_cast<std::size_t>(uniform_below(rng, static_cast<std::uint64_t>(n - i)));
            std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
            s += ya(idx[static_cast<std::size_t>(i)]);
        }
        means.push_back(s / static_cast<double>(community_size));
    }
    VarianceCheck out;
    out.empirical = std::pow(mean_sd(means).second, 2);
    out.formula = (1.0 / static_cast<double>(community_size) - 1.0 / static_cast<double>(n)) * s2;
    return out;
}

struct RegressionCheck {
    Vector slope;          // regression of X_j on f
    Vector expected;       // (u1)_j
    Vector standard_error; // OLS standard errors
    bool holds(double n_se = 3.0) const
    {
        // the absolute slack covers features that are exact multiples of f
        return ((slope - expected).cwiseAbs().array() <= n_se * standard_error.array() + 1e-12).all();
    }
};

/// E[X_j | f = c] = (u1)_j c: least-squares slope of each feature on the
/// leading principal score.
inline RegressionCheck gaussian_regression_check(const CovModel& sigma, Index n, Rng& rng)
{
    const Vector u = leading_direction(sigma);
    const DataMatrix x = sample_gaussian(sigma, n, SamplingStrategy::reduced_rank, rng);
    const Vector f = x.values() * u;
    const double fm = f.mean();
    const Vector fc = f.array() - fm;
    const double sff = fc.squaredNorm();
    RegressionCheck out;
    const Index p = x.cols();
    out.slope.resize(p);
    out.standard_error.resize(p);
    out.expected = u;
    for (Index j = 0; j < p; ++j) {
        const Vector xj = x.values().col(j).array() - x.values().col(j).mean();
        const double b = fc.dot(xj) / sff;
        const double rss = (xj - b * fc).squaredNorm();
        out.slope(j) = b;
        out.standard_error(j) = std::sqrt(rss / static_cast<double>(n - 2) / sff);
    }
    return out;
}

} // namespace mapnull::verification
