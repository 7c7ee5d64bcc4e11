#pragma once

#include "mapnull/community.hpp"
#include "mapnull/data.hpp"
#include "mapnull/error.hpp"
#include "mapnull/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

namespace mapnull {

enum class SplitMode { odd_even, random };

/// Two disjoint, balanced feature blocks covering every feature.
struct FeatureSplit {
    std::vector<Index> block_a;
    std::vector<Index> block_b;
    SplitMode origin = SplitMode::odd_even;
    std::uint64_t seed = 0;
};

/// odd_even: A = even 0-based indices, B = odd. random: a uniformly random
/// balanced split drawn from `seed` (A gets the extra feature when p is odd).
inline FeatureSplit make_split(Index p, SplitMode mode, std::uint64_t seed = 0)
{
    require(p >= 2, ErrorKind::parameter, "feature split needs at least 2 features");
    FeatureSplit s;
    s.origin = mode;
    s.seed = seed;
    if (mode == SplitMode::odd_even) {
        for (Index j = 0; j < p; ++j)
            (j % 2 == 0 ? s.block_a : s.block_b).push_back(j);
        return s;
    }
    std::vector<Index> idx(static_cast<std::size_t>(p));
    std::iota(idx.begin(), idx.end(), Index{0});
    Rng rng(seed);
    shuffle(idx, rng);
    const auto half = static_cast<std::size_t>((p + 1) / 2);
    s.block_a.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(half));
    s.block_b.assign(idx.begin() + static_cast<std::ptrdiff_t>(half), idx.end());
    std::sort(s.block_a.begin(), s.block_a.end());
    std::sort(s.block_b.begin(), s.block_b.end());
    return s;
}

inline void validate_split(const FeatureSplit& s, Index p)
{
    require(!s.block_a.empty() && !s.block_b.empty(), ErrorKind::parameter, "feature blocks must be nonempty");
    std::vector<int> seen(static_cast<std::size_t>(p), 0);
    for (Index j : s.block_a) {
        require(j >= 0 && j < p, ErrorKind::parameter, "feature index out of range in block A");
        ++seen[j];
    }
    for (Index j : s.block_b) {
        require(j >= 0 && j < p, ErrorKind::parameter, "feature index out of range in block B");
        ++seen[j];
    }
    for (int c : seen)
        require(c == 1, ErrorKind::parameter, "feature blocks must be disjoint and cover every feature");
}

struct PairGap {
    double block_a = 0.0;
    double block_b = 0.0;
};

struct DissociationResult {
    double d = 0.0;                     // all non-empty communities
    double d_excl_singletons = 0.0;     // communities with >= 2 points
    double d_max = 0.0;                 // single-feature maximum, all communities
    double d_max_excl_singletons = 0.0;
    std::map<std::pair<int, int>, PairGap> per_pair; // over the selected set
    std::optional<std::pair<int, int>> argmax_pair;
    int eligible = 0;                   // communities in the selected set
};

namespace detail {

inline double block_average(const Eigen::RowVectorXd& means, const std::vector<Index>& block)
{
    double s = 0.0;
    for (Index j : block)
        s += means(j);
    return s / static_cast<double>(block.size());
}

} // namespace detail

/// Block-mean dissociation of a point-to-community assignment.
///
/// Community k's block-A mean averages member values over members, then
/// over the features of A. D is the largest absolute difference of block
/// means over community pairs and both blocks; it is 0 with fewer than two
/// eligible communities. Points labelled kUnassigned are ignored. The
/// per-pair table and argmax refer to all communities, or only those with
/// at least two points when `exclude_singletons` is set.
inline DissociationResult dissociation(const DataMatrix& x, const std::vector<int>& assignment,
                                       const FeatureSplit& split, bool exclude_singletons = false)
{
    require(static_cast<Index>(assignment.size()) == x.rows(), ErrorKind::input,
            "assignment length must equal the number of rows");
    validate_split(split, x.cols());
    int k = 0;
    for (int c : assignment)
        k = std::max(k, c + 1);
    Matrix sums = Matrix::Zero(k, x.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < x.rows(); ++i) {
        const int c = assignment[static_cast<std::size_t>(i)];
        if (c < 0)
            continue;
        sums.row(c) += x.values().row(i);
        ++counts[c];
    }
    Matrix means = Matrix::Zero(k, x.cols());
    std::vector<double> mu_a(k, 0.0), mu_b(k, 0.0);
    for (int c = 0; c < k; ++c) {
        if (counts[c] == 0)
            continue;
        means.row(c) = sums.row(c) / static_cast<double>(counts[c]);
        mu_a[c] = detail::block_average(means.row(c), split.block_a);
        mu_b[c] = detail::block_average(means.row(c), split.block_b);
    }

    DissociationResult r;
    for (int a = 0; a < k; ++a) {
        if (counts[a] == 0)
            continue;
        for (int b = a + 1; b < k; ++b) {
            if (counts[b] == 0)
                continue;
            const double ga = std::abs(mu_a[a] - mu_a[b]);
            const double gb = std::abs(mu_b[a] - mu_b[b]);
            const double block = std::max(ga, gb);
            const double feat = (means.row(a) - means.row(b)).cwiseAbs().maxCoeff();
            const bool multi = counts[a] >= 2 && counts[b] >= 2;
            r.d = std::max(r.d, block);
            r.d_max = std::max(r.d_max, feat);
            if (multi) {
                r.d_excl_singletons = std::max(r.d_excl_singletons, block);
                r.d_max_excl_singletons = std::max(r.d_max_excl_singletons, feat);
            }
            if (!exclude_singletons || multi) {
                r.per_pair[{a, b}] = {ga, gb};
                if (!r.argmax_pair || block > std::max(r.per_pair[*r.argmax_pair].block_a,
                                                       r.per_pair[*r.argmax_pair].block_b))
                    r.argmax_pair = std::make_pair(a, b);
            }
        }
    }
    for (int c = 0; c < k; ++c)
        if (counts[c] >= (exclude_singletons ? 2 : 1))
            ++r.eligible;
    return r;
}

inline DissociationResult dissociation(const DataMatrix& x, const CommunityResult& communities,
                                       const FeatureSplit& split, bool exclude_singletons = false)
{
    return dissociation(x, communities.point_community, split, exclude_singletons);
}

/// Sample mean and n - 1 standard deviation.
inline std::pair<double, double> mean_sd(const std::vector<double>& v)
{
    require(v.size() >= 2, ErrorKind::degenerate_null, "need at least 2 samples for a standard deviation");
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double s : v)
        ss += (s - mean) * (s - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

/// (observed - mean) / sd of the null samples, sd with n - 1.
inline double zscore(double observed, const std::vector<double>& null_samples)
{
    const auto [mean, sd] = mean_sd(null_samples);
    if (!(sd > 0))
        throw Error(ErrorKind::degenerate_null, "null samples have zero standard deviation");
    return (observed - mean) / sd;
}

/// (1 + #{null >= observed}) / (1 + B).
inline double mc_pvalue(double observed, const std::vector<double>& null_samples)
{
    require(!null_samples.empty(), ErrorKind::parameter, "need at least one null sample");
    const auto exceed = std::count_if(null_samples.begin(), null_samples.end(),
                                      [observed](double s) { return s >= observed; });
    return (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(null_samples.size()));
}

struct PermutationResult {
    double observed = 0.0;
    double z = 0.0;
    std::vector<double> samples;
};

/// Per-point block averages (Y_A, Y_B); D depends on the data only through them.
inline std::pair<Vector, Vector> block_scores(const DataMatrix& x, const FeatureSplit& split)
{
    Vector ya = Vector::Zero(x.rows()), yb = Vector::Zero(x.rows());
    for (Index j : split.block_a)
        ya += x.values().col(j);
    for (Index j : split.block_b)
        yb += x.values().col(j);
    ya /= static_cast<double>(split.block_a.size());
    yb /= static_cast<double>(split.block_b.size());
    return {ya, yb};
}

/// D from per-point block scores of `members` under `labels` (0..k-1).
inline double dissociation_from_scores(const Vector& ya, const Vector& yb, const std::vector<Index>& members,
                                       const std::vector<int>& labels, int k)
{
    std::vector<double> sa(k, 0.0), sb(k, 0.0);
    std::vector<Index> cnt(k, 0);
    for (std::size_t i = 0; i < members.size(); ++i) {
        sa[labels[i]] += ya(members[i]);
        sb[labels[i]] += yb(members[i]);
        ++cnt[labels[i]];
    }
    double lo_a = 0, hi_a = 0, lo_b = 0, hi_b = 0;
    bool first = true;
    int used = 0;
    for (int c = 0; c < k; ++c) {
        if (cnt[c] == 0)
            continue;
        ++used;
        const double ma = sa[c] / static_cast<double>(cnt[c]);
        const double mb = sb[c] / static_cast<double>(cnt[c]);
        if (first) {
            lo_a = hi_a = ma;
            lo_b = hi_b = mb;
            first = false;
        } else {
            lo_a = std::min(lo_a, ma), hi_a = std::max(hi_a, ma);
            lo_b = std::min(lo_b, mb), hi_b = std::max(hi_b, mb);
        }
    }
    if (used < 2)
        return 0.0;
    return std::max(hi_a - lo_a, hi_b - lo_b);
}

/// Label-permutation baseline: size-preserving uniform reassignment of the
/// assigned points, D recomputed each time. With `exclude_singletons` only
/// points of multi-point communities take part.
inline PermutationResult permutation_null(const DataMatrix& x, const CommunityResult& result,
                                          const FeatureSplit& split, int n_perm, Rng& rng,
                                          bool exclude_singletons = false)
{
    require(n_perm >= 2, ErrorKind::parameter, "permutation null needs at least 2 permutations");
    validate_split(split, x.cols());
    std::vector<Index> members;
    std::vector<int> labels;
    for (std::size_t i = 0; i < result.point_community.size(); ++i) {
        const int c = result.point_community[i];
        if (c == kUnassigned)
            continue;
        if (exclude_singletons && result.sizes[c] < 2)
            continue;
        members.push_back(static_cast<Index>(i));
        labels.push_back(c);
    }
    int distinct = 0;
    for (std::size_t c = 0; c < result.sizes.size(); ++c)
        if (result.sizes[c] >= (exclude_singletons ? 2 : 1))
            ++distinct;
    require(distinct >= 2, ErrorKind::degenerate_null, "permutation null needs at least 2 communities");
    const auto [ya, yb] = block_scores(x, split);

    PermutationResult out;
    out.observed = dissociation_from_scores(ya, yb, members, labels, result.k);
    out.samples.reserve(static_cast<std::size_t>(n_perm));
    std::vector<int> perm = labels;
    for (int b = 0; b < n_perm; ++b) {
        shuffle(perm, rng);
        out.samples.push_back(dissociation_from_scores(ya, yb, members, perm, result.k));
    }
    out.z = zscore(out.observed, out.samples);
    return out;
}

} // namespace mapnull
