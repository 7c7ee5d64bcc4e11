#pragma once

#include "mapnull/data.hpp"
#include "mapnull/distances.hpp"
#include "mapnull/numerics.hpp"
#include "mapnull/rng.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace mapnull {

// Filter specifications. Axes are 1-based.
struct LinfCentralityFilter {};

struct PcoaFilter {
    int axis = 1;
};

struct KnnGeodesicMdsFilter {
    int k = 30;
    int axis = 1;
    bool square_entries = false; // false replicates cmdscale on raw path lengths
};

/// Values not derived from the data matrix (e.g. a clinical indicator).
/// They stay attached to their row index and receive fresh jitter per run.
struct ExternalFilter {
    std::vector<double> values;
    double jitter_sd = 0.0;
    std::string column;
};

using FilterSpec = std::variant<LinfCentralityFilter, PcoaFilter, KnnGeodesicMdsFilter, ExternalFilter>;

inline bool is_data_derived(const FilterSpec& f) { return !std::holds_alternative<ExternalFilter>(f); }

inline void validate_filter(const FilterSpec& spec, Eigen::Index n)
{
    std::visit(
        [n](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, PcoaFilter>) {
                require(f.axis >= 1, ErrorKind::parameter, "pcoa axis must be >= 1");
            } else if constexpr (std::is_same_v<T, KnnGeodesicMdsFilter>) {
                require(f.axis >= 1, ErrorKind::parameter, "knn_geodesic_mds axis must be >= 1");
                require(f.k >= 1, ErrorKind::parameter, "knn_geodesic_mds k must be >= 1");
            } else if constexpr (std::is_same_v<T, ExternalFilter>) {
                require(f.jitter_sd >= 0, ErrorKind::parameter, "external jitter_sd must be >= 0");
                require(static_cast<Eigen::Index>(f.values.size()) == n, ErrorKind::parameter,
                        "external filter '" + f.column + "' has " + std::to_string(f.values.size()) +
                            " values for " + std::to_string(n) + " rows");
            }
        },
        spec);
}

/// f(i) = max_j D(i, j).
inline Vector linf_centrality(const DistMatrix& d) { return d.values().rowwise().maxCoeff(); }

/// Principal coordinates of the Euclidean geometry of `features`.
///
/// For Euclidean distances -1/2 H (D o D) H equals Xc Xc^T, so when p < n the
/// coordinates come from the p x p scatter matrix instead of an n x n
/// eigensolve. Sign convention and positivity cutoff match classical_mds.
inline Matrix pcoa_euclidean(const Matrix& features, Eigen::Index k)
{
    require(k >= 1, ErrorKind::parameter, "target dimension must be at least 1");
    const Eigen::Index n = features.rows();
    const Eigen::Index p = features.cols();
    if (p >= n)
        return classical_mds(detail::pairwise_euclidean(features), k, true);

    const Matrix centered = features.rowwise() - features.colwise().mean();
    const Matrix scatter = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(scatter);
    require(solver.info() == Eigen::Success, ErrorKind::dimension, "PCoA eigendecomposition failed");
    const Vector& evals = solver.eigenvalues();
    const double scale = evals.cwiseAbs().maxCoeff();
    if (scale < 1e-300)
        return Matrix::Zero(n, k);
    const double tol = 1e-12 * scale;
    Matrix coords(n, k);
    Eigen::Index taken = 0, positive = 0;
    for (Eigen::Index idx = p - 1; idx >= 0; --idx) {
        if (evals(idx) <= tol)
            continue;
        ++positive;
        if (taken < k)
            coords.col(taken++) = centered * solver.eigenvectors().col(idx);
    }
    if (taken < k)
        throw Error(ErrorKind::dimension, "requested " + std::to_string(k) + " MDS dimensions but only " +
                                              std::to_string(positive) + " positive eigenvalues are available");
    canonicalize_signs(coords);
    return coords;
}

/// Directed k-nearest-neighbour shortest paths.
struct GeodesicPaths {
    Matrix lengths;          // row = source, column = target; generally asymmetric
    std::size_t replaced = 0; // unreachable entries set to 2 * max finite length
    double max_finite = 0.0;
};

/// Neighbours of i are the k closest j != i, ties to the lower index.
inline std::vector<std::vector<Eigen::Index>> knn_lists(const DistMatrix& d, int k)
{
    const Eigen::Index n = d.size();
    require(k >= 1, ErrorKind::parameter, "kNN k must be >= 1");
    require(k < n, ErrorKind::parameter, "kNN k = " + std::to_string(k) + " must be < n = " + std::to_string(n));
    std::vector<std::vector<Eigen::Index>> out(n);
    std::vector<Eigen::Index> order;
    for (Eigen::Index i = 0; i < n; ++i) {
        order.clear();
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i)
                order.push_back(j);
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
            return d(i, a) < d(i, b) || (d(i, a) == d(i, b) && a < b);
        });
        out[i].assign(order.begin(), order.begin() + k);
    }
    return out;
}

inline GeodesicPaths knn_geodesic_distances(const DistMatrix& d, int k)
{
    const Eigen::Index n = d.size();
    const auto nbrs = knn_lists(d, k);
    constexpr double inf = std::numeric_limits<double>::infinity();
    GeodesicPaths out;
    out.lengths = Matrix::Constant(n, n, inf);

    using Item = std::pair<double, Eigen::Index>;
    std::vector<double> dist(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), inf);
        dist[s] = 0.0;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        heap.emplace(0.0, s);
        while (!heap.empty()) {
            const auto [du, u] = heap.top();
            heap.pop();
            if (du > dist[u])
                continue;
            for (Eigen::Index v : nbrs[u]) {
                const double cand = du + d(u, v);
                if (cand < dist[v]) {
                    dist[v] = cand;
                    heap.emplace(cand, v);
                }
            }
        }
        for (Eigen::Index t = 0; t < n; ++t)
            out.lengths(s, t) = dist[t];
    }

    double max_finite = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::isfinite(out.lengths(i, j)))
                max_finite = std::max(max_finite, out.lengths(i, j));
    out.max_finite = max_finite;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i)
            if (!std::isfinite(out.lengths(i, j))) {
                out.lengths(i, j) = 2.0 * max_finite;
                ++out.replaced;
            }
    return out;
}

/// Classical MDS of kNN shortest-path lengths under `d`.
inline Matrix knn_geodesic_mds(const DistMatrix& d, int k, Eigen::Index dims = 2, bool square_entries = false)
{
    return classical_mds(knn_geodesic_distances(d, k).lengths, dims, square_entries);
}

/// kNN-geodesic MDS under Pearson correlation distance.
inline Matrix knn_geodesic_mds_filter(const DataMatrix& x, int k, Eigen::Index dims = 2)
{
    require(k < x.rows(), ErrorKind::parameter,
            "kNN k = " + std::to_string(k) + " must be < n = " + std::to_string(x.rows()));
    return knn_geodesic_mds(distance_matrix(x, Metric::pearson_correlation), k, dims, false);
}

/// values + iid N(0, jitter_sd^2); jitter_sd = 0 returns the input exactly.
inline Vector external_filter(const std::vector<double>& values, double jitter_sd, Rng& rng)
{
    require(jitter_sd >= 0, ErrorKind::parameter, "jitter_sd must be >= 0");
    Vector out = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (jitter_sd == 0.0)
        return out;
    std::normal_distribution<double> normal(0.0, jitter_sd);
    for (Eigen::Index i = 0; i < out.size(); ++i)
        out(i) += normal(rng);
    return out;
}

/// Evaluates every filter spec into an n x d matrix (one column per spec).
///
/// PCoA axes under a Euclidean-type metric go through pcoa_euclidean; under
/// any other metric they come from classical_mds on `d`. kNN geodesic filters
/// use `d` as the base distance. Embeddings are computed once per kind at the
/// largest requested axis.
inline Matrix compute_filters(const DataMatrix& x, const DistMatrix& d, const std::vector<FilterSpec>& specs,
                              Rng& jitter_rng)
{
    require(!specs.empty(), ErrorKind::parameter, "at least one filter is required");
    const Eigen::Index n = x.rows();
    int pcoa_axes = 0;
    int knn_axes = 0;
    const KnnGeodesicMdsFilter* knn = nullptr;
    for (const auto& s : specs) {
        validate_filter(s, n);
        if (const auto* p = std::get_if<PcoaFilter>(&s))
            pcoa_axes = std::max(pcoa_axes, p->axis);
        if (const auto* g = std::get_if<KnnGeodesicMdsFilter>(&s)) {
            if (knn)
                require(knn->k == g->k && knn->square_entries == g->square_entries, ErrorKind::parameter,
                        "all knn_geodesic_mds filters must share k and square_entries");
            knn = g;
            knn_axes = std::max(knn_axes, g->axis);
        }
    }

    Matrix pcoa, geo;
    if (pcoa_axes > 0) {
        switch (d.metric()) {
        case Metric::euclidean: pcoa = pcoa_euclidean(x.values(), pcoa_axes); break;
        case Metric::variance_normalized_euclidean: pcoa = pcoa_euclidean(variance_normalize(x), pcoa_axes); break;
        default: pcoa = classical_mds(d.values(), pcoa_axes, true); break;
        }
    }
    if (knn)
        geo = knn_geodesic_mds(d, knn->k, knn_axes, knn->square_entries);

    Matrix out(n, static_cast<Eigen::Index>(specs.size()));
    for (std::size_t c = 0; c < specs.size(); ++c) {
        const auto col = static_cast<Eigen::Index>(c);
        std::visit(
            [&](const auto& f) {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, LinfCentralityFilter>)
                    out.col(col) = linf_centrality(d);
                else if constexpr (std::is_same_v<T, PcoaFilter>)
                    out.col(col) = pcoa.col(f.axis - 1);
                else if constexpr (std::is_same_v<T, KnnGeodesicMdsFilter>)
                    out.col(col) = geo.col(f.axis - 1);
                else
                    out.col(col) = external_filter(f.values, f.jitter_sd, jitter_rng);
            },
            specs[c]);
    }
    return out;
}

} // namespace mapnull
