#pragma once

#include "mapnull/data.hpp"
#include "mapnull/distances.hpp"
#include "mapnull/error.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace mapnull {


enum class CoverMode { equalized, fixed_width };

/// Cover and clustering parameters shared by the observed run and every
/// null replicate.
struct MapperConfig {
    std::vector<int> resolutions{15, 15};
    std::vector<double> gains{2.0, 2.0};  // equalized mode, one per filter
    CoverMode cover_mode = CoverMode::equalized;
    double overlap_fraction = 0.5;        // fixed-width mode
    int histogram_bins = 10;

    void validate(std::size_t filter_dims) const
    {
        require(filter_dims == 1 || filter_dims == 2, ErrorKind::parameter,
                "Mapper supports 1 or 2 filter dimensions, got " + std::to_string(filter_dims));
        require(resolutions.size() == filter_dims, ErrorKind::parameter,
                "need one resolution per filter dimension");
        for (std::size_t i = 0; i < resolutions.size(); ++i)
            require(resolutions[i] >= 1, ErrorKind::parameter,
                    "resolution[" + std::to_string(i) + "] must be >= 1");
        if (cover_mode == CoverMode::equalized) {
            require(gains.size() == filter_dims, ErrorKind::parameter, "need one gain per filter dimension");
            for (std::size_t i = 0; i < gains.size(); ++i)
                require(std::isfinite(gains[i]) && gains[i] >= 1.0, ErrorKind::parameter,
                        "gain[" + std::to_string(i) + "] must be >= 1 in equalized mode");
        } else {
            require(overlap_fraction >= 0.0 && overlap_fraction < 1.0, ErrorKind::parameter,
                    "overlap_fraction must lie in [0, 1)");
        }
        require(histogram_bins >= 2, ErrorKind::parameter, "histogram_bins must be >= 2");
    }

    /// Canonical text form; equal configs give equal fingerprints.
    std::string fingerprint() const
    {
        std::ostringstream os;
        os.precision(17);
        os << (cover_mode == CoverMode::equalized ? "equalized" : "fixed_width") << ";N=";
        for (int r : resolutions)
            os << r << ',';
        if (cover_mode == CoverMode::equalized) {
            os << ";g=";
            for (double g : gains)
                os << g << ',';
        } else {
            os << ";o=" << overlap_fraction;
        }
        os << ";bins=" << histogram_bins;
        return os.str();
    }
};

struct CoverCell {
    std::vector<int> tag;       // interval index per filter dimension
    std::vector<Index> points;  // ascending
};

namespace detail {

/// Type-7 (linear interpolation) empirical quantile of sorted values.
inline double quantile_sorted(const std::vector<double>& sorted, double level)
{
    const double h = (static_cast<double>(sorted.size()) - 1.0) * level;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size())
        return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

/// Closed [lo, hi] value ranges of the intervals along one filter.
inline std::vector<std::pair<double, double>> intervals_for(const Vector& f, int resolution, double gain,
                                                            const MapperConfig& cfg, std::size_t dim)
{
    std::vector<double> sorted(f.data(), f.data() + f.size());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front(), hi = sorted.back();
    if (!(hi > lo))
        throw Error(ErrorKind::degenerate_filter,
                    "filter dimension " + std::to_string(dim) + " is constant; cannot build a cover");
    std::vector<std::pair<double, double>> out;
    const double n_int = resolution;
    if (cfg.cover_mode == CoverMode::equalized) {
        for (int i = 0; i < resolution; ++i) {
            const double a = static_cast<double>(i) / n_int;
            const double b = std::min(1.0, (static_cast<double>(i) + gain) / n_int);
            out.emplace_back(quantile_sorted(sorted, a), quantile_sorted(sorted, b));
        }
    } else {
        const double o = cfg.overlap_fraction;
        const double len = (hi - lo) / (n_int - (n_int - 1.0) * o);
        const double step = len * (1.0 - o);
        for (int i = 0; i < resolution; ++i) {
            const double start = i == 0 ? lo : lo + i * step;
            const double end = i == resolution - 1 ? hi : start + len;
            out.emplace_back(start, end);
        }
    }
    return out;
}

} // namespace detail

/// Builds the product cover of the filter range and pulls it back to point
/// index sets. Cells are ordered lexicographically by tag; empty cells are
/// dropped.
inline std::vector<CoverCell> build_cover(const Matrix& filters, const MapperConfig& cfg)
{
    const auto dims = static_cast<std::size_t>(filters.cols());
    cfg.validate(dims);
    require(filters.allFinite(), ErrorKind::input, "filter values must be finite");
    const Index n = filters.rows();

    // members[d][i] = ascending points inside interval i of dimension d
    std::vector<std::vector<std::vector<Index>>> members(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        const Vector f = filters.col(static_cast<Index>(d));
        const double gain = cfg.cover_mode == CoverMode::equalized ? cfg.gains[d] : 0.0;
        const auto ranges = detail::intervals_for(f, cfg.resolutions[d], gain, cfg, d);
        members[d].resize(ranges.size());
        for (std::size_t i = 0; i < ranges.size(); ++i)
            for (Index p = 0; p < n; ++p)
                if (f(p) >= ranges[i].first && f(p) <= ranges[i].second)
                    members[d][i].push_back(p);
    }

    std::vector<CoverCell> cells;
    if (dims == 1) {
        for (std::size_t i = 0; i < members[0].size(); ++i)
            if (!members[0][i].empty())
                cells.push_back({{static_cast<int>(i)}, members[0][i]});
        return cells;
    }
    for (std::size_t i = 0; i < members[0].size(); ++i)
        for (std::size_t j = 0; j < members[1].size(); ++j) {
            CoverCell cell{{static_cast<int>(i), static_cast<int>(j)}, {}};
            std::set_intersection(members[0][i].begin(), members[0][i].end(), members[1][j].begin(),
                                  members[1][j].end(), std::back_inserter(cell.points));
            if (!cell.points.empty())
                cells.push_back(std::move(cell));
        }
    return cells;
}

/// Single-linkage merge heights (minimum spanning tree edges), Prim O(m^2).
/// Returns (height, u, v) triples in local indices.
struct MergeEdge {
    double height;
    Index u, v;
};

inline std::vector<MergeEdge> single_linkage_edges(const Matrix& d)
{
    const Index m = d.rows();
    std::vector<MergeEdge> edges;
    if (m < 2)
        return edges;
    std::vector<bool> in_tree(m, false);
    std::vector<double> best(m, std::numeric_limits<double>::infinity());
    std::vector<Index> parent(m, 0);
    in_tree[0] = true;
    for (Index v = 1; v < m; ++v) {
        best[v] = d(0, v);
        parent[v] = 0;
    }
    for (Index step = 1; step < m; ++step) {
        Index next = -1;
        for (Index v = 0; v < m; ++v)
            if (!in_tree[v] && (next < 0 || best[v] < best[next]))
                next = v;
        in_tree[next] = true;
        edges.push_back({best[next], parent[next], next});
        for (Index v = 0; v < m; ++v)
            if (!in_tree[v] && d(next, v) < best[v]) {
                best[v] = d(next, v);
                parent[v] = next;
            }
    }
    return edges;
}

/// Splits one preimage by cutting its single-linkage dendrogram at the first
/// gap of a merge-height histogram.
///
/// The histogram has `histogram_bins` equal-width bins over [0, max height].
/// A gap is an empty bin above the lowest occupied bin; the cut joins every
/// merge whose height falls below that bin. No gap yields one cluster.
/// Clusters are local indices, each ascending, ordered by smallest member.
inline std::vector<std::vector<Index>> cluster_preimage(const Matrix& d_sub, int histogram_bins)
{
    require(histogram_bins >= 2, ErrorKind::parameter, "histogram_bins must be >= 2");
    const Index m = d_sub.rows();
    require(m >= 1, ErrorKind::input, "preimage must be nonempty");
    std::vector<Index> all(m);
    std::iota(all.begin(), all.end(), Index{0});
    if (m == 1)
        return {all};

    const auto merges = single_linkage_edges(d_sub);
    double hmax = 0.0;
    for (const auto& e : merges)
        hmax = std::max(hmax, e.height);
    if (!(hmax > 0))
        return {all};

    auto bin_of = [&](double h) {
        const auto b = static_cast<int>(std::floor(h / hmax * histogram_bins));
        return std::clamp(b, 0, histogram_bins - 1);
    };
    std::vector<int> counts(histogram_bins, 0);
    for (const auto& e : merges)
        ++counts[bin_of(e.height)];
    int lowest = 0;
    while (counts[lowest] == 0)
        ++lowest;
    int gap = -1;
    for (int b = lowest + 1; b < histogram_bins; ++b)
        if (counts[b] == 0) {
            gap = b;
            break;
        }
    if (gap < 0)
        return {all};

    // Union-find over merges below the gap.
    std::vector<Index> root(m);
    std::iota(root.begin(), root.end(), Index{0});
    auto find = [&](Index a) {
        while (root[a] != a)
            a = root[a] = root[root[a]];
        return a;
    };
    for (const auto& e : merges)
        if (bin_of(e.height) < gap) {
            const Index a = find(e.u), b = find(e.v);
            if (a != b)
                root[std::max(a, b)] = std::min(a, b);
        }
    std::vector<std::vector<Index>> clusters;
    std::vector<Index> slot(m, -1);
    for (Index i = 0; i < m; ++i) {
        const Index r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<Index>(clusters.size());
            clusters.emplace_back();
        }
        clusters[slot[r]].push_back(i);
    }
    return clusters;
}

struct MapperVertex {
    std::vector<Index> points; // ascending global point indices
    std::size_t cell = 0;      // position in the cover's cell list
    std::vector<int> cell_tag;
    int cluster = 0;           // cluster ordinal within the cell
};

struct MapperGraph {
    std::vector<MapperVertex> vertices;
    std::vector<std::pair<int, int>> edges; // u < v, lexicographically sorted
    Index n_points = 0;
    std::string config_fingerprint;

    std::size_t vertex_count() const noexcept { return vertices.size(); }
    std::size_t edge_count() const noexcept { return edges.size(); }

    std::vector<std::vector<int>> adjacency() const
    {
        std::vector<std::vector<int>> adj(vertices.size());
        for (const auto& [u, v] : edges) {
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
        return adj;
    }

    /// point -> vertices containing it, ascending
    std::vector<std::vector<int>> point_memberships() const
    {
        std::vector<std::vector<int>> out(static_cast<std::size_t>(n_points));
        for (std::size_t v = 0; v < vertices.size(); ++v)
            for (Index p : vertices[v].points)
                out[p].push_back(static_cast<int>(v));
        return out;
    }

    friend bool operator==(const MapperGraph& a, const MapperGraph& b)
    {
        if (a.n_points != b.n_points || a.edges != b.edges || a.vertices.size() != b.vertices.size())
            return false;
        for (std::size_t i = 0; i < a.vertices.size(); ++i) {
            const auto &x = a.vertices[i], &y = b.vertices[i];
            if (x.points != y.points || x.cell != y.cell || x.cell_tag != y.cell_tag || x.cluster != y.cluster)
                return false;
        }
        return true;
    }
};

/// Edges between every pair of vertices sharing at least one point.
inline std::vector<std::pair<int, int>> shared_point_edges(const std::vector<MapperVertex>& vertices, Index n_points)
{
    std::vector<std::vector<int>> by_point(static_cast<std::size_t>(n_points));
    for (std::size_t v = 0; v < vertices.size(); ++v)
        for (Index p : vertices[v].points)
            by_point[p].push_back(static_cast<int>(v));
    std::vector<std::pair<int, int>> edges;
    for (const auto& vs : by_point)
        for (std::size_t a = 0; a < vs.size(); ++a)
            for (std::size_t b = a + 1; b < vs.size(); ++b)
                edges.emplace_back(vs[a], vs[b]);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

/// Full Mapper construction: cover, per-cell clustering, shared-point edges.
inline MapperGraph build_mapper(const DistMatrix& d, const Matrix& filters, const MapperConfig& cfg)
{
    require(filters.rows() == d.size(), ErrorKind::input, "filter rows must match distance matrix size");
    const auto cells = build_cover(filters, cfg);
    MapperGraph g;
    g.n_points = d.size();
    g.config_fingerprint = cfg.fingerprint();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& pts = cells[c].points;
        const auto m = static_cast<Index>(pts.size());
        Matrix sub(m, m);
        for (Index j = 0; j < m; ++j)
            for (Index i = 0; i < m; ++i)
                sub(i, j) = d(pts[i], pts[j]);
        const auto clusters = cluster_preimage(sub, cfg.histogram_bins);
        for (std::size_t k = 0; k < clusters.size(); ++k) {
            MapperVertex v;
            v.cell = c;
            v.cell_tag = cells[c].tag;
            v.cluster = static_cast<int>(k);
            for (Index local : clusters[k])
                v.points.push_back(pts[local]);
            g.vertices.push_back(std::move(v));
        }
    }
    g.edges = shared_point_edges(g.vertices, g.n_points);
    return g;
}

inline MapperGraph build_mapper(const DataMatrix& x, const DistMatrix& d, const Matrix& filters,
                                const MapperConfig& cfg)
{
    require(x.rows() == d.size(), ErrorKind::input, "data rows must match distance matrix size");
    return build_mapper(d, filters, cfg);
}

} // namespace mapnull
