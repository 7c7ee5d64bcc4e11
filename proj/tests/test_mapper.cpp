#include "mapnull/distances.hpp"
#include "mapnull/filters.hpp"
#include "mapnull/mapper.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <array>
#include <functional>
#include <numeric>
#include <tuple>
#include <set>

using namespace mapnull;

namespace {

MapperConfig equalized(std::vector<int> n, std::vector<double> g, int bins = 10)
{
    MapperConfig c;
    c.resolutions = std::move(n);
    c.gains = std::move(g);
    c.histogram_bins = bins;
    return c;
}

std::vector<std::vector<Index>> cell_points(const std::vector<CoverCell>& cells)
{
    std::vector<std::vector<Index>> out;
    for (const auto& c : cells)
        out.push_back(c.points);
    return out;
}

Matrix column(std::initializer_list<double> v)
{
    Matrix m(static_cast<Index>(v.size()), 1);
    Index i = 0;
    for (double x : v)
        m(i++, 0) = x;
    return m;
}

Matrix random_matrix(Index n, Index p, std::uint64_t seed)
{
    Rng rng(seed);
    Matrix x(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j)
            x(i, j) = standard_normal(rng);
    return x;
}

// 4 x 5 unit lattice with tiny jitter: every merge height sits near 1.
Matrix lattice_blob(double dx, std::uint64_t seed)
{
    Rng rng(seed);
    Matrix b(20, 2);
    for (Index i = 0; i < 20; ++i) {
        b(i, 0) = dx + static_cast<double>(i % 4) + 1e-3 * standard_normal(rng);
        b(i, 1) = static_cast<double>(i / 4) + 1e-3 * standard_normal(rng);
    }
    return b;
}

// Independent reference for the first-gap cut: Kruskal merge heights, the
// histogram rule, then components of "distance < threshold".
std::vector<int> reference_clusters(const Matrix& d, int bins)
{
    const Index m = d.rows();
    std::vector<std::tuple<double, Index, Index>> pairs;
    for (Index i = 0; i < m; ++i)
        for (Index j = i + 1; j < m; ++j)
            pairs.emplace_back(d(i, j), i, j);
    std::sort(pairs.begin(), pairs.end());
    std::vector<Index> parent(m);
    std::iota(parent.begin(), parent.end(), Index{0});
    std::function<Index(Index)> find = [&](Index a) { return parent[a] == a ? a : parent[a] = find(parent[a]); };
    std::vector<double> heights;
    for (const auto& [h, i, j] : pairs) {
        const Index a = find(i), b = find(j);
        if (a != b) {
            parent[a] = b;
            heights.push_back(h);
        }
    }
    const double hmax = *std::max_element(heights.begin(), heights.end());
    std::vector<int> counts(bins, 0);
    for (double h : heights)
        ++counts[std::min(bins - 1, static_cast<int>(h / hmax * bins))];
    int lowest = 0;
    while (counts[lowest] == 0)
        ++lowest;
    int gap = -1;
    for (int b = lowest + 1; b < bins && gap < 0; ++b)
        if (counts[b] == 0)
            gap = b;
    if (gap < 0)
        return std::vector<int>(m, 0);
    return oracle::threshold_components(d, hmax * gap / bins);
}

std::vector<int> labels_of(const std::vector<std::vector<Index>>& clusters, Index m)
{
    std::vector<int> out(m, -1);
    for (std::size_t c = 0; c < clusters.size(); ++c)
        for (Index i : clusters[c])
            out[i] = static_cast<int>(c);
    return out;
}

} // namespace

TEST(BuildCover, DisjointHalves)
{
    const auto cells = build_cover(column({1, 2, 3, 4, 5, 6, 7, 8}), equalized({2}, {1.0}));
    const std::vector<std::vector<Index>> want{{0, 1, 2, 3}, {4, 5, 6, 7}};
    EXPECT_EQ(cell_points(cells), want);
}

TEST(BuildCover, QuantileBandsWithGainTwo)
{
    const auto cells = build_cover(column({1, 2, 3, 4, 5, 6, 7, 8}), equalized({4}, {2.0}));
    const std::vector<std::vector<Index>> want{{0, 1, 2, 3}, {2, 3, 4, 5}, {4, 5, 6, 7}, {6, 7}};
    EXPECT_EQ(cell_points(cells), want);
}

TEST(BuildCover, FixedWidthIntervals)
{
    MapperConfig c;
    c.cover_mode = CoverMode::fixed_width;
    c.resolutions = {3};
    c.overlap_fraction = 0.5;
    // length 10 / (3 - 2 * 0.5) = 5, step 2.5: [0,5], [2.5,7.5], [5,10]
    const auto cells = build_cover(column({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}), c);
    const std::vector<std::vector<Index>> want{{0, 1, 2, 3, 4, 5}, {3, 4, 5, 6, 7}, {5, 6, 7, 8, 9, 10}};
    EXPECT_EQ(cell_points(cells), want);
}

TEST(BuildCover, ProductGridBound)
{
    const auto cells = build_cover(random_matrix(200, 2, 1), equalized({3, 5}, {2.0, 2.0}));
    EXPECT_LE(cells.size(), 15u);
    for (const auto& c : cells) {
        EXPECT_FALSE(c.points.empty());
        EXPECT_EQ(c.tag.size(), 2u);
    }
}

TEST(BuildCover, ConstantFilterIsDegenerate)
{
    try {
        build_cover(column({2, 2, 2, 2}), equalized({3}, {2.0}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_filter);
    }
}

TEST(BuildCover, CompletenessAndMultiplicityBound)
{
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const Index d = 1 + static_cast<Index>(trial % 2);
        // n - 1 prime and above N keeps the band edges i/N off the sample points
        const Index n_rows = 1 + std::array<Index, 4>{61, 67, 71, 73}[trial % 4];
        const Matrix f = random_matrix(n_rows, d, 100 + static_cast<std::uint64_t>(trial));
        const int n = 2 + static_cast<int>(uniform_below(rng, 12));
        const double g = 1.0 + 3.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const auto cells = build_cover(f, equalized(std::vector<int>(d, n), std::vector<double>(d, g)));
        std::vector<int> hits(static_cast<std::size_t>(f.rows()), 0);
        for (const auto& c : cells)
            for (Index p : c.points)
                ++hits[p];
        const int bound = static_cast<int>(std::pow(std::ceil(g), static_cast<double>(d)));
        for (int h : hits) {
            EXPECT_GE(h, 1);
            EXPECT_LE(h, bound) << "N=" << n << " g=" << g << " d=" << d;
        }
    }
}

TEST(ClusterPreimage, SinglePoint)
{
    const auto c = cluster_preimage(Matrix::Zero(1, 1), 10);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0], std::vector<Index>{0});
}

TEST(ClusterPreimage, TwoPairsOnALine)
{
    Matrix pts(4, 1);
    pts << 0, 0.1, 10, 10.1;
    const auto c = cluster_preimage(oracle::euclidean(pts), 10);
    const std::vector<std::vector<Index>> want{{0, 1}, {2, 3}};
    EXPECT_EQ(c, want);
}

TEST(ClusterPreimage, EqualDistancesGiveOneCluster)
{
    const Matrix d = Matrix::Ones(6, 6) - Matrix::Identity(6, 6);
    EXPECT_EQ(cluster_preimage(d, 10).size(), 1u);
    EXPECT_EQ(cluster_preimage(Matrix::Zero(3, 3), 10).size(), 1u);
}

TEST(ClusterPreimage, MatchesReferenceCut)
{
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        Matrix pts = random_matrix(8 + static_cast<Index>(seed % 17), 2, 500 + seed);
        if (seed % 3 == 0)
            pts.topRows(4).array() += 6.0;
        const Matrix d = oracle::euclidean(pts);
        for (int bins : {5, 10, 20}) {
            const auto got = labels_of(cluster_preimage(d, bins), d.rows());
            EXPECT_EQ(got, reference_clusters(d, bins)) << "seed " << seed << " bins " << bins;
        }
    }
}

TEST(BuildMapper, TwoBlobsGiveTwoComponents)
{
    Matrix pts(40, 2);
    pts << lattice_blob(0.0, 1), lattice_blob(50.0, 2);
    const DataMatrix x(pts);
    const DistMatrix d = distance_matrix(x, Metric::euclidean);
    const Matrix f = pcoa_euclidean(x.values(), 1);
    const MapperGraph g = build_mapper(x, d, f, equalized({2}, {1.0}));
    ASSERT_EQ(g.vertex_count(), 2u);
    EXPECT_EQ(g.edge_count(), 0u);
    std::set<Index> first(g.vertices[0].points.begin(), g.vertices[0].points.end());
    EXPECT_EQ(first.size(), 20u);
    EXPECT_TRUE(*first.rbegin() < 20 || *first.begin() >= 20);
}

TEST(BuildMapper, OneCellOneClusterIsSingleVertex)
{
    const DataMatrix x(lattice_blob(0.0, 3));
    const DistMatrix d = distance_matrix(x, Metric::euclidean);
    const MapperGraph g = build_mapper(x, d, pcoa_euclidean(x.values(), 1), equalized({1}, {1.0}));
    ASSERT_EQ(g.vertex_count(), 1u);
    EXPECT_EQ(g.edge_count(), 0u);
    EXPECT_EQ(g.vertices[0].points.size(), 20u);
}

TEST(BuildMapper, StructuralInvariants)
{
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const DataMatrix x(random_matrix(80, 4, 900 + seed));
        const DistMatrix d = distance_matrix(x, Metric::euclidean);
        const Matrix f = pcoa_euclidean(x.values(), 2);
        const auto cfg = equalized({4 + static_cast<int>(seed % 3), 5}, {2.0, 2.5});
        const MapperGraph g = build_mapper(x, d, f, cfg);

        // every point lands in some vertex
        const auto members = g.point_memberships();
        for (const auto& m : members)
            EXPECT_FALSE(m.empty());

        // vertex order: cell-major, clusters by smallest member
        for (std::size_t v = 1; v < g.vertex_count(); ++v) {
            const auto& a = g.vertices[v - 1];
            const auto& b = g.vertices[v];
            ASSERT_LE(a.cell, b.cell);
            if (a.cell == b.cell)
                EXPECT_LT(a.points.front(), b.points.front());
        }

        // edges are exactly the pairs sharing a point
        if (g.vertex_count() <= 50) {
            std::set<std::pair<int, int>> edges(g.edges.begin(), g.edges.end());
            for (std::size_t u = 0; u < g.vertex_count(); ++u)
                for (std::size_t v = u + 1; v < g.vertex_count(); ++v) {
                    std::vector<Index> common;
                    std::set_intersection(g.vertices[u].points.begin(), g.vertices[u].points.end(),
                                          g.vertices[v].points.begin(), g.vertices[v].points.end(),
                                          std::back_inserter(common));
                    EXPECT_EQ(!common.empty(), edges.count({static_cast<int>(u), static_cast<int>(v)}) == 1);
                }
        }

        EXPECT_TRUE(g == build_mapper(x, d, f, cfg));
    }
}

TEST(MapperConfig, Validation)
{
    EXPECT_THROW(equalized({0}, {2.0}).validate(1), Error);
    EXPECT_THROW(equalized({5}, {0.5}).validate(1), Error);
    EXPECT_THROW(equalized({5, 5, 5}, {2.0, 2.0, 2.0}).validate(3), Error);
    EXPECT_THROW(equalized({5}, {2.0}, 1).validate(1), Error);
    EXPECT_NO_THROW(equalized({5, 5}, {2.0, 2.0}).validate(2));
    EXPECT_EQ(equalized({5}, {2.0}).fingerprint(), equalized({5}, {2.0}).fingerprint());
    EXPECT_NE(equalized({5}, {2.0}).fingerprint(), equalized({5}, {2.5}).fingerprint());
}
