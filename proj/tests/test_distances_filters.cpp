#include "mapnull/distances.hpp"
#include "mapnull/filters.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mapnull;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r)
{
    Matrix m(static_cast<Index>(r.size()), static_cast<Index>(r.begin()->size()));
    Index i = 0;
    for (const auto& row : r) {
        Index j = 0;
        for (double v : row)
            m(i, j++) = v;
        ++i;
    }
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

void expect_valid_distance(const DistMatrix& d)
{
    for (Index i = 0; i < d.size(); ++i) {
        EXPECT_EQ(d(i, i), 0.0);
        for (Index j = 0; j < d.size(); ++j) {
            EXPECT_GE(d(i, j), 0.0);
            EXPECT_NEAR(d(i, j), d(j, i), 1e-12);
        }
    }
}

const std::vector<Metric> kAllMetrics{Metric::euclidean, Metric::variance_normalized_euclidean,
                                      Metric::pearson_correlation};

} // namespace

TEST(DistanceMatrix, IdenticalRowsAreAtZero)
{
    const DataMatrix x(rows({{1, 2, 5}, {1, 2, 5}, {0, 3, 1}}));
    for (Metric m : kAllMetrics)
        EXPECT_NEAR(distance_matrix(x, m)(0, 1), 0.0, 1e-12) << to_string(m);
}

TEST(DistanceMatrix, PerfectAnticorrelation)
{
    const DataMatrix x(rows({{1, 2, 3}, {3, 2, 1}}));
    EXPECT_NEAR(distance_matrix(x, Metric::pearson_correlation)(0, 1), 2.0, 1e-12);
}

TEST(DistanceMatrix, ThreeFourFive)
{
    const DataMatrix x(rows({{0, 0}, {3, 4}}));
    EXPECT_DOUBLE_EQ(distance_matrix(x, Metric::euclidean)(0, 1), 5.0);
}

TEST(DistanceMatrix, VarianceNormalizedDividesBySd)
{
    const DataMatrix x(rows({{0, 0}, {2, 10}, {4, 20}}));
    // column sds are 2 and 10, so rows become (0,0), (1,1), (2,2)
    const DistMatrix d = distance_matrix(x, Metric::variance_normalized_euclidean);
    EXPECT_NEAR(d(0, 1), std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(d(0, 2), std::sqrt(8.0), 1e-12);
}

TEST(DistanceMatrix, ZeroVarianceRowUnderCorrelationNamesRow)
{
    const DataMatrix x(rows({{1, 2, 3}, {4, 4, 4}, {0, 1, 0}}), {}, {"a", "flat", "c"});
    try {
        distance_matrix(x, Metric::pearson_correlation);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::metric);
        EXPECT_NE(std::string(e.what()).find("flat"), std::string::npos);
    }
}

TEST(DistanceMatrix, ZeroVarianceColumnUnderNormalization)
{
    const DataMatrix x(rows({{1, 7}, {2, 7}, {3, 7}}), {"a", "const"});
    try {
        distance_matrix(x, Metric::variance_normalized_euclidean);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::metric);
        EXPECT_NE(std::string(e.what()).find("const"), std::string::npos);
    }
}

TEST(DistanceMatrix, AxiomsAndPermutationEquivariance)
{
    const Matrix x = random_matrix(15, 6, 11);
    std::vector<Index> perm(15);
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(3);
    shuffle(perm, rng);
    Matrix y(15, 6);
    for (Index i = 0; i < 15; ++i)
        y.row(i) = x.row(perm[i]);
    for (Metric m : kAllMetrics) {
        const DistMatrix dx = distance_matrix(DataMatrix(x), m);
        const DistMatrix dy = distance_matrix(DataMatrix(y), m);
        expect_valid_distance(dx);
        for (Index i = 0; i < 15; ++i)
            for (Index j = 0; j < 15; ++j)
                EXPECT_NEAR(dy(i, j), dx(perm[i], perm[j]), 1e-12) << to_string(m);
    }
}

TEST(DistanceMatrix, EuclideanMatchesOracle)
{
    const Matrix x = random_matrix(20, 4, 5);
    EXPECT_LT((distance_matrix(DataMatrix(x), Metric::euclidean).values() - oracle::euclidean(x)).cwiseAbs().maxCoeff(),
              1e-12);
}

TEST(LinfCentrality, IdenticalPoints)
{
    const DistMatrix d(Matrix::Zero(4, 4), Metric::euclidean);
    EXPECT_EQ(linf_centrality(d).cwiseAbs().maxCoeff(), 0.0);
}

TEST(LinfCentrality, ThreePointsOnALine)
{
    Matrix pts(3, 1);
    pts << 0, 1, 3;
    const Vector f = linf_centrality(DistMatrix(oracle::euclidean(pts), Metric::euclidean));
    EXPECT_DOUBLE_EQ(f(0), 3.0);
    EXPECT_DOUBLE_EQ(f(1), 2.0);
    EXPECT_DOUBLE_EQ(f(2), 3.0);
}

TEST(LinfCentrality, DuplicateOfFarthestPointAndMonotonicity)
{
    Matrix pts = random_matrix(10, 2, 7);
    const Vector before = linf_centrality(DistMatrix(oracle::euclidean(pts), Metric::euclidean));
    Index far = 0;
    before.maxCoeff(&far);
    Matrix dup(11, 2);
    dup << pts, pts.row(far);
    const Vector after = linf_centrality(DistMatrix(oracle::euclidean(dup), Metric::euclidean));
    for (Index i = 0; i < 10; ++i)
        EXPECT_DOUBLE_EQ(after(i), before(i));
    // a new arbitrary point never lowers existing values
    Matrix more(11, 2);
    more << pts, Eigen::RowVector2d(0.3, -0.2);
    const Vector grown = linf_centrality(DistMatrix(oracle::euclidean(more), Metric::euclidean));
    for (Index i = 0; i < 10; ++i)
        EXPECT_GE(grown(i), before(i));
}

TEST(KnnGeodesic, FullyConnectedEqualsDirectDistances)
{
    const Matrix pts = random_matrix(12, 3, 21);
    const DistMatrix d(oracle::euclidean(pts), Metric::euclidean);
    const GeodesicPaths g = knn_geodesic_distances(d, 11);
    EXPECT_EQ(g.replaced, 0u);
    EXPECT_LT((g.lengths - d.values()).cwiseAbs().maxCoeff(), 1e-12);
    const Matrix a = knn_geodesic_mds(d, 11, 2, true);
    const Matrix b = classical_mds(d.values(), 2, true);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(KnnGeodesic, DisconnectedBlobsUseReplacementRule)
{
    Matrix pts = random_matrix(10, 2, 4) * 0.1;
    pts.bottomRows(5).array() += 100.0;
    const DistMatrix d(oracle::euclidean(pts), Metric::euclidean);
    const GeodesicPaths g = knn_geodesic_distances(d, 2);
    EXPECT_GE(g.replaced, 50u); // every cross-blob ordered pair
    for (Index i = 0; i < 5; ++i)
        for (Index j = 5; j < 10; ++j) {
            EXPECT_DOUBLE_EQ(g.lengths(i, j), 2.0 * g.max_finite);
            EXPECT_DOUBLE_EQ(g.lengths(j, i), 2.0 * g.max_finite);
        }
    EXPECT_LT(g.max_finite, 10.0);
}

TEST(KnnGeodesic, PathOptimalityAndDeterminism)
{
    const Matrix pts = random_matrix(25, 3, 8);
    const DistMatrix d(oracle::euclidean(pts), Metric::euclidean);
    const auto nbrs = knn_lists(d, 4);
    const GeodesicPaths g = knn_geodesic_distances(d, 4);
    for (Index i = 0; i < 25; ++i)
        for (Index j : nbrs[i])
            EXPECT_LE(g.lengths(i, j), d(i, j) + 1e-12);
    // Bellman-Ford style relaxation finds nothing shorter
    for (Index s = 0; s < 25; ++s)
        for (Index u = 0; u < 25; ++u)
            for (Index v : nbrs[u])
                if (g.lengths(s, u) < 2 * g.max_finite)
                    EXPECT_LE(g.lengths(s, v), g.lengths(s, u) + d(u, v) + 1e-9);
    const GeodesicPaths again = knn_geodesic_distances(d, 4);
    EXPECT_EQ(g.lengths, again.lengths);
}

TEST(KnnGeodesic, TieBreakByLowerIndex)
{
    Matrix pts(4, 1);
    pts << 0, 1, -1, 2;
    const auto nbrs = knn_lists(DistMatrix(oracle::euclidean(pts), Metric::euclidean), 1);
    EXPECT_EQ(nbrs[0][0], 1); // points 1 and 2 are both at distance 1
}

TEST(KnnGeodesic, KMustBeBelowN)
{
    const DataMatrix x(random_matrix(5, 4, 1));
    try {
        knn_geodesic_mds_filter(x, 5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parameter);
    }
    EXPECT_EQ(knn_geodesic_mds_filter(x, 2).rows(), 5);
}

TEST(ExternalFilter, ZeroJitterIsExact)
{
    Rng rng(1);
    const std::vector<double> v{0.5, -1.25, 3.0};
    const Vector out = external_filter(v, 0.0, rng);
    for (std::size_t i = 0; i < v.size(); ++i)
        EXPECT_EQ(out(static_cast<Index>(i)), v[i]);
}

TEST(ExternalFilter, BinaryValuesStayNearLevels)
{
    std::vector<double> v(300);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = static_cast<double>(i % 2);
    Rng rng(2);
    const Vector out = external_filter(v, 0.01, rng);
    double worst = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i)
        worst = std::max(worst, std::abs(out(static_cast<Index>(i)) - v[i]));
    EXPECT_LT(worst, 0.1);
    EXPECT_GT(worst, 0.0);
}

TEST(ExternalFilter, FreshJitterKeepsRanks)
{
    std::vector<double> v{1, 5, 3, 9, 7};
    Rng a(10), b(11);
    const Vector x = external_filter(v, 0.01, a);
    const Vector y = external_filter(v, 0.01, b);
    EXPECT_NE(x, y);
    for (Index i = 0; i < 5; ++i)
        for (Index j = 0; j < 5; ++j)
            EXPECT_EQ(x(i) < x(j), y(i) < y(j));
}

TEST(ComputeFilters, ColumnsFollowSpecs)
{
    const DataMatrix x(random_matrix(30, 5, 3));
    const DistMatrix d = distance_matrix(x, Metric::euclidean);
    std::vector<double> ext(30, 1.0);
    Rng rng(0);
    const Matrix f = compute_filters(
        x, d, {PcoaFilter{2}, LinfCentralityFilter{}, ExternalFilter{ext, 0.0, "e"}, KnnGeodesicMdsFilter{5, 1}},
        rng);
    ASSERT_EQ(f.cols(), 4);
    const Matrix pc = pcoa_euclidean(x.values(), 2);
    EXPECT_LT((f.col(0) - pc.col(1)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((f.col(1) - linf_centrality(d)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(f.col(2), Vector::Ones(30));
    EXPECT_LT((f.col(3) - knn_geodesic_mds(d, 5, 1).col(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ComputeFilters, ExternalLengthMismatch)
{
    EXPECT_THROW(validate_filter(ExternalFilter{{1.0, 2.0}, 0.0, "e"}, 3), Error);
    EXPECT_THROW(validate_filter(PcoaFilter{0}, 3), Error);
    EXPECT_THROW(validate_filter(KnnGeodesicMdsFilter{0, 1}, 3), Error);
}
