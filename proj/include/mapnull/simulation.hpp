#pragma once

#include "mapnull/data.hpp"
#include "mapnull/error.hpp"
#include "mapnull/nulltest.hpp"
#include "mapnull/parallel.hpp"
#include "mapnull/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mapnull {

enum class DGPKind {
    spherical,
    correlated_block,
    multivariate_t,
    skewed,
    allfeature_mixture,
    sparse_mixture,
    hetero_cov_mixture,
};

inline const char* to_string(DGPKind k)
{
    switch (k) {
    case DGPKind::spherical: return "spherical";
    case DGPKind::correlated_block: return "correlated_block";
    case DGPKind::multivariate_t: return "multivariate_t";
    case DGPKind::skewed: return "skewed";
    case DGPKind::allfeature_mixture: return "allfeature_mixture";
    case DGPKind::sparse_mixture: return "sparse_mixture";
    case DGPKind::hetero_cov_mixture: return "hetero_cov_mixture";
    }
    return "?";
}

inline DGPKind parse_dgp_kind(const std::string& s)
{
    for (DGPKind k : {DGPKind::spherical, DGPKind::correlated_block, DGPKind::multivariate_t, DGPKind::skewed,
                      DGPKind::allfeature_mixture, DGPKind::sparse_mixture, DGPKind::hetero_cov_mixture})
        if (s == to_string(k))
            return k;
    throw Error(ErrorKind::config, "unknown distribution '" + s + "'");
}

/// Skewed and mixture data are centered and scaled featurewise by default;
/// spherical, correlated and t data are left as drawn.
inline bool default_standardize(DGPKind k)
{
    return k == DGPKind::skewed || k == DGPKind::allfeature_mixture || k == DGPKind::sparse_mixture ||
           k == DGPKind::hetero_cov_mixture;
}

struct DGPSpec {
    DGPKind kind = DGPKind::spherical;
    Index n = 300;
    Index p = 10;
    double rho = 0.5;   // block correlation; all kinds except spherical
    double df = 5.0;    // multivariate_t
    double delta = 2.0; // mixtures
    Index k_shifted = 5;
    bool standardize = false;

    static DGPSpec make(DGPKind kind, Index n, Index p)
    {
        DGPSpec s;
        s.kind = kind;
        s.n = n;
        s.p = p;
        s.standardize = default_standardize(kind);
        return s;
    }

    void validate() const
    {
        require(n >= 2, ErrorKind::parameter, "n must be >= 2");
        require(p >= 2, ErrorKind::parameter, "p must be >= 2");
        require(delta >= 0, ErrorKind::parameter, "delta must be >= 0");
        require(df > 2, ErrorKind::parameter, "df must be > 2");
        require(rho >= 0 && rho < 1, ErrorKind::parameter, "rho must lie in [0, 1)");
        if (kind == DGPKind::sparse_mixture)
            require(k_shifted >= 0 && k_shifted <= p, ErrorKind::parameter, "k_shifted must lie in [0, p]");
    }

    std::string label() const
    {
        std::ostringstream os;
        os << to_string(kind);
        switch (kind) {
        case DGPKind::correlated_block: os << "(rho=" << rho << ")"; break;
        case DGPKind::multivariate_t: os << "(df=" << df << ")"; break;
        case DGPKind::allfeature_mixture: os << "(delta=" << delta << ")"; break;
        case DGPKind::sparse_mixture: os << "(delta=" << delta << ",k=" << k_shifted << ")"; break;
        case DGPKind::hetero_cov_mixture: os << "(rho=" << rho << ")"; break;
        default: break;
        }
        return os.str();
    }
};

/// Size of feature group 1; odd p puts the extra feature there.
inline Index block_group_size(Index p) { return (p + 1) / 2; }

namespace detail {

// One row of N_p(0, Sigma) with two independent equicorrelated groups:
// x_j = sqrt(rho) w_g + sqrt(1 - rho) e_j. rho_1/rho_2 apply to group 1/2.
inline void block_row(Eigen::RowVectorXd& row, double rho_1, double rho_2, Rng& rng)
{
    const Index p = row.size();
    const Index g1 = block_group_size(p);
    const double w1 = standard_normal(rng);
    const double w2 = standard_normal(rng);
    for (Index j = 0; j < p; ++j) {
        const double rho = j < g1 ? rho_1 : rho_2;
        const double w = j < g1 ? w1 : w2;
        row(j) = std::sqrt(rho) * w + std::sqrt(1.0 - rho) * standard_normal(rng);
    }
}

} // namespace detail

/// Population covariance of the Gaussian core of a DGP (before t scaling,
/// exp transform or mixing).
inline Matrix block_covariance(Index p, double rho)
{
    Matrix s = Matrix::Identity(p, p);
    const Index g1 = block_group_size(p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j)
            if (i != j && (i < g1) == (j < g1))
                s(i, j) = rho;
    return s;
}

struct LabeledData {
    DataMatrix data;
    std::vector<int> component; // mixture component per row (0/1); all 0 otherwise
};

/// Draws one dataset. A single stream is consumed in row order; for mixtures
/// each row first flips its fair coin, then draws its Gaussian noise.
inline LabeledData generate_dgp_labeled(const DGPSpec& spec, Rng& rng)
{
    spec.validate();
    Matrix x(spec.n, spec.p);
    std::vector<int> comp(static_cast<std::size_t>(spec.n), 0);
    std::chi_squared_distribution<double> chi(spec.df);
    Eigen::RowVectorXd row(spec.p);
    for (Index i = 0; i < spec.n; ++i) {
        switch (spec.kind) {
        case DGPKind::spherical:
            for (Index j = 0; j < spec.p; ++j)
                row(j) = standard_normal(rng);
            break;
        case DGPKind::correlated_block:
            detail::block_row(row, spec.rho, spec.rho, rng);
            break;
        case DGPKind::multivariate_t: {
            detail::block_row(row, spec.rho, spec.rho, rng);
            const double v = chi(rng);
            row /= std::sqrt(v / spec.df);
            break;
        }
        case DGPKind::skewed:
            detail::block_row(row, spec.rho, spec.rho, rng);
            row = (0.5 * row.array()).exp().matrix();
            break;
        case DGPKind::allfeature_mixture:
        case DGPKind::sparse_mixture: {
            const int c = static_cast<int>(uniform_below(rng, 2));
            comp[static_cast<std::size_t>(i)] = c;
            detail::block_row(row, spec.rho, spec.rho, rng);
            const double shift = (c == 0 ? 0.5 : -0.5) * spec.delta;
            const Index shifted = spec.kind == DGPKind::sparse_mixture ? spec.k_shifted : spec.p;
            for (Index j = 0; j < shifted; ++j)
                row(j) += shift;
            break;
        }
        case DGPKind::hetero_cov_mixture: {
            const int c = static_cast<int>(uniform_below(rng, 2));
            comp[static_cast<std::size_t>(i)] = c;
            if (c == 0)
                detail::block_row(row, spec.rho, 0.0, rng);
            else
                detail::block_row(row, 0.0, spec.rho, rng);
            break;
        }
        }
        x.row(i) = row;
    }
    if (spec.standardize)
        x = standardize_columns(x);
    return {DataMatrix(std::move(x)), std::move(comp)};
}

inline DataMatrix generate_dgp(const DGPSpec& spec, Rng& rng) { return generate_dgp_labeled(spec, rng).data; }

/// Pipeline used for every simulated dataset: Euclidean distances, the first
/// two PCoA coordinates, equalized cover with resolution 15 and gain 2, 10
/// histogram bins, odd/even split, ridge-regularized null.
inline PipelineConfig standard_simulation_pipeline(int replicates)
{
    PipelineConfig cfg;
    cfg.metric = Metric::euclidean;
    cfg.filters = {PcoaFilter{1}, PcoaFilter{2}};
    cfg.mapper.resolutions = {15, 15};
    cfg.mapper.gains = {2.0, 2.0};
    cfg.mapper.cover_mode = CoverMode::equalized;
    cfg.mapper.histogram_bins = 10;
    cfg.split = {SplitMode::odd_even, 0};
    cfg.strategy = SamplingStrategy::ridge;
    cfg.replicates = replicates;
    cfg.n_perm = 0;
    cfg.workers = 1;
    return cfg;
}

inline constexpr double kRejectThreshold = 1.645;

struct ScenarioResult {
    DGPSpec spec;
    std::vector<double> z;       // one per dataset; NaN when the null had zero spread
    std::vector<int> k_observed; // communities in each observed graph
    double rejection_rate = 0.0;
    double mean_z = 0.0;
    int rejections = 0;
    int R = 0;
    int B = 0;
    std::uint64_t base_seed = 0;
    double runtime_seconds = 0.0;
};

/// Runs R independent datasets through the structured null test. Dataset r
/// uses seed derive_seed(base_seed, r): its data stream is index 0 and the
/// null test's base seed index 1. Datasets run in parallel; replicates inside
/// each one run serially so the worker count is a global bound. A dataset
/// whose null has zero spread counts as not rejected and is left out of the
/// mean z.
inline ScenarioResult run_scenario(const DGPSpec& spec, int R, int B, std::uint64_t base_seed, int workers = 0,
                                   const PipelineConfig* pipeline = nullptr)
{
    require(R >= 1, ErrorKind::parameter, "R must be >= 1");
    spec.validate();
    const auto start = std::chrono::steady_clock::now();
    PipelineConfig cfg = pipeline ? *pipeline : standard_simulation_pipeline(B);
    cfg.replicates = B;
    cfg.workers = 1;

    ScenarioResult out;
    out.spec = spec;
    out.R = R;
    out.B = B;
    out.base_seed = base_seed;
    out.z.assign(static_cast<std::size_t>(R), std::nan(""));
    out.k_observed.assign(static_cast<std::size_t>(R), 0);
    parallel_for(static_cast<std::size_t>(R), workers, [&](std::size_t r) {
        const std::uint64_t seed = derive_seed(base_seed, r);
        Rng data_rng(derive_seed(seed, 0));
        const DataMatrix x = generate_dgp(spec, data_rng);
        PipelineConfig local = cfg;
        local.base_seed = derive_seed(seed, 1);
        try {
            const NullTestResult res = run_structured_null_test(x, local);
            if (res.d.z)
                out.z[r] = *res.d.z;
            out.k_observed[r] = res.observed.communities.k;
        } catch (const Error& e) {
            rethrow_with_stage(e, "dataset " + std::to_string(r));
        }
    });

    double sum = 0.0;
    int defined = 0;
    for (double z : out.z) {
        if (std::isnan(z))
            continue;
        sum += z;
        ++defined;
        if (z > kRejectThreshold)
            ++out.rejections;
    }
    out.rejection_rate = static_cast<double>(out.rejections) / static_cast<double>(R);
    out.mean_z = defined ? sum / defined : std::nan("");
    out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

/// CSV with one row per scenario: distribution, p, B, R, mean z, rejection rate.
inline std::string scenario_table_csv(const std::vector<ScenarioResult>& rows)
{
    std::ostringstream os;
    os.precision(6);
    os << "distribution,p,n,B,R,mean_z,rejection_rate,rejections\n";
    for (const auto& r : rows)
        os << '"' << r.spec.label() << "\"," << r.spec.p << ',' << r.spec.n << ',' << r.B << ',' << r.R << ','
           << r.mean_z << ',' << r.rejection_rate << ',' << r.rejections << '\n';
    return os.str();
}

/// Fixed-width text table for terminals.
inline std::string scenario_table_text(const std::vector<ScenarioResult>& rows)
{
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-36s %5s %5s %5s %9s %9s\n", "Distribution", "p", "B", "R", "Mean z",
                  "Reject");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-36s %5ld %5d %5d %9.2f %9.3f\n", r.spec.label().c_str(),
                      static_cast<long>(r.spec.p), r.B, r.R, r.mean_z, r.rejection_rate);
        os << line;
    }
    return os.str();
}

} // namespace mapnull
