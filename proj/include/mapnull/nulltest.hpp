#pragma once

#include "mapnull/community.hpp"
#include "mapnull/data.hpp"
#include "mapnull/distances.hpp"
#include "mapnull/error.hpp"
#include "mapnull/filters.hpp"
#include "mapnull/mapper.hpp"
#include "mapnull/numerics.hpp"
#include "mapnull/parallel.hpp"
#include "mapnull/rng.hpp"
#include "mapnull/teststat.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace mapnull {

struct SplitSpec {
    SplitMode mode = SplitMode::odd_even;
    std::uint64_t seed = 0;
};

/// Every knob of the observed analysis; null replicates reuse it verbatim.
struct PipelineConfig {
    Metric metric = Metric::euclidean;
    std::vector<FilterSpec> filters{PcoaFilter{1}, PcoaFilter{2}};
    MapperConfig mapper;
    SplitSpec split;
    SamplingStrategy strategy = SamplingStrategy::reduced_rank;
    int replicates = 50; // B
    std::uint64_t base_seed = 1;
    int n_perm = 1000;   // 0 disables the label-permutation baseline
    int workers = 0;     // 0 = hardware concurrency
    /// Optional permutation of 0..B-1: replicate b draws with seed index
    /// seed_schedule[b]. Empty means identity.
    std::vector<std::size_t> seed_schedule;

    void validate(Index n, Index p) const
    {
        require(replicates >= 1, ErrorKind::parameter, "B must be >= 1");
        require(!filters.empty(), ErrorKind::parameter, "at least one filter is required");
        require(n_perm == 0 || n_perm >= 2, ErrorKind::parameter, "n_perm must be 0 or >= 2");
        for (const auto& f : filters)
            validate_filter(f, n);
        mapper.validate(filters.size());
        require(p >= 2, ErrorKind::parameter, "need at least 2 features");
        if (!seed_schedule.empty()) {
            require(seed_schedule.size() == static_cast<std::size_t>(replicates), ErrorKind::parameter,
                    "seed_schedule must have B entries");
            std::vector<std::size_t> sorted = seed_schedule;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i)
                require(sorted[i] == i, ErrorKind::parameter, "seed_schedule must be a permutation of 0..B-1");
        }
    }
};

/// Output of one pass of distances -> filters -> Mapper -> Louvain ->
/// assignment -> statistic.
struct PipelineRun {
    MapperGraph graph;
    CommunityResult communities;
    DissociationResult statistic;
};

// Stream indices derived from a run seed.
inline constexpr std::uint64_t kStreamSample = 0;
inline constexpr std::uint64_t kStreamJitter = 1;
inline constexpr std::uint64_t kStreamLouvain = 2;
// Indices derived from the base seed outside the replicate range.
inline constexpr std::uint64_t kObservedSeedIndex = 0xFFFFFFFFFFFFFF00ULL;
inline constexpr std::uint64_t kPermutationSeedIndex = 0xFFFFFFFFFFFFFF01ULL;

inline std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t index)
{
    return derive_seed(base_seed, static_cast<std::uint64_t>(index));
}

inline PipelineRun run_pipeline(const DataMatrix& x, const PipelineConfig& cfg, const FeatureSplit& split,
                                std::uint64_t seed)
{
    PipelineRun run;
    auto stage = [](const char* name, auto&& body) {
        try {
            return body();
        } catch (const Error& e) {
            rethrow_with_stage(e, name);
        }
    };
    const DistMatrix d = stage("distances", [&] { return distance_matrix(x, cfg.metric); });
    Rng jitter(derive_seed(seed, kStreamJitter));
    const Matrix filters = stage("filters", [&] { return compute_filters(x, d, cfg.filters, jitter); });
    run.graph = stage("mapper", [&] { return build_mapper(d, filters, cfg.mapper); });
    stage("community", [&] {
        Rng rng(derive_seed(seed, kStreamLouvain));
        run.communities = assign_points(run.graph, louvain(run.graph, rng));
        return 0;
    });
    run.statistic = stage("statistic", [&] { return dissociation(x, run.communities, split, false); });
    return run;
}

/// Observed value, null samples and the derived z and p-hat for one variant
/// of the statistic. z is absent when the null samples have zero spread.
struct StatVariant {
    double observed = 0.0;
    std::vector<double> null_samples;
    std::optional<double> z;
    double p_hat = 1.0;
};

inline StatVariant make_variant(double observed, std::vector<double> samples)
{
    StatVariant v;
    v.observed = observed;
    v.null_samples = std::move(samples);
    try {
        v.z = zscore(observed, v.null_samples);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::degenerate_null)
            throw;
    }
    v.p_hat = mc_pvalue(observed, v.null_samples);
    return v;
}

struct RunSummary {
    std::uint64_t seed = 0;
    int k = 0;
    int singletons = 0;
    std::optional<double> modularity;
    std::vector<Index> sizes;
    std::size_t vertices = 0;
    std::size_t edges = 0;
    Index unassigned = 0;
    std::string mapper_fingerprint;
};

inline RunSummary summarize(const PipelineRun& run, std::uint64_t seed)
{
    RunSummary s;
    s.seed = seed;
    s.k = run.communities.k;
    s.singletons = run.communities.singleton_count();
    s.modularity = run.communities.modularity;
    s.sizes = run.communities.sizes;
    s.vertices = run.graph.vertex_count();
    s.edges = run.graph.edge_count();
    s.unassigned = run.communities.unassigned_count();
    s.mapper_fingerprint = run.graph.config_fingerprint;
    return s;
}

struct NullTestResult {
    StatVariant d;
    StatVariant d_excl_singletons;
    StatVariant d_max;
    StatVariant d_max_excl_singletons;
    std::optional<PermutationResult> permutation;
    std::optional<PermutationResult> permutation_excl_singletons;

    PipelineRun observed;
    RunSummary observed_summary;
    std::vector<RunSummary> replicates;

    FeatureSplit split;
    SamplingStrategy strategy = SamplingStrategy::reduced_rank;
    double ridge_epsilon = 0.0;
    Index covariance_rank = 0;
    Index n = 0;
    Index p = 0;
    PipelineConfig config;
};

/// Structured-null Monte Carlo test.
///
/// The observed pipeline runs first, then the sample covariance of `x` (as
/// given, no further preprocessing) defines N_p(0, Sigma). Each replicate b
/// draws n rows from it with seed replicate_seed(base_seed, b) and reruns the
/// identical pipeline; data-derived filters are recomputed, external filters
/// keep their values per row index with fresh jitter. Replicates with fewer
/// than two communities score 0. A failing replicate aborts the run.
inline NullTestResult run_structured_null_test(const DataMatrix& x, const PipelineConfig& cfg)
{
    cfg.validate(x.rows(), x.cols());
    NullTestResult out;
    out.config = cfg;
    out.n = x.rows();
    out.p = x.cols();
    out.strategy = cfg.strategy;
    out.split = make_split(x.cols(), cfg.split.mode, cfg.split.seed);

    const std::uint64_t observed_seed = derive_seed(cfg.base_seed, kObservedSeedIndex);
    try {
        out.observed = run_pipeline(x, cfg, out.split, observed_seed);
    } catch (const Error& e) {
        rethrow_with_stage(e, "observed");
    }
    out.observed_summary = summarize(out.observed, observed_seed);

    CovModel cov = [&] {
        try {
            CovModel c = sample_covariance(x);
            return cfg.strategy == SamplingStrategy::ridge ? ridge_regularize(c) : c;
        } catch (const Error& e) {
            rethrow_with_stage(e, "covariance");
        }
    }();
    out.ridge_epsilon = cov.epsilon();
    out.covariance_rank = cov.effective_rank();

    const auto b_count = static_cast<std::size_t>(cfg.replicates);
    std::vector<DissociationResult> stats(b_count);
    out.replicates.resize(b_count);
    parallel_for(b_count, cfg.workers, [&](std::size_t b) {
        const std::size_t seed_index = cfg.seed_schedule.empty() ? b : cfg.seed_schedule[b];
        const std::uint64_t seed = replicate_seed(cfg.base_seed, seed_index);
        try {
            Rng sampler(derive_seed(seed, kStreamSample));
            const DataMatrix xb(sample_gaussian(cov, x.rows(), cfg.strategy, sampler).values(), x.feature_names(),
                                x.row_ids());
            PipelineRun run = run_pipeline(xb, cfg, out.split, seed);
            stats[b] = run.statistic;
            out.replicates[b] = summarize(run, seed);
        } catch (const Error& e) {
            rethrow_with_stage(e, "replicate " + std::to_string(b));
        }
    });

    auto collect = [&](auto member) {
        std::vector<double> v;
        v.reserve(b_count);
        for (const auto& s : stats)
            v.push_back(s.*member);
        return v;
    };
    const auto& obs = out.observed.statistic;
    out.d = make_variant(obs.d, collect(&DissociationResult::d));
    out.d_excl_singletons = make_variant(obs.d_excl_singletons, collect(&DissociationResult::d_excl_singletons));
    out.d_max = make_variant(obs.d_max, collect(&DissociationResult::d_max));
    out.d_max_excl_singletons =
        make_variant(obs.d_max_excl_singletons, collect(&DissociationResult::d_max_excl_singletons));

    if (cfg.n_perm > 0) {
        Rng rng(derive_seed(cfg.base_seed, kPermutationSeedIndex));
        auto attempt = [&](bool excl) -> std::optional<PermutationResult> {
            try {
                return permutation_null(x, out.observed.communities, out.split, cfg.n_perm, rng, excl);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::degenerate_null)
                    throw;
                return std::nullopt;
            }
        };
        out.permutation = attempt(false);
        out.permutation_excl_singletons = attempt(true);
    }
    return out;
}

/// Summary of null-replicate modularity and community counts.
struct NullModularitySummary {
    std::size_t defined = 0; // replicates whose graph had edges
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double q975 = 0.0;
    double mean_k = 0.0;
};

inline NullModularitySummary null_modularity_summary(const NullTestResult& r)
{
    NullModularitySummary s;
    std::vector<double> q;
    double ksum = 0.0;
    for (const auto& rep : r.replicates) {
        ksum += rep.k;
        if (rep.modularity)
            q.push_back(*rep.modularity);
    }
    s.mean_k = r.replicates.empty() ? 0.0 : ksum / static_cast<double>(r.replicates.size());
    s.defined = q.size();
    if (q.empty())
        return s;
    s.mean = std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(q.size());
    if (q.size() >= 2)
        s.sd = mean_sd(q).second;
    std::sort(q.begin(), q.end());
    std::vector<double> sorted(q.begin(), q.end());
    s.q025 = detail::quantile_sorted(sorted, 0.025);
    s.q975 = detail::quantile_sorted(sorted, 0.975);
    return s;
}

} // namespace mapnull
