// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   mapnull_acceptance [--only N]...

#include "mapnull/io/config.hpp"
#include "mapnull/io/report.hpp"
#include "mapnull/mapnull.hpp"
#include "mapnull/verification/theory_checks.hpp"

#include "oracles.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

using namespace mapnull;
namespace fs = std::filesystem;
namespace v = mapnull::verification;

namespace {

constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ScenarioResult scenario(DGPKind kind, Index p, int R, const std::function<void(DGPSpec&)>& tweak = {})
{
    DGPSpec s = DGPSpec::make(kind, 300, p);
    if (tweak)
        tweak(s);
    return run_scenario(s, R, 50, kSeed, 0);
}

Outcome type_one()
{
    const auto r = scenario(DGPKind::correlated_block, 10, 100);
    return {r.rejections <= 11, fmt("%d/100 rejections at z > 1.645 (allowed 0..11), mean z %.3f", r.rejections,
                                    r.mean_z)};
}

Outcome heavy_tail()
{
    const auto r = scenario(DGPKind::multivariate_t, 10, 50, [](DGPSpec& s) { s.df = 5.0; });
    return {r.rejection_rate >= 0.50, fmt("rejection rate %.3f (need >= 0.50), mean z %.3f", r.rejection_rate,
                                          r.mean_z)};
}

Outcome mixture_absorption()
{
    const auto r = scenario(DGPKind::allfeature_mixture, 10, 50, [](DGPSpec& s) { s.delta = 2.0; });
    return {r.mean_z <= -1.5 && r.rejection_rate <= 0.05,
            fmt("mean z %.3f (need <= -1.5), rejection rate %.3f (need <= 0.05)", r.mean_z, r.rejection_rate)};
}

Outcome sparse_mixture()
{
    const auto r = scenario(DGPKind::sparse_mixture, 50, 50, [](DGPSpec& s) {
        s.delta = 2.0;
        s.k_shifted = 5;
    });
    return {r.rejection_rate <= 0.15, fmt("rejection rate %.3f (need within [0, 0.15])", r.rejection_rate)};
}

Outcome population_bound()
{
    Matrix sigma = Matrix::Zero(2, 2);
    sigma.diagonal() << 4, 1;
    FeatureSplit split;
    split.block_a = {0};
    split.block_b = {1};
    Rng rng(kSeed);
    const auto c = v::population_dissociation_mc(CovModel::from_matrix(sigma), v::IntervalPartition{{0.0}}, split,
                                                 1000000, rng);
    const double closed = 2.0 * std::sqrt(8.0 / std::numbers::pi);
    const bool ok = std::abs(c.bound - closed) < 1e-12 && c.estimate >= c.bound - 3.0 * c.standard_error;
    return {ok, fmt("estimate %.5f, SE %.5f, bound %.5f", c.estimate, c.standard_error, c.bound)};
}

Outcome permutation_rate()
{
    const CovModel sigma = CovModel::from_matrix(block_covariance(10, 0.5));
    const FeatureSplit split = make_split(10, SplitMode::odd_even);
    const auto d = v::permutation_decay_check({400, 1600, 6400}, {0.5, 0.3, 0.2}, sigma, split, 400,
                                              derive_seed(kSeed, 100), 0);
    Rng rng(derive_seed(kSeed, 200));
    const DataMatrix x = sample_gaussian(sigma, 2000, SamplingStrategy::reduced_rank, rng);
    const auto var = v::finite_population_variance_check(x, 600, split, 20000, rng);
    const bool ok = d.slope >= -0.65 && d.slope <= -0.35 && var.relative_error() <= 0.10;
    return {ok, fmt("slope %.4f (need [-0.65, -0.35]), variance rel. error %.4f (need <= 0.10)", d.slope,
                    var.relative_error())};
}

Outcome oracle_equivalence()
{
    Rng rng(kSeed);
    double worst = 0.0;
    int mismatched = 0;
    auto check = [&](double a, double b) {
        const double e = std::abs(a - b);
        worst = std::max(worst, e);
        mismatched += e <= 1e-12 ? 0 : 1;
    };
    for (int t = 0; t < 200; ++t) {
        const Index n = 8 + static_cast<Index>(uniform_below(rng, 30));
        const Index p = 2 + static_cast<Index>(uniform_below(rng, 7));
        const int k = 2 + static_cast<int>(uniform_below(rng, 4));
        Matrix x(n, p);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p; ++j)
                x(i, j) = 3.0 * standard_normal(rng);
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (auto& c : labels)
            c = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(k + 1))) - 1;
        const FeatureSplit split = make_split(p, t % 2 ? SplitMode::random : SplitMode::odd_even, rng());
        const auto got = dissociation(DataMatrix(x), labels, split, true);
        const auto want = oracle::dissociation(x, labels, split.block_a, split.block_b);
        const auto want_ex = oracle::dissociation(x, labels, split.block_a, split.block_b, 2);
        check(got.d, want.d);
        check(got.d_max, want.d_max);
        check(got.d_excl_singletons, want_ex.d);
        check(got.d_max_excl_singletons, want_ex.d_max);

        const int nv = 4 + static_cast<int>(uniform_below(rng, 7));
        std::vector<std::pair<int, int>> edges{{0, 1}};
        for (int a = 0; a < nv; ++a)
            for (int b = a + 1; b < nv; ++b)
                if ((a != 0 || b != 1) && uniform_below(rng, 3) == 0)
                    edges.emplace_back(a, b);
        const MapperGraph g = oracle::graph(nv, edges);
        Partition part(static_cast<std::size_t>(nv));
        for (auto& c : part)
            c = static_cast<int>(uniform_below(rng, 3));
        check(modularity(g, part), oracle::modularity(g, part));

        std::vector<double> null(20 + uniform_below(rng, 80));
        for (auto& s : null)
            s = std::round(4.0 * standard_normal(rng)) / 4.0; // ties with the observed value happen
        const double obs = std::round(4.0 * standard_normal(rng)) / 4.0;
        check(mc_pvalue(obs, null), oracle::mc_pvalue(obs, null));
    }

    bool louvain_ok = true;
    std::string q_text;
    for (bool bridged : {true, false}) {
        const MapperGraph g = oracle::two_triangles(bridged);
        const double target = bridged ? 5.0 / 14.0 : 0.5;
        const double best = oracle::best_modularity(g);
        double q = 0.0;
        for (std::uint64_t s = 0; s < 10; ++s) {
            Rng lr(derive_seed(kSeed, s));
            q = modularity(g, louvain(g, lr));
            louvain_ok = louvain_ok && std::abs(q - best) <= 1e-12 && std::abs(best - target) <= 1e-12;
        }
        q_text += fmt("%s%s Q %.6f (exhaustive %.6f)", q_text.empty() ? "" : ", ",
                      bridged ? "bridged" : "disjoint", q, best);
    }
    return {mismatched == 0 && louvain_ok,
            fmt("%d mismatches over 200 instances (max abs diff %.2e); ", mismatched, worst) + q_text};
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(MAPNULL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism()
{
    const fs::path dir = fs::temp_directory_path() / "mapnull_acceptance_determinism";
    fs::remove_all(dir);
    const std::string cfg = (fs::path(MAPNULL_DEMO_DIR) / "config.json").string();
    const int a = run_cli("test --config " + cfg + " --seed 7 --out-dir " + (dir / "a").string());
    const int b = run_cli("test --config " + cfg + " --seed 7 --out-dir " + (dir / "b").string());
    const std::string ra = slurp(dir / "a" / "report.json"), rb = slurp(dir / "b" / "report.json");
    const bool identical = a == 0 && b == 0 && !ra.empty() && ra == rb;

    Rng rng(kSeed);
    const DataMatrix x = generate_dgp(DGPSpec::make(DGPKind::correlated_block, 150, 8), rng);
    PipelineConfig c = standard_simulation_pipeline(30);
    c.base_seed = kSeed;
    const NullTestResult base = run_structured_null_test(x, c);
    c.seed_schedule.resize(30);
    for (std::size_t i = 0; i < 30; ++i)
        c.seed_schedule[i] = i;
    shuffle(c.seed_schedule, rng);
    const NullTestResult permuted = run_structured_null_test(x, c);
    auto sa = base.d.null_samples, sb = permuted.d.null_samples;
    const bool reordered = sa != sb;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const bool same_multiset = sa == sb;
    return {identical && same_multiset,
            fmt("report.json %s (%zu bytes); permuted schedule: %s multiset of D*(b)%s",
                identical ? "byte-identical" : "DIFFERS", ra.size(), same_multiset ? "same" : "DIFFERENT",
                reordered ? ", order changed" : "")};
}

Outcome empirical_smoke()
{
    // 300 samples, 100 features with block correlation plus a weak two-group shift.
    Rng rng(kSeed);
    DGPSpec s = DGPSpec::make(DGPKind::allfeature_mixture, 300, 100);
    s.delta = 0.5;
    const DataMatrix x = generate_dgp(s, rng);

    io::RunConfig cfg;
    cfg.input_label = "synthetic";
    PipelineConfig& p = cfg.pipeline;
    p.metric = Metric::pearson_correlation;
    p.filters = {LinfCentralityFilter{}};
    p.mapper.cover_mode = CoverMode::equalized;
    p.mapper.resolutions = {30};
    p.mapper.gains = {3.0};
    p.mapper.histogram_bins = 5;
    p.strategy = SamplingStrategy::reduced_rank;
    p.replicates = 50;
    p.n_perm = 200;
    p.base_seed = kSeed;
    p.workers = 0;
    const NullTestResult r = run_structured_null_test(x, p);
    const io::json report = io::report_json(r, cfg, x);

    bool consistent = true;
    for (const StatVariant* v : {&r.d, &r.d_excl_singletons}) {
        consistent = consistent && v->null_samples.size() == 50 && v->p_hat == mc_pvalue(v->observed, v->null_samples);
        const auto [mean, sd] = mean_sd(v->null_samples);
        consistent = consistent && (sd > 0 ? v->z && *v->z == zscore(v->observed, v->null_samples) : !v->z);
    }
    const auto& st = report["statistics"];
    const bool both = st.contains("d") && st.contains("d_excl_singletons") &&
                      !st["d"]["observed"].is_null() && !st["d_excl_singletons"]["observed"].is_null();
    const int k = r.observed.communities.k;
    return {k >= 1 && consistent && both,
            fmt("K %d (%d singletons), z %s, p_hat %.4f, excl. singletons z %s p_hat %.4f", k,
                r.observed_summary.singletons, r.d.z ? fmt("%.3f", *r.d.z).c_str() : "NA", r.d.p_hat,
                r.d_excl_singletons.z ? fmt("%.3f", *r.d_excl_singletons.z).c_str() : "NA",
                r.d_excl_singletons.p_hat)};
}

} // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"type-I calibration, correlated Gaussian p=10", type_one},
        {"heavy-tail overrejection, multivariate t df=5", heavy_tail},
        {"mixture absorption, all-feature delta=2", mixture_absorption},
        {"sparse mixture non-detection, k=5 p=50", sparse_mixture},
        {"population dissociation bound, diag(4,1)", population_bound},
        {"permutation rate and finite-population variance", permutation_rate},
        {"oracle equivalence and two-triangle Louvain", oracle_equivalence},
        {"determinism and replicate-order independence", determinism},
        {"empirical-pipeline smoke, 300x100 correlation recipe", empirical_smoke},
    };
    std::set<int> only;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--only")
            only.insert(std::atoi(argv[++i]));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id))
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %d: %s -- %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
