// mapnull command-line tool.
//
//   mapnull test     --config run.json [--out-dir DIR] [--workers N] [--seed S]
//   mapnull mapper   --config run.json [--out-dir DIR]
//   mapnull simulate --config scenarios.json [--out-dir DIR] [--workers N] [--seed S]
//   mapnull oracle   [--samples N] [--seed S]
//
// Exit status: 0 success, 2 configuration or input error, 3 numerical
// failure (the message names the pipeline stage).

#include "mapnull/io/config.hpp"
#include "mapnull/io/report.hpp"
#include "mapnull/mapnull.hpp"
#include "mapnull/verification/theory_checks.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace mapnull;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Options {
    std::string config;
    std::string out_dir = ".";
    int workers = 0;
    std::optional<std::uint64_t> seed;
    long samples = 1000000;
};

void write_file(const fs::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::input, "cannot write '" + path.string() + "'");
    out << content;
}

fs::path prepare_out_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorKind::input, "cannot create output directory '" + dir + "': " + ec.message());
    return fs::path(dir);
}

io::RunConfig load_config(const Options& opt)
{
    io::RunConfig cfg = io::load_run_config(opt.config);
    cfg.pipeline.workers = opt.workers;
    if (opt.seed)
        cfg.pipeline.base_seed = *opt.seed;
    return cfg;
}

DataMatrix load_checked_data(io::RunConfig& cfg)
{
    DataMatrix x = io::load_data(cfg);
    try {
        cfg.pipeline.validate(x.rows(), x.cols());
    } catch (const Error& e) {
        throw Error(ErrorKind::config, e.message());
    }
    return x;
}

std::string fmt_opt(const std::optional<double>& v)
{
    if (!v)
        return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", *v);
    return buf;
}

int cmd_test(const Options& opt)
{
    io::RunConfig cfg = load_config(opt);
    const DataMatrix x = load_checked_data(cfg);
    const fs::path out = prepare_out_dir(opt.out_dir);
    const NullTestResult r = run_structured_null_test(x, cfg.pipeline);
    const io::json report = io::report_json(r, cfg, x);
    write_file(out / "report.json", report.dump(2) + "\n");
    write_file(out / "summary.csv", io::summary_csv(report));
    write_file(out / "communities.csv", io::communities_csv(x, r.observed.communities));
    if (cfg.report.histogram_svg)
        write_file(out / "null_histogram.svg", io::null_histogram_svg(r.d.null_samples, r.d.observed));

    std::cout << "n=" << r.n << " p=" << r.p << " K=" << r.observed.communities.k
              << " singletons=" << r.observed_summary.singletons << " B=" << cfg.pipeline.replicates << "\n"
              << "D_obs=" << r.d.observed << " z_str=" << fmt_opt(r.d.z) << " p_hat=" << r.d.p_hat
              << " z_perm=" << fmt_opt(r.permutation ? std::optional<double>(r.permutation->z) : std::nullopt)
              << "\n"
              << "excluding singletons: D_obs=" << r.d_excl_singletons.observed
              << " z_str=" << fmt_opt(r.d_excl_singletons.z) << " p_hat=" << r.d_excl_singletons.p_hat << "\n"
              << "wrote " << (out / "report.json").string() << "\n";
    return 0;
}

int cmd_mapper(const Options& opt)
{
    io::RunConfig cfg = load_config(opt);
    const DataMatrix x = load_checked_data(cfg);
    const fs::path out = prepare_out_dir(opt.out_dir);
    const FeatureSplit split = make_split(x.cols(), cfg.pipeline.split.mode, cfg.pipeline.split.seed);
    PipelineRun run;
    try {
        run = run_pipeline(x, cfg.pipeline, split, derive_seed(cfg.pipeline.base_seed, kObservedSeedIndex));
    } catch (const Error& e) {
        rethrow_with_stage(e, "observed");
    }
    const io::json graph = io::mapper_graph_json(run.graph, x, &run.communities);
    write_file(out / "mapper_graph.json", graph.dump(2) + "\n");
    write_file(out / "communities.csv", io::communities_csv(x, run.communities));
    std::cout << "vertices=" << run.graph.vertex_count() << " edges=" << run.graph.edge_count()
              << " K=" << run.communities.k << " modularity=" << fmt_opt(run.communities.modularity) << "\n"
              << "wrote " << (out / "mapper_graph.json").string() << "\n";
    return 0;
}

int cmd_simulate(const Options& opt)
{
    io::ScenarioFile file = io::parse_scenario_file(io::read_json_file(opt.config));
    if (opt.seed)
        file.base_seed = *opt.seed;
    const fs::path out = prepare_out_dir(opt.out_dir);
    std::vector<ScenarioResult> rows;
    io::json results = io::json::array();
    for (std::size_t i = 0; i < file.scenarios.size(); ++i) {
        const auto& sc = file.scenarios[i];
        ScenarioResult r;
        try {
            r = run_scenario(sc.dgp, sc.R, sc.B, derive_seed(file.base_seed, i), opt.workers);
        } catch (const Error& e) {
            rethrow_with_stage(e, "scenario " + std::to_string(i));
        }
        std::cerr << r.spec.label() << ": rejection rate " << r.rejection_rate << " (" << r.runtime_seconds
                  << " s)\n";
        io::json z = io::json::array();
        for (double v : r.z)
            z.push_back(std::isnan(v) ? io::json(nullptr) : io::json(v));
        results.push_back({{"distribution", r.spec.label()},
                           {"n", r.spec.n},
                           {"p", r.spec.p},
                           {"B", r.B},
                           {"R", r.R},
                           {"mean_z", std::isnan(r.mean_z) ? io::json(nullptr) : io::json(r.mean_z)},
                           {"rejection_rate", r.rejection_rate},
                           {"rejections", r.rejections},
                           {"z", z}});
        rows.push_back(std::move(r));
    }
    write_file(out / "scenario_results.csv", scenario_table_csv(rows));
    write_file(out / "scenario_results.json",
               io::json({{"base_seed", file.base_seed}, {"scenarios", results}}).dump(2) + "\n");
    std::cout << scenario_table_text(rows);
    return 0;
}

int cmd_oracle(const Options& opt)
{
    namespace v = verification;
    const std::uint64_t seed = opt.seed.value_or(1);
    std::printf("Population dissociation vs closed-form bound (%ld samples, 3 SE tolerance)\n", opt.samples);
    std::printf("%-34s %10s %10s %10s %6s\n", "case", "estimate", "SE", "bound", "holds");
    struct Case {
        const char* name;
        Matrix sigma;
        v::IntervalPartition part;
        FeatureSplit split;
    };
    FeatureSplit two;
    two.block_a = {0};
    two.block_b = {1};
    FeatureSplit four;
    four.block_a = {0, 1};
    four.block_b = {2, 3};
    Matrix diag41 = Matrix::Zero(2, 2);
    diag41.diagonal() << 4, 1;
    // leading eigenvector (1, -1, 0, 0)/sqrt(2): both block averages vanish
    Matrix ortho = Matrix::Identity(4, 4);
    ortho(0, 0) = ortho(1, 1) = 2.5;
    ortho(0, 1) = ortho(1, 0) = -1.5;
    const std::vector<Case> cases{
        {"diag(4,1), split at 0", diag41, {{0.0}}, two},
        {"diag(4,1), breaks -1,0,1", diag41, {{-1.0, 0.0, 1.0}}, two},
        {"zero block loadings, split at 0", ortho, {{0.0}}, four},
    };
    bool all = true;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        Rng rng(derive_seed(seed, i));
        const auto c = v::population_dissociation_mc(CovModel::from_matrix(cases[i].sigma), cases[i].part,
                                                     cases[i].split, opt.samples, rng);
        all = all && c.holds();
        std::printf("%-34s %10.4f %10.4f %10.4f %6s\n", cases[i].name, c.estimate, c.standard_error, c.bound,
                    c.holds() ? "yes" : "NO");
    }

    std::printf("\nPermutation dissociation decay (K = 3, pi = 0.5/0.3/0.2, p = 10 block covariance)\n");
    const CovModel sigma = CovModel::from_matrix(block_covariance(10, 0.5));
    const FeatureSplit split = make_split(10, SplitMode::odd_even);
    const auto decay =
        v::permutation_decay_check({400, 1600, 6400}, {0.5, 0.3, 0.2}, sigma, split, 400, derive_seed(seed, 100),
                                   opt.workers);
    std::printf("%8s %14s\n", "n", "median D_perm");
    for (std::size_t i = 0; i < decay.n_grid.size(); ++i)
        std::printf("%8ld %14.6f\n", static_cast<long>(decay.n_grid[i]), decay.median_d[i]);
    const bool slope_ok = decay.slope >= -0.65 && decay.slope <= -0.35;
    std::printf("log-log slope %.4f (target -0.5, accepted [-0.65, -0.35]): %s\n", decay.slope,
                slope_ok ? "yes" : "NO");

    Rng vr(derive_seed(seed, 200));
    const DataMatrix x = sample_gaussian(sigma, 2000, SamplingStrategy::reduced_rank, vr);
    const auto var = v::finite_population_variance_check(x, 600, split, 20000, vr);
    const bool var_ok = var.relative_error() <= 0.10;
    std::printf("finite-population variance, n = 2000, n_k = 600: empirical %.6g, formula %.6g, rel. error %.3f: %s\n",
                var.empirical, var.formula, var.relative_error(), var_ok ? "yes" : "NO");
    return all && slope_ok && var_ok ? 0 : 1;
}

int report_error(const Error& e)
{
    switch (e.kind()) {
    case ErrorKind::input:
    case ErrorKind::parameter:
    case ErrorKind::config:
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    default:
        std::cerr << "error (" << to_string(e.kind()) << ") in stage "
                  << (e.stage().empty() ? std::string("unknown") : e.stage()) << ": " << e.message() << "\n";
        return kExitNumeric;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Covariance-preserving Gaussian null test for Mapper community structure"};
    app.require_subcommand(1);
    Options opt;
    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", opt.config, "JSON configuration file");
        if (needs_config)
            c->required()->check(CLI::ExistingFile);
        sub->add_option("--out-dir", opt.out_dir, "Directory for output files")->capture_default_str();
        sub->add_option("--workers", opt.workers, "Worker threads (0 = all cores)")
            ->check(CLI::NonNegativeNumber)
            ->capture_default_str();
        sub->add_option("--seed", opt.seed, "Overrides the base seed");
    };
    auto* test = app.add_subcommand("test", "Run the structured null test on a dataset");
    auto* mapper = app.add_subcommand("mapper", "Build the Mapper graph and communities only");
    auto* simulate = app.add_subcommand("simulate", "Run rejection-rate scenarios");
    auto* oracle = app.add_subcommand("oracle", "Print Monte Carlo checks against closed forms");
    add_common(test, true);
    add_common(mapper, true);
    add_common(simulate, true);
    add_common(oracle, false);
    oracle->add_option("--samples", opt.samples, "Monte Carlo samples per case")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*test)
            return cmd_test(opt);
        if (*mapper)
            return cmd_mapper(opt);
        if (*simulate)
            return cmd_simulate(opt);
        return cmd_oracle(opt);
    } catch (const Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}
