#pragma once

#include "mapnull/error.hpp"
#include "mapnull/io/csv.hpp"
#include "mapnull/nulltest.hpp"
#include "mapnull/simulation.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace mapnull::io {

using json = nlohmann::json;

namespace detail {

[[noreturn]] inline void schema_error(const std::string& path, const std::string& msg)
{
    throw Error(ErrorKind::config, path + ": " + msg);
}

// Typed, path-aware view of one JSON object that rejects keys it was not
// asked about.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            schema_error(path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    bool has(const std::string& key)
    {
        seen_.insert(key);
        return j_.contains(key);
    }
    const json& raw(const std::string& key)
    {
        if (!has(key))
            schema_error(at(key), "required field is missing");
        return j_.at(key);
    }

    std::string string(const std::string& key)
    {
        const json& v = raw(key);
        if (!v.is_string())
            schema_error(at(key), "expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback)
    {
        return has(key) ? string(key) : fallback;
    }

    double number(const std::string& key)
    {
        const json& v = raw(key);
        if (!v.is_number())
            schema_error(at(key), "expected a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    long long integer(const std::string& key)
    {
        const json& v = raw(key);
        if (!v.is_number_integer())
            schema_error(at(key), "expected an integer");
        return v.get<long long>();
    }
    long long integer(const std::string& key, long long fallback) { return has(key) ? integer(key) : fallback; }

    std::uint64_t seed(const std::string& key, std::uint64_t fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = j_.at(key);
        if (v.is_number_unsigned())
            return v.get<std::uint64_t>();
        if (v.is_number_integer() && v.get<long long>() >= 0)
            return static_cast<std::uint64_t>(v.get<long long>());
        schema_error(at(key), "expected a non-negative integer");
    }

    bool boolean(const std::string& key, bool fallback)
    {
        if (!has(key))
            return fallback;
        const json& v = j_.at(key);
        if (!v.is_boolean())
            schema_error(at(key), "expected true or false");
        return v.get<bool>();
    }

    const json& array(const std::string& key)
    {
        const json& v = raw(key);
        if (!v.is_array())
            schema_error(at(key), "expected an array");
        return v;
    }

    template <typename E>
    E choice(const std::string& key, const std::vector<std::pair<std::string, E>>& options, E fallback)
    {
        if (!has(key))
            return fallback;
        const std::string s = string(key);
        std::string names;
        for (const auto& [name, value] : options) {
            if (name == s)
                return value;
            names += (names.empty() ? "" : ", ") + name;
        }
        schema_error(at(key), "unknown value '" + s + "' (expected one of: " + names + ")");
    }

    /// Call after reading every field.
    void finish() const
    {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key))
                schema_error(at(key), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline std::string index_path(const std::string& base, std::size_t i)
{
    return base + "[" + std::to_string(i) + "]";
}

// Runs a validator, reporting any failure as a schema error at `path`.
template <typename Fn>
void validate_at(const std::string& path, Fn&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::parameter || e.kind() == ErrorKind::config)
            schema_error(path, e.what());
        throw;
    }
}

} // namespace detail

inline const std::vector<std::pair<std::string, Metric>> kMetricNames{
    {"euclidean", Metric::euclidean},
    {"variance_normalized_euclidean", Metric::variance_normalized_euclidean},
    {"pearson_correlation", Metric::pearson_correlation},
};
inline const std::vector<std::pair<std::string, CoverMode>> kCoverNames{
    {"equalized", CoverMode::equalized},
    {"fixed_width", CoverMode::fixed_width},
};
inline const std::vector<std::pair<std::string, SplitMode>> kSplitNames{
    {"odd_even", SplitMode::odd_even},
    {"random", SplitMode::random},
};
inline const std::vector<std::pair<std::string, SamplingStrategy>> kStrategyNames{
    {"ridge", SamplingStrategy::ridge},
    {"reduced_rank", SamplingStrategy::reduced_rank},
};

template <typename E>
std::string name_of(const std::vector<std::pair<std::string, E>>& table, E value)
{
    for (const auto& [name, v] : table)
        if (v == value)
            return name;
    return "?";
}

/// External filter as written in the config: values come from a column.
struct ExternalColumn {
    std::size_t filter_slot = 0;
    std::string column;
};

struct ReportOptions {
    bool d_max = true;
    bool null_modularity = true;
    bool histogram_svg = true;
    bool permutation_samples = true;
};

struct RunConfig {
    std::string input;       // resolved path
    std::string input_label; // as written in the config
    bool standardize = false;
    PipelineConfig pipeline;
    std::vector<ExternalColumn> external_columns;
    ReportOptions report;
};

inline FilterSpec parse_filter(const json& j, const std::string& path, std::vector<ExternalColumn>& ext,
                               std::size_t slot)
{
    detail::ObjectReader r(j, path);
    const std::string kind = r.string("kind");
    FilterSpec spec;
    if (kind == "linf_centrality") {
        spec = LinfCentralityFilter{};
    } else if (kind == "pcoa") {
        spec = PcoaFilter{static_cast<int>(r.integer("axis", 1))};
    } else if (kind == "knn_geodesic_mds") {
        KnnGeodesicMdsFilter f;
        f.k = static_cast<int>(r.integer("k", 30));
        f.axis = static_cast<int>(r.integer("axis", 1));
        f.square_entries = r.boolean("square_entries", false);
        spec = f;
    } else if (kind == "external") {
        ExternalFilter f;
        f.column = r.string("column");
        f.jitter_sd = r.number("jitter_sd", 0.0);
        ext.push_back({slot, f.column});
        spec = f;
    } else {
        detail::schema_error(r.at("kind"), "unknown filter kind '" + kind +
                                               "' (expected linf_centrality, pcoa, knn_geodesic_mds or external)");
    }
    r.finish();
    // Length of external values is checked once the data are loaded.
    if (!std::holds_alternative<ExternalFilter>(spec))
        detail::validate_at(path, [&] { validate_filter(spec, 0); });
    else
        detail::validate_at(path, [&] {
            require(std::get<ExternalFilter>(spec).jitter_sd >= 0, ErrorKind::parameter, "jitter_sd must be >= 0");
        });
    return spec;
}

/// Parses and schema-checks a run config. Relative input paths are resolved
/// against `base_dir`.
inline RunConfig parse_run_config(const json& j, const std::filesystem::path& base_dir = {})
{
    RunConfig cfg;
    detail::ObjectReader root(j, "");
    cfg.input_label = root.string("input");
    const std::filesystem::path in(cfg.input_label);
    cfg.input = (in.is_absolute() || base_dir.empty() ? in : base_dir / in).string();
    cfg.standardize = root.boolean("standardize", false);

    PipelineConfig& p = cfg.pipeline;
    p.metric = root.choice("metric", kMetricNames, Metric::euclidean);

    if (root.has("filters")) {
        const json& fl = root.array("filters");
        if (fl.empty())
            detail::schema_error("filters", "at least one filter is required");
        p.filters.clear();
        for (std::size_t i = 0; i < fl.size(); ++i)
            p.filters.push_back(parse_filter(fl[i], detail::index_path("filters", i), cfg.external_columns, i));
    }

    if (root.has("mapper")) {
        detail::ObjectReader m(root.raw("mapper"), "mapper");
        MapperConfig& mc = p.mapper;
        mc.cover_mode = m.choice("cover_mode", kCoverNames, CoverMode::equalized);
        auto read_list = [&](const std::string& key, auto& target, bool integral) {
            if (!m.has(key))
                return;
            const json& a = m.array(key);
            target.clear();
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (integral ? !a[i].is_number_integer() : !a[i].is_number())
                    detail::schema_error(detail::index_path(m.at(key), i),
                                         integral ? "expected an integer" : "expected a number");
                target.push_back(a[i].get<typename std::decay_t<decltype(target)>::value_type>());
            }
        };
        read_list("resolutions", mc.resolutions, true);
        read_list("gains", mc.gains, false);
        mc.overlap_fraction = m.number("overlap_fraction", mc.overlap_fraction);
        mc.histogram_bins = static_cast<int>(m.integer("histogram_bins", mc.histogram_bins));
        m.finish();
        // A single resolution or gain applies to every filter dimension.
        if (mc.resolutions.size() == 1 && p.filters.size() == 2)
            mc.resolutions.push_back(mc.resolutions[0]);
        if (mc.gains.size() == 1 && p.filters.size() == 2)
            mc.gains.push_back(mc.gains[0]);
    } else if (p.filters.size() == 1) {
        p.mapper.resolutions.resize(1);
        p.mapper.gains.resize(1);
    }
    detail::validate_at("mapper", [&] {
        for (std::size_t i = 0; i < p.mapper.gains.size() && p.mapper.cover_mode == CoverMode::equalized; ++i)
            if (!(p.mapper.gains[i] >= 1.0))
                detail::schema_error(detail::index_path("mapper.gains", i), "gain must be >= 1 in equalized mode");
        p.mapper.validate(p.filters.size());
    });

    if (root.has("split")) {
        detail::ObjectReader s(root.raw("split"), "split");
        p.split.mode = s.choice("mode", kSplitNames, SplitMode::odd_even);
        p.split.seed = s.seed("seed", 0);
        s.finish();
    }

    if (root.has("null")) {
        detail::ObjectReader nl(root.raw("null"), "null");
        const long long b = nl.integer("B", p.replicates);
        if (b < 1)
            detail::schema_error("null.B", "must be >= 1");
        p.replicates = static_cast<int>(b);
        p.strategy = nl.choice("strategy", kStrategyNames, p.strategy);
        p.base_seed = nl.seed("base_seed", p.base_seed);
        nl.finish();
    }

    if (root.has("permutation")) {
        detail::ObjectReader pm(root.raw("permutation"), "permutation");
        const long long np = pm.integer("n_perm", p.n_perm);
        if (np != 0 && np < 2)
            detail::schema_error("permutation.n_perm", "must be 0 or >= 2");
        p.n_perm = static_cast<int>(np);
        pm.finish();
    }

    if (root.has("report")) {
        detail::ObjectReader rp(root.raw("report"), "report");
        cfg.report.d_max = rp.boolean("d_max", true);
        cfg.report.null_modularity = rp.boolean("null_modularity", true);
        cfg.report.histogram_svg = rp.boolean("histogram_svg", true);
        cfg.report.permutation_samples = rp.boolean("permutation_samples", true);
        rp.finish();
    }
    root.finish();
    return cfg;
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::config, "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::config, path + ": invalid JSON: " + e.what());
    }
}

inline RunConfig load_run_config(const std::string& path)
{
    return parse_run_config(read_json_file(path), std::filesystem::path(path).parent_path());
}

/// Reads the input table and splits off external-filter columns; every
/// other column becomes a feature.
inline DataMatrix load_data(RunConfig& cfg)
{
    CsvTable t = read_csv_file(cfg.input);
    std::vector<bool> external(t.headers.size(), false);
    for (const auto& e : cfg.external_columns) {
        Index col = 0;
        try {
            col = t.column(e.column);
        } catch (const Error&) {
            detail::schema_error(detail::index_path("filters", e.filter_slot) + ".column",
                                 "column '" + e.column + "' not found in " + cfg.input_label);
        }
        external[static_cast<std::size_t>(col)] = true;
        auto& f = std::get<ExternalFilter>(cfg.pipeline.filters[e.filter_slot]);
        f.values.assign(t.values.col(col).data(), t.values.col(col).data() + t.values.rows());
    }
    std::vector<std::string> names;
    std::vector<Index> keep;
    for (std::size_t j = 0; j < t.headers.size(); ++j)
        if (!external[j]) {
            names.push_back(t.headers[j]);
            keep.push_back(static_cast<Index>(j));
        }
    Matrix x(t.values.rows(), static_cast<Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j)
        x.col(static_cast<Index>(j)) = t.values.col(keep[j]);
    if (cfg.standardize)
        x = standardize_columns(x);
    return DataMatrix(std::move(x), std::move(names), std::move(t.row_ids));
}

/// One simulation scenario as written in a scenario file.
struct ScenarioSpec {
    DGPSpec dgp;
    int R = 20;
    int B = 20;
};

struct ScenarioFile {
    std::vector<ScenarioSpec> scenarios;
    std::uint64_t base_seed = 1;
};

inline ScenarioFile parse_scenario_file(const json& j)
{
    ScenarioFile out;
    detail::ObjectReader root(j, "");
    out.base_seed = root.seed("base_seed", 1);
    const long long default_r = root.integer("R", 20);
    const long long default_b = root.integer("B", 20);
    const json& list = root.array("scenarios");
    if (list.empty())
        detail::schema_error("scenarios", "at least one scenario is required");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = detail::index_path("scenarios", i);
        detail::ObjectReader s(list[i], path);
        ScenarioSpec sc;
        const std::string dist = s.string("distribution");
        DGPKind kind{};
        try {
            kind = parse_dgp_kind(dist);
        } catch (const Error& e) {
            detail::schema_error(s.at("distribution"), e.what());
        }
        sc.dgp = DGPSpec::make(kind, s.integer("n", 300), s.integer("p", 10));
        sc.dgp.rho = s.number("rho", sc.dgp.rho);
        sc.dgp.df = s.number("df", sc.dgp.df);
        sc.dgp.delta = s.number("delta", sc.dgp.delta);
        sc.dgp.k_shifted = s.integer("k_shifted", sc.dgp.k_shifted);
        sc.dgp.standardize = s.boolean("standardize", sc.dgp.standardize);
        const long long r = s.integer("R", default_r), b = s.integer("B", default_b);
        s.finish();
        if (r < 1)
            detail::schema_error(s.at("R"), "must be >= 1");
        if (b < 2)
            detail::schema_error(s.at("B"), "must be >= 2");
        sc.R = static_cast<int>(r);
        sc.B = static_cast<int>(b);
        detail::validate_at(path, [&] { sc.dgp.validate(); });
        out.scenarios.push_back(sc);
    }
    root.finish();
    return out;
}

} // namespace mapnull::io
