#pragma once

#include "mapnull/community.hpp"
#include "mapnull/io/config.hpp"
#include "mapnull/mapper.hpp"
#include "mapnull/nulltest.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mapnull::io {

inline constexpr const char* kReportSchema = "mapnull.report/1";
inline constexpr const char* kGraphSchema = "mapnull.mapper_graph/1";

inline json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// Text form of a number exactly as it appears in the JSON documents.
inline std::string json_number_text(const std::optional<double>& v)
{
    return v ? json(*v).dump() : std::string();
}

inline json filter_to_json(const FilterSpec& spec)
{
    return std::visit(
        [](const auto& f) -> json {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, LinfCentralityFilter>)
                return {{"kind", "linf_centrality"}};
            else if constexpr (std::is_same_v<T, PcoaFilter>)
                return {{"kind", "pcoa"}, {"axis", f.axis}};
            else if constexpr (std::is_same_v<T, KnnGeodesicMdsFilter>)
                return {{"kind", "knn_geodesic_mds"}, {"k", f.k}, {"axis", f.axis},
                        {"square_entries", f.square_entries}};
            else
                return {{"kind", "external"}, {"column", f.column}, {"jitter_sd", f.jitter_sd}};
        },
        spec);
}

/// Normalized echo of the configuration. The worker count is left out: it
/// never changes results.
inline json config_to_json(const RunConfig& cfg)
{
    const PipelineConfig& p = cfg.pipeline;
    json filters = json::array();
    for (const auto& f : p.filters)
        filters.push_back(filter_to_json(f));
    json mapper = {{"cover_mode", name_of(kCoverNames, p.mapper.cover_mode)},
                   {"resolutions", p.mapper.resolutions},
                   {"histogram_bins", p.mapper.histogram_bins}};
    if (p.mapper.cover_mode == CoverMode::equalized)
        mapper["gains"] = p.mapper.gains;
    else
        mapper["overlap_fraction"] = p.mapper.overlap_fraction;
    return {
        {"input", cfg.input_label},
        {"standardize", cfg.standardize},
        {"metric", name_of(kMetricNames, p.metric)},
        {"filters", filters},
        {"mapper", mapper},
        {"split", {{"mode", name_of(kSplitNames, p.split.mode)}, {"seed", p.split.seed}}},
        {"null", {{"B", p.replicates}, {"strategy", name_of(kStrategyNames, p.strategy)}, {"base_seed", p.base_seed}}},
        {"permutation", {{"n_perm", p.n_perm}}},
        {"report",
         {{"d_max", cfg.report.d_max},
          {"null_modularity", cfg.report.null_modularity},
          {"histogram_svg", cfg.report.histogram_svg},
          {"permutation_samples", cfg.report.permutation_samples}}},
    };
}

inline json variant_to_json(const StatVariant& v)
{
    return {{"observed", v.observed}, {"z", optional_number(v.z)}, {"p_hat", v.p_hat},
            {"null_samples", v.null_samples}};
}

inline json summary_to_json(const RunSummary& s)
{
    return {{"seed", s.seed},
            {"k", s.k},
            {"sizes", s.sizes},
            {"singletons", s.singletons},
            {"modularity", optional_number(s.modularity)},
            {"vertices", s.vertices},
            {"edges", s.edges},
            {"unassigned", s.unassigned}};
}

inline json permutation_to_json(const std::optional<PermutationResult>& p, bool samples)
{
    if (!p)
        return nullptr;
    json j = {{"observed", p->observed}, {"z", p->z}};
    if (samples)
        j["samples"] = p->samples;
    return j;
}

inline json report_json(const NullTestResult& r, const RunConfig& cfg, const DataMatrix& x)
{
    json j;
    j["schema"] = kReportSchema;
    j["config"] = config_to_json(cfg);
    j["input"] = {{"n", r.n}, {"p", r.p}, {"features", x.feature_names()}};
    j["split"] = {{"mode", name_of(kSplitNames, r.split.origin)},
                  {"seed", r.split.seed},
                  {"block_a", r.split.block_a},
                  {"block_b", r.split.block_b}};
    j["covariance"] = {{"strategy", name_of(kStrategyNames, r.strategy)},
                       {"ridge_epsilon", r.ridge_epsilon},
                       {"effective_rank", r.covariance_rank}};

    json obs = summary_to_json(r.observed_summary);
    obs["mapper_fingerprint"] = r.observed_summary.mapper_fingerprint;
    const auto& st = r.observed.statistic;
    json pairs = json::array();
    for (const auto& [key, gap] : st.per_pair)
        pairs.push_back({{"a", key.first}, {"b", key.second}, {"gap_a", gap.block_a}, {"gap_b", gap.block_b}});
    obs["per_pair"] = pairs;
    obs["argmax_pair"] = st.argmax_pair ? json::array({st.argmax_pair->first, st.argmax_pair->second})
                                        : json(nullptr);
    j["observed"] = obs;

    json stats = {{"d", variant_to_json(r.d)}, {"d_excl_singletons", variant_to_json(r.d_excl_singletons)}};
    if (cfg.report.d_max) {
        stats["d_max"] = variant_to_json(r.d_max);
        stats["d_max_excl_singletons"] = variant_to_json(r.d_max_excl_singletons);
    }
    j["statistics"] = stats;
    j["permutation"] = {
        {"n_perm", cfg.pipeline.n_perm},
        {"d", permutation_to_json(r.permutation, cfg.report.permutation_samples)},
        {"d_excl_singletons", permutation_to_json(r.permutation_excl_singletons, cfg.report.permutation_samples)}};

    json reps = json::array();
    for (std::size_t b = 0; b < r.replicates.size(); ++b) {
        json s = summary_to_json(r.replicates[b]);
        s["index"] = b;
        s["mapper_fingerprint_matches"] = r.replicates[b].mapper_fingerprint == r.observed_summary.mapper_fingerprint;
        reps.push_back(std::move(s));
    }
    j["replicates"] = reps;
    if (cfg.report.null_modularity) {
        const auto m = null_modularity_summary(r);
        j["null_modularity"] = {{"defined", m.defined}, {"mean", m.mean}, {"sd", m.sd},
                                {"q025", m.q025},       {"q975", m.q975}, {"mean_k", m.mean_k}};
    }
    return j;
}

/// One data row: K, D_obs, z_perm, z_str, p_hat, then the same four numbers
/// with singleton communities excluded, then B. Every number is copied from
/// its report.json text form; a missing value is an empty field.
inline std::string summary_csv(const json& report)
{
    auto text = [](const json& v) { return v.is_null() ? std::string() : v.dump(); };
    auto z_perm = [&](const char* key) {
        const json& p = report.at("permutation").at(key);
        return p.is_null() ? std::string() : text(p.at("z"));
    };
    const json& st = report.at("statistics");
    std::ostringstream os;
    os << "K,D_obs,z_perm,z_str,p_hat,D_obs_excl_singletons,z_perm_excl_singletons,z_str_excl_singletons,"
          "p_hat_excl_singletons,B\n";
    os << text(report.at("observed").at("k")) << ',' << text(st.at("d").at("observed")) << ',' << z_perm("d") << ','
       << text(st.at("d").at("z")) << ',' << text(st.at("d").at("p_hat")) << ','
       << text(st.at("d_excl_singletons").at("observed")) << ',' << z_perm("d_excl_singletons") << ','
       << text(st.at("d_excl_singletons").at("z")) << ',' << text(st.at("d_excl_singletons").at("p_hat")) << ','
       << text(report.at("config").at("null").at("B")) << '\n';
    return os.str();
}

inline std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s)
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

inline std::string communities_csv(const DataMatrix& x, const CommunityResult& c)
{
    std::ostringstream os;
    os << "id,community\n";
    for (std::size_t i = 0; i < c.point_community.size(); ++i) {
        os << csv_field(x.row_ids()[i]) << ',';
        if (c.point_community[i] == kUnassigned)
            os << "unassigned";
        else
            os << c.point_community[i];
        os << '\n';
    }
    return os.str();
}

inline json mapper_graph_json(const MapperGraph& g, const DataMatrix& x, const CommunityResult* communities = nullptr)
{
    json vs = json::array();
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        const auto& vx = g.vertices[v];
        vs.push_back({{"id", v}, {"cell", vx.cell}, {"cell_tag", vx.cell_tag}, {"cluster", vx.cluster},
                      {"points", vx.points}});
    }
    json es = json::array();
    for (const auto& [a, b] : g.edges)
        es.push_back(json::array({a, b}));
    json j = {{"schema", kGraphSchema},
              {"n_points", g.n_points},
              {"point_ids", x.row_ids()},
              {"config_fingerprint", g.config_fingerprint},
              {"vertices", vs},
              {"edges", es}};
    if (communities) {
        json pc = json::array();
        for (int c : communities->point_community)
            pc.push_back(c == kUnassigned ? json(nullptr) : json(c));
        j["communities"] = {{"k", communities->k},
                            {"vertex_community", communities->vertex_community},
                            {"point_community", pc},
                            {"modularity", optional_number(communities->modularity)}};
    }
    return j;
}

/// Checks a mapper_graph document: schema tag, field types, index ranges,
/// sorted point lists, and that the edge list is exactly the set of vertex
/// pairs sharing a point. Returns the problems found (empty when valid).
inline std::vector<std::string> validate_mapper_graph_json(const json& j)
{
    std::vector<std::string> errs;
    auto fail = [&](const std::string& m) { errs.push_back(m); };
    if (!j.is_object())
        return {"document is not an object"};
    for (const char* key : {"schema", "n_points", "point_ids", "config_fingerprint", "vertices", "edges"})
        if (!j.contains(key))
            fail(std::string("missing field '") + key + "'");
    if (!errs.empty())
        return errs;
    for (const auto& [key, value] : j.items())
        if (key != "schema" && key != "n_points" && key != "point_ids" && key != "config_fingerprint" &&
            key != "vertices" && key != "edges" && key != "communities")
            fail("unknown field '" + key + "'");
    if (j["schema"] != kGraphSchema)
        fail("schema must be " + std::string(kGraphSchema));
    if (!j["n_points"].is_number_integer() || j["n_points"].get<long long>() < 0)
        return errs.push_back("n_points must be a non-negative integer"), errs;
    const auto n = j["n_points"].get<long long>();
    if (!j["point_ids"].is_array() || static_cast<long long>(j["point_ids"].size()) != n)
        fail("point_ids must list n_points ids");
    if (!j["vertices"].is_array() || !j["edges"].is_array())
        return errs.push_back("vertices and edges must be arrays"), errs;

    std::vector<std::vector<int>> by_point(static_cast<std::size_t>(n));
    const auto& vs = j["vertices"];
    for (std::size_t v = 0; v < vs.size(); ++v) {
        const auto& vx = vs[v];
        const std::string at = "vertices[" + std::to_string(v) + "]";
        if (!vx.is_object() || !vx.contains("id") || !vx.contains("points") || !vx.contains("cell_tag") ||
            !vx.contains("cell") || !vx.contains("cluster")) {
            fail(at + ": needs id, cell, cell_tag, cluster and points");
            continue;
        }
        if (vx["id"] != v)
            fail(at + ": id must equal its position");
        if (!vx["points"].is_array() || vx["points"].empty()) {
            fail(at + ": points must be a nonempty array");
            continue;
        }
        long long prev = -1;
        for (const auto& p : vx["points"]) {
            if (!p.is_number_integer() || p.get<long long>() < 0 || p.get<long long>() >= n) {
                fail(at + ": point index out of range");
                break;
            }
            const long long q = p.get<long long>();
            if (q <= prev)
                fail(at + ": points must be strictly increasing");
            prev = q;
            by_point[static_cast<std::size_t>(q)].push_back(static_cast<int>(v));
        }
    }
    std::vector<std::pair<int, int>> expect;
    for (const auto& l : by_point)
        for (std::size_t a = 0; a < l.size(); ++a)
            for (std::size_t b = a + 1; b < l.size(); ++b)
                expect.emplace_back(l[a], l[b]);
    std::sort(expect.begin(), expect.end());
    expect.erase(std::unique(expect.begin(), expect.end()), expect.end());
    std::vector<std::pair<int, int>> got;
    for (const auto& e : j["edges"]) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
            fail("edges must be [u, v] integer pairs");
            return errs;
        }
        got.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    if (got != expect)
        fail("edges must be exactly the sorted vertex pairs (u < v) that share a point");

    if (j.contains("communities")) {
        const auto& c = j["communities"];
        if (!c.is_object() || !c.contains("vertex_community") || !c.contains("point_community") ||
            c["vertex_community"].size() != vs.size() ||
            static_cast<long long>(c["point_community"].size()) != n)
            fail("communities must give one label per vertex and per point");
    }
    return errs;
}

/// Rebuilds the graph from a document that passed validation.
inline MapperGraph parse_mapper_graph_json(const json& j)
{
    const auto errs = validate_mapper_graph_json(j);
    if (!errs.empty())
        throw Error(ErrorKind::input, "invalid mapper graph: " + errs.front());
    MapperGraph g;
    g.n_points = j["n_points"].get<Index>();
    g.config_fingerprint = j["config_fingerprint"].get<std::string>();
    for (const auto& vx : j["vertices"]) {
        MapperVertex v;
        v.points = vx["points"].get<std::vector<Index>>();
        v.cell = vx["cell"].get<std::size_t>();
        v.cell_tag = vx["cell_tag"].get<std::vector<int>>();
        v.cluster = vx["cluster"].get<int>();
        g.vertices.push_back(std::move(v));
    }
    for (const auto& e : j["edges"])
        g.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    return g;
}

/// Histogram of null samples with the observed value marked.
inline std::string null_histogram_svg(const std::vector<double>& samples, double observed,
                                      const std::string& title = "Null distribution of D", int bins = 20)
{
    const double w = 480, h = 300, left = 50, right = 20, top = 40, bottom = 40;
    double lo = observed, hi = observed;
    for (double s : samples)
        lo = std::min(lo, s), hi = std::max(hi, s);
    if (!(hi > lo))
        hi = lo + 1.0;
    const double pad = 0.02 * (hi - lo);
    lo -= pad, hi += pad;
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (double s : samples) {
        auto b = static_cast<int>((s - lo) / (hi - lo) * bins);
        counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
    }
    const int peak = std::max(1, *std::max_element(counts.begin(), counts.end()));
    const double pw = w - left - right, ph = h - top - bottom;
    auto sx = [&](double v) { return left + (v - lo) / (hi - lo) * pw; };

    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
       << w << ' ' << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       << title << "</text>\n";
    for (int b = 0; b < bins; ++b) {
        const double bh = ph * counts[static_cast<std::size_t>(b)] / peak;
        os << "<rect x=\"" << left + pw * b / bins << "\" y=\"" << top + ph - bh << "\" width=\"" << pw / bins
           << "\" height=\"" << bh << "\" fill=\"#8aa4c8\" stroke=\"#44546a\" stroke-width=\"0.5\"/>\n";
    }
    os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << sx(observed) << "\" y1=\"" << top << "\" x2=\"" << sx(observed) << "\" y2=\"" << top + ph
       << "\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n";
    os.precision(4);
    os << "<text x=\"" << sx(observed) << "\" y=\"" << top - 4 << "\" text-anchor=\"middle\" font-family=\"sans-serif\""
       << " font-size=\"11\" fill=\"#c0392b\">D_obs = " << observed << "</text>\n";
    os << "<text x=\"" << left << "\" y=\"" << h - 12 << "\" font-family=\"sans-serif\" font-size=\"11\">" << lo
       << "</text>\n";
    os << "<text x=\"" << left + pw << "\" y=\"" << h - 12
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << hi << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

} // namespace mapnull::io
