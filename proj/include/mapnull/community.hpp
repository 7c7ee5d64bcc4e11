#pragma once

#include "mapnull/error.hpp"
#include "mapnull/mapper.hpp"
#include "mapnull/rng.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

namespace mapnull {

/// Vertex -> community label. Labels are non-negative but need not be
/// contiguous.
using Partition = std::vector<int>;

/// Newman-Girvan modularity of an unweighted graph:
/// Q = sum_c (e_c / m - (d_c / 2m)^2).
inline double modularity(const MapperGraph& g, const Partition& partition)
{
    require(partition.size() == g.vertex_count(), ErrorKind::input, "partition must cover every vertex");
    const double m = static_cast<double>(g.edge_count());
    if (m == 0)
        throw Error(ErrorKind::undefined_modularity, "modularity is undefined for a graph without edges");
    std::map<int, double> internal, degree;
    for (const auto& [u, v] : g.edges) {
        degree[partition[u]] += 1.0;
        degree[partition[v]] += 1.0;
        if (partition[u] == partition[v])
            internal[partition[u]] += 1.0;
    }
    double q = 0.0;
    for (const auto& [c, dc] : degree) {
        const double frac = dc / (2.0 * m);
        q += internal[c] / m - frac * frac;
    }
    return q;
}

namespace detail {

// Weighted undirected graph used across Louvain levels. `loops[i]` is the
// weight of the self-loop at i (internal edges of a collapsed community).
struct LouvainGraph {
    std::vector<std::vector<std::pair<int, double>>> adj; // neighbours j != i
    std::vector<double> loops;
    std::vector<double> degree; // sum of incident weights, loops counted twice
    double total = 0.0;         // m = sum of edge weights

    int size() const { return static_cast<int>(adj.size()); }
};

inline LouvainGraph from_mapper(const MapperGraph& g)
{
    LouvainGraph lg;
    const auto n = g.vertex_count();
    lg.adj.resize(n);
    lg.loops.assign(n, 0.0);
    lg.degree.assign(n, 0.0);
    for (const auto& [u, v] : g.edges) {
        lg.adj[u].emplace_back(v, 1.0);
        lg.adj[v].emplace_back(u, 1.0);
        lg.degree[u] += 1.0;
        lg.degree[v] += 1.0;
        lg.total += 1.0;
    }
    return lg;
}

/// One local-moving phase. Returns true if any node moved.
inline bool local_moving(const LouvainGraph& g, std::vector<int>& comm, Rng& rng)
{
    const int n = g.size();
    const double two_m = 2.0 * g.total;
    std::vector<double> tot(n, 0.0);
    for (int i = 0; i < n; ++i)
        tot[comm[i]] += g.degree[i];

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);

    std::vector<double> link(n, 0.0);
    std::vector<int> touched;
    bool any_move = false;
    for (int pass = 0; pass < 10000; ++pass) {
        bool moved = false;
        for (int i : order) {
            const int old = comm[i];
            const double ki = g.degree[i];
            tot[old] -= ki;
            touched.clear();
            for (const auto& [j, w] : g.adj[i]) {
                if (link[comm[j]] == 0.0)
                    touched.push_back(comm[j]);
                link[comm[j]] += w;
            }
            std::sort(touched.begin(), touched.end());
            const double stay = link[old] - tot[old] * ki / two_m;
            int cand = -1;
            double cand_gain = -std::numeric_limits<double>::infinity();
            for (int c : touched) {
                if (c == old)
                    continue;
                const double gain = link[c] - tot[c] * ki / two_m;
                // ascending candidate order: strict '>' keeps the lowest index on ties
                if (gain > cand_gain)
                    cand = c, cand_gain = gain;
            }
            const int best = (cand >= 0 && cand_gain > stay + 1e-12) ? cand : old;
            for (int c : touched)
                link[c] = 0.0;
            tot[best] += ki;
            if (best != old) {
                comm[i] = best;
                moved = true;
                any_move = true;
            }
        }
        if (!moved)
            break;
    }
    return any_move;
}

/// Relabels 0..K-1 by first appearance; returns K.
inline int compact_labels(std::vector<int>& labels)
{
    std::map<int, int> remap;
    for (int& l : labels) {
        auto it = remap.find(l);
        if (it == remap.end())
            it = remap.emplace(l, static_cast<int>(remap.size())).first;
        l = it->second;
    }
    return static_cast<int>(remap.size());
}

inline LouvainGraph aggregate(const LouvainGraph& g, const std::vector<int>& comm, int k)
{
    LouvainGraph out;
    out.adj.resize(k);
    out.loops.assign(k, 0.0);
    out.degree.assign(k, 0.0);
    out.total = g.total;
    std::vector<std::map<int, double>> w(k);
    for (int i = 0; i < g.size(); ++i) {
        out.loops[comm[i]] += g.loops[i];
        out.degree[comm[i]] += g.degree[i];
        for (const auto& [j, wij] : g.adj[i]) {
            if (j < i)
                continue;
            if (comm[i] == comm[j])
                out.loops[comm[i]] += wij;
            else {
                w[comm[i]][comm[j]] += wij;
                w[comm[j]][comm[i]] += wij;
            }
        }
    }
    for (int c = 0; c < k; ++c)
        for (const auto& [d, wcd] : w[c])
            out.adj[c].emplace_back(d, wcd);
    return out;
}

} // namespace detail

/// Two-phase Louvain modularity maximization (resolution 1).
///
/// Node sweep order is shuffled by `rng` at every level; among equal gains
/// the lowest community index wins and a node only leaves its community for a
/// gain larger by more than 1e-12. Labels of the result are contiguous in
/// order of first appearance over vertices. Isolated vertices stay alone.
inline Partition louvain(const MapperGraph& g, Rng& rng)
{
    const int n = static_cast<int>(g.vertex_count());
    Partition result(n);
    std::iota(result.begin(), result.end(), 0);
    if (n == 0 || g.edge_count() == 0)
        return result;

    detail::LouvainGraph level = detail::from_mapper(g);
    while (true) {
        std::vector<int> comm(level.size());
        std::iota(comm.begin(), comm.end(), 0);
        if (!detail::local_moving(level, comm, rng))
            break;
        const int k = detail::compact_labels(comm);
        for (int& r : result)
            r = comm[r];
        if (k == level.size())
            break;
        level = detail::aggregate(level, comm, k);
    }
    detail::compact_labels(result);
    return result;
}

inline constexpr int kUnassigned = -1;

struct CommunityResult {
    std::vector<int> vertex_community;
    std::vector<int> point_community; // kUnassigned for points in no vertex
    int k = 0;                        // number of communities
    std::vector<Index> sizes;         // assigned points per community, non-increasing
    std::optional<double> modularity; // absent for edgeless graphs
    std::vector<bool> singleton_flags;

    Index assigned_count() const { return std::accumulate(sizes.begin(), sizes.end(), Index{0}); }
    Index unassigned_count() const { return static_cast<Index>(point_community.size()) - assigned_count(); }
    int singleton_count() const
    {
        return static_cast<int>(std::count(singleton_flags.begin(), singleton_flags.end(), true));
    }
};

/// Plurality assignment of points to communities.
///
/// Each point takes the community most frequent among the vertices that
/// contain it, ties to the lowest input label; points in no vertex are
/// unassigned. Communities are then relabeled 0..K-1 by decreasing point
/// count (ties by input label). A community can end with zero points when
/// every member point prefers another one; it keeps its slot at the end.
inline CommunityResult assign_points(const MapperGraph& g, const Partition& partition)
{
    require(partition.size() == g.vertex_count(), ErrorKind::input, "partition must cover every vertex");
    std::vector<int> labels(partition.begin(), partition.end());
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    for (int l : labels)
        require(l >= 0, ErrorKind::input, "community labels must be non-negative");

    const auto memberships = g.point_memberships();
    std::vector<int> raw(static_cast<std::size_t>(g.n_points), kUnassigned);
    std::map<int, int> votes;
    for (std::size_t p = 0; p < memberships.size(); ++p) {
        if (memberships[p].empty())
            continue;
        votes.clear();
        for (int v : memberships[p])
            ++votes[partition[v]];
        int best = -1, best_votes = 0;
        for (const auto& [c, count] : votes) // ascending label
            if (count > best_votes)
                best = c, best_votes = count;
        raw[p] = best;
    }

    std::map<int, Index> count;
    for (int l : labels)
        count[l] = 0;
    for (int c : raw)
        if (c != kUnassigned)
            ++count[c];
    std::vector<int> order(labels);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return count[a] > count[b]; });
    std::map<int, int> relabel;
    for (std::size_t i = 0; i < order.size(); ++i)
        relabel[order[i]] = static_cast<int>(i);

    CommunityResult r;
    r.k = static_cast<int>(order.size());
    r.vertex_community.resize(partition.size());
    for (std::size_t v = 0; v < partition.size(); ++v)
        r.vertex_community[v] = relabel[partition[v]];
    r.point_community.resize(raw.size());
    for (std::size_t p = 0; p < raw.size(); ++p)
        r.point_community[p] = raw[p] == kUnassigned ? kUnassigned : relabel[raw[p]];
    for (int l : order) {
        r.sizes.push_back(count[l]);
        r.singleton_flags.push_back(count[l] == 1);
    }
    if (g.edge_count() > 0)
        r.modularity = modularity(g, r.vertex_community);
    return r;
}

} // namespace mapnull
