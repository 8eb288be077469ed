#pragma once

// Synthetic graph generators and graph-sampling transforms: preferential
// attachment, uniform random graphs, egocentric (hop-ball) sampling,
// top-degree sampling, appending preferentially-attached nodes to a base
// graph, and edge direction utilities.

#include <nodepred/graph.hpp>
#include <nodepred/rng.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

namespace nodepred {

enum class GraphFamily { ba, er, ego, top_degree, sample_plus_ba };

inline const char* family_name(GraphFamily f) {
    switch (f) {
        case GraphFamily::ba: return "ba";
        case GraphFamily::er: return "er";
        case GraphFamily::ego: return "ego";
        case GraphFamily::top_degree: return "top_degree";
        case GraphFamily::sample_plus_ba: return "sample+ba";
    }
    return "?";
}

namespace detail {

// Preferential-attachment engine shared by barabasi_albert and
// sample_plus_ba: `repeats` holds each node once per unit of degree, so a
// uniform draw from it is a degree-proportional draw.  Picks `m` distinct
// existing nodes; falls back to a uniform choice while every node has
// degree zero.
inline std::vector<NodeId> pick_attach_targets(const std::vector<NodeId>& repeats,
                                               NodeId num_existing, int m, Rng& rng) {
    std::vector<NodeId> targets;
    targets.reserve(static_cast<std::size_t>(m));
    if (repeats.empty()) {
        std::vector<NodeId> pool(static_cast<std::size_t>(num_existing));
        for (NodeId i = 0; i < num_existing; ++i) pool[static_cast<std::size_t>(i)] = i;
        return rng.sample_without_replacement(std::span<const NodeId>(pool),
                                              static_cast<std::size_t>(m));
    }
    while (targets.size() < static_cast<std::size_t>(m)) {
        const auto idx = static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(repeats.size()) - 1));
        const NodeId cand = repeats[idx];
        if (std::find(targets.begin(), targets.end(), cand) == targets.end())
            targets.push_back(cand);
    }
    return targets;
}

}  // namespace detail

// Undirected preferential-attachment graph: m isolated seed nodes, then each
// arriving node attaches m edges to distinct existing nodes with probability
// proportional to current degree (uniform while all degrees are zero).
// Exactly (n-m)*m edges.
inline Graph barabasi_albert(NodeId n, int m, std::uint64_t seed) {
    if (m < 1 || static_cast<NodeId>(m) >= n)
        throw std::invalid_argument("barabasi_albert: need 1 <= m < n");
    Rng rng(mix_seed(seed, 0x6261ull));  // "ba" stream
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(n - m) * static_cast<std::size_t>(m));
    std::vector<NodeId> repeats;
    repeats.reserve(2 * edges.capacity());
    for (NodeId v = m; v < n; ++v) {
        const auto targets = detail::pick_attach_targets(repeats, v, m, rng);
        for (NodeId t : targets) {
            edges.emplace_back(t, v);
            repeats.push_back(t);
            repeats.push_back(v);
        }
    }
    return Graph(n, false, std::move(edges));
}

// Undirected uniform random graph: each unordered pair is an edge
// independently with probability p.
inline Graph erdos_renyi(NodeId n, double p, std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("erdos_renyi: negative node count");
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("erdos_renyi: p must be in [0, 1]");
    Rng rng(mix_seed(seed, 0x6572ull));  // "er" stream
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            if (rng.uniform_real() < p) edges.emplace_back(u, v);
    return Graph(n, false, std::move(edges));
}

// Probability for an n-node uniform random graph to realize ~target_edges in
// expectation (the edge-count convenience parameterization).
inline double er_probability_for_edges(NodeId n, std::size_t target_edges) {
    if (n < 2) throw std::invalid_argument("er_probability_for_edges: need n >= 2");
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    const double p = static_cast<double>(target_edges) / pairs;
    if (p > 1.0)
        throw std::invalid_argument("er_probability_for_edges: more edges than pairs");
    return p;
}

struct EgoBand {
    double lower = 2.0 / 3.0;
    double upper = 3.0 / 2.0;
};

struct EgoResult {
    bool ok = false;
    InducedGraph sample;   // valid iff ok
    int attempts = 0;      // start nodes tried
    int hops = 0;          // hop count of the accepted ball
    NodeId realized_nodes = 0;
};

// Repeatedly pick a uniform start node and grow its hop-ball until the node
// count reaches target_nodes (or the component is exhausted); accept when the
// final count lands inside [lower*target, upper*target], else retry with a
// fresh start, up to max_attempts.
inline EgoResult ego_sample(const Graph& base, NodeId target_nodes, EgoBand band,
                            std::uint64_t seed, int max_attempts = 100) {
    if (base.directed()) throw std::invalid_argument("ego_sample: base must be undirected");
    if (target_nodes < 1) throw std::invalid_argument("ego_sample: target must be positive");
    if (!(band.lower < 1.0 && 1.0 < band.upper))
        throw std::invalid_argument("ego_sample: band must satisfy lower < 1 < upper");
    if (max_attempts < 1) throw std::invalid_argument("ego_sample: max_attempts must be >= 1");

    Rng rng(mix_seed(seed, 0x65676full));  // "ego" stream
    const double lo = band.lower * static_cast<double>(target_nodes);
    const double hi = band.upper * static_cast<double>(target_nodes);

    EgoResult result;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        result.attempts = attempt;
        const NodeId start = rng.uniform_int(0, base.num_nodes() - 1);
        std::vector<std::uint8_t> visited(static_cast<std::size_t>(base.num_nodes()), 0);
        std::vector<NodeId> ball{start};
        visited[static_cast<std::size_t>(start)] = 1;
        std::vector<NodeId> frontier{start};
        int hops = 0;
        while (static_cast<NodeId>(ball.size()) < target_nodes && !frontier.empty()) {
            std::vector<NodeId> next;
            for (NodeId u : frontier)
                for (NodeId w : base.neighbors(u, NeighborMode::both))
                    if (!visited[static_cast<std::size_t>(w)]) {
                        visited[static_cast<std::size_t>(w)] = 1;
                        ball.push_back(w);
                        next.push_back(w);
                    }
            if (!next.empty()) ++hops;
            frontier = std::move(next);
        }
        const auto count = static_cast<double>(ball.size());
        if (count >= lo && count <= hi) {
            result.ok = true;
            result.hops = hops;
            result.realized_nodes = static_cast<NodeId>(ball.size());
            result.sample = induced_subgraph(base, ball);
            return result;
        }
    }
    return result;
}

// Induced subgraph on the n highest-degree nodes of base (ties broken by
// smaller node index; directed degree = in + out).
inline InducedGraph top_degree_sample(const Graph& base, NodeId n) {
    if (n < 1 || n > base.num_nodes())
        throw std::invalid_argument("top_degree_sample: need 1 <= n <= num_nodes");
    std::vector<NodeId> ids(static_cast<std::size_t>(base.num_nodes()));
    for (NodeId i = 0; i < base.num_nodes(); ++i) ids[static_cast<std::size_t>(i)] = i;
    std::stable_sort(ids.begin(), ids.end(), [&](NodeId a, NodeId b) {
        return base.total_degree(a) > base.total_degree(b);
    });
    ids.resize(static_cast<std::size_t>(n));
    return induced_subgraph(base, ids);
}

struct SamplePlusBa {
    Graph graph;
    Partition partition;  // test nodes = the appended ones
};

// Append test_count preferentially-attached nodes (m edges each) to
// train_base; the partition marks exactly the appended nodes as test.  On
// directed bases new edges run existing -> new, so aggregation over incoming
// neighbors lets appended nodes see the base graph.  Base features, if any,
// are extended with all-zero rows for the appended nodes.
inline SamplePlusBa sample_plus_ba(const Graph& train_base, NodeId test_count, int m,
                                   std::uint64_t seed) {
    if (test_count < 1) throw std::invalid_argument("sample_plus_ba: test_count must be >= 1");
    if (m < 1 || static_cast<NodeId>(m) > train_base.num_nodes())
        throw std::invalid_argument("sample_plus_ba: need 1 <= m <= base node count");

    Rng rng(mix_seed(seed, 0x73626aull));  // "sample+ba" stream
    const NodeId base_n = train_base.num_nodes();
    const NodeId total_n = base_n + test_count;

    std::vector<NodeId> repeats;
    repeats.reserve(2 * train_base.num_edges() +
                    2 * static_cast<std::size_t>(test_count) * static_cast<std::size_t>(m));
    for (const auto& [u, v] : train_base.edges()) {
        repeats.push_back(u);
        repeats.push_back(v);
    }

    std::vector<Edge> edges = train_base.edges();
    edges.reserve(edges.size() +
                  static_cast<std::size_t>(test_count) * static_cast<std::size_t>(m));
    for (NodeId v = base_n; v < total_n; ++v) {
        const auto targets = detail::pick_attach_targets(repeats, v, m, rng);
        for (NodeId t : targets) {
            edges.emplace_back(t, v);
            repeats.push_back(t);
            repeats.push_back(v);
        }
    }

    std::optional<Mat<double>> features;
    if (train_base.has_features()) {
        const auto& base = train_base.features();
        Mat<double> f(static_cast<std::size_t>(total_n), base.cols());
        std::copy(base.data(), base.data() + base.size(), f.data());
        features = std::move(f);
    }

    std::vector<NodeId> test_nodes(static_cast<std::size_t>(test_count));
    for (NodeId i = 0; i < test_count; ++i) test_nodes[static_cast<std::size_t>(i)] = base_n + i;

    SamplePlusBa out{Graph(total_n, train_base.directed(), std::move(edges), std::move(features)),
                     Partition(total_n, std::move(test_nodes))};
    return out;
}

// Flip every directed edge; undirected input is rejected rather than silently
// returned unchanged.
inline Graph reverse_edges(const Graph& g) {
    if (!g.directed()) throw std::invalid_argument("reverse_edges: graph is undirected");
    std::vector<Edge> edges;
    edges.reserve(g.num_edges());
    for (const auto& [u, v] : g.edges()) edges.emplace_back(v, u);
    std::optional<Mat<double>> features;
    if (g.has_features()) features = g.features();
    return Graph(g.num_nodes(), true, std::move(edges), std::move(features));
}

// Symmetric closure: every arc becomes an undirected edge, duplicates merged.
// Undirected input is returned unchanged.
inline Graph undirect(const Graph& g) {
    std::vector<Edge> edges = g.edges();
    std::optional<Mat<double>> features;
    if (g.has_features()) features = g.features();
    return Graph(g.num_nodes(), false, std::move(edges), std::move(features));
}

}  // namespace nodepred
