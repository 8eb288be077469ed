#pragma once

// Graph core: immutable directed/undirected graphs with optional node
// features, node partitions, induced subgraphs, and negative (non-edge)
// graphs used to build spurious neighborhoods.

#include <nodepred/matrix.hpp>
#include <nodepred/rng.hpp>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace nodepred {

using NodeId = std::int64_t;
using Edge = std::pair<NodeId, NodeId>;

enum class NeighborMode { in, out, both };

namespace detail {

inline std::uint64_t edge_key(NodeId u, NodeId v, NodeId n) {
    return static_cast<std::uint64_t>(u) * static_cast<std::uint64_t>(n) +
           static_cast<std::uint64_t>(v);
}

template <class T>
bool contains_sorted(const std::vector<T>& v, const T& x) {
    return std::binary_search(v.begin(), v.end(), x);
}

// Sorted unique copy of an id list, validated against [0, n).
inline std::vector<NodeId> canonical_node_set(std::span<const NodeId> ids, NodeId n,
                                              const char* what) {
    std::vector<NodeId> out(ids.begin(), ids.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (!out.empty() && (out.front() < 0 || out.back() >= n))
        throw std::invalid_argument(std::string(what) + ": node id out of range");
    return out;
}

}  // namespace detail

// Set of edges known to be absent from a positive graph, restricted to a node
// scope.  Directedness matches the graph it was sampled against.
class NegativeGraph;

class Graph {
public:
    Graph() = default;

    // Edges are deduplicated; undirected edges are stored as (min, max).
    // Self-loops or out-of-range endpoints are rejected.
    Graph(NodeId num_nodes, bool directed, std::vector<Edge> edges,
          std::optional<Mat<double>> features = std::nullopt)
        : num_nodes_(num_nodes), directed_(directed) {
        if (num_nodes < 1) throw std::invalid_argument("Graph: need at least one node");
        for (auto& [u, v] : edges) {
            if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes)
                throw std::invalid_argument("Graph: edge endpoint out of range");
            if (u == v) throw std::invalid_argument("Graph: self-loops are not allowed");
            if (!directed && u > v) std::swap(u, v);
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        edges_ = std::move(edges);
        build_adjacency();
        if (features) set_features(std::move(*features));
    }

    NodeId num_nodes() const { return num_nodes_; }
    bool directed() const { return directed_; }
    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t num_edges() const { return edges_.size(); }

    bool has_edge(NodeId u, NodeId v) const {
        if (u < 0 || u >= num_nodes_ || v < 0 || v >= num_nodes_ || u == v) return false;
        if (!directed_ && u > v) std::swap(u, v);
        return edge_set_.count(detail::edge_key(u, v, num_nodes_)) != 0;
    }

    // Sorted neighbor list under the given mode.  For undirected graphs all
    // modes coincide.  Out of range ids are rejected.
    const std::vector<NodeId>& neighbors(NodeId n, NeighborMode mode) const {
        check_node(n);
        if (!directed_) return out_adj_[static_cast<std::size_t>(n)];
        switch (mode) {
            case NeighborMode::in: return in_adj_[static_cast<std::size_t>(n)];
            case NeighborMode::out: return out_adj_[static_cast<std::size_t>(n)];
            case NeighborMode::both: return both_adj_[static_cast<std::size_t>(n)];
        }
        throw std::invalid_argument("neighbors: bad mode");
    }

    std::size_t in_degree(NodeId n) const { return neighbors(n, NeighborMode::in).size(); }
    std::size_t out_degree(NodeId n) const { return neighbors(n, NeighborMode::out).size(); }

    // Undirected degree, or in+out for directed graphs (each arc counted once
    // per direction, so a mutual pair contributes 2).
    std::size_t total_degree(NodeId n) const {
        check_node(n);
        if (!directed_) return out_adj_[static_cast<std::size_t>(n)].size();
        return in_adj_[static_cast<std::size_t>(n)].size() +
               out_adj_[static_cast<std::size_t>(n)].size();
    }

    bool has_features() const { return features_.has_value(); }
    const Mat<double>& features() const {
        if (!features_) throw std::logic_error("Graph: no features attached");
        return *features_;
    }

    void set_features(Mat<double> f) {
        if (static_cast<NodeId>(f.rows()) != num_nodes_)
            throw std::invalid_argument("Graph: feature row count must equal node count");
        features_ = std::move(f);
    }

    void drop_features() { features_.reset(); }

private:
    void check_node(NodeId n) const {
        if (n < 0 || n >= num_nodes_)
            throw std::invalid_argument("Graph: node id out of range");
    }

    void build_adjacency() {
        const auto n = static_cast<std::size_t>(num_nodes_);
        out_adj_.assign(n, {});
        in_adj_.assign(n, {});
        edge_set_.reserve(edges_.size() * 2);
        for (const auto& [u, v] : edges_) {
            edge_set_.insert(detail::edge_key(u, v, num_nodes_));
            if (directed_) {
                out_adj_[static_cast<std::size_t>(u)].push_back(v);
                in_adj_[static_cast<std::size_t>(v)].push_back(u);
            } else {
                out_adj_[static_cast<std::size_t>(u)].push_back(v);
                out_adj_[static_cast<std::size_t>(v)].push_back(u);
            }
        }
        for (auto& a : out_adj_) std::sort(a.begin(), a.end());
        if (directed_) {
            for (auto& a : in_adj_) std::sort(a.begin(), a.end());
            both_adj_.assign(n, {});
            for (std::size_t i = 0; i < n; ++i) {
                auto& b = both_adj_[i];
                b.reserve(in_adj_[i].size() + out_adj_[i].size());
                std::merge(in_adj_[i].begin(), in_adj_[i].end(), out_adj_[i].begin(),
                           out_adj_[i].end(), std::back_inserter(b));
                b.erase(std::unique(b.begin(), b.end()), b.end());
            }
        }
    }

    NodeId num_nodes_ = 0;
    bool directed_ = false;
    std::vector<Edge> edges_;
    std::vector<std::vector<NodeId>> out_adj_, in_adj_, both_adj_;
    std::unordered_set<std::uint64_t> edge_set_;
    std::optional<Mat<double>> features_;
};

// Free-function form of the neighbor query.
inline const std::vector<NodeId>& neighbors(const Graph& g, NodeId n, NeighborMode mode) {
    return g.neighbors(n, mode);
}

// --- partitions -----------------------------------------------------------------

// Disjoint train/test split covering all nodes of a graph; both sides
// non-empty.
class Partition {
public:
    Partition() = default;

    Partition(NodeId num_nodes, std::vector<NodeId> test_nodes)
        : num_nodes_(num_nodes) {
        const std::size_t given = test_nodes.size();
        test_nodes_ = detail::canonical_node_set(test_nodes, num_nodes, "Partition");
        if (test_nodes_.size() != given)
            throw std::invalid_argument("Partition: duplicate test node");
        if (test_nodes_.empty())
            throw std::invalid_argument("Partition: test side is empty");
        if (static_cast<NodeId>(test_nodes_.size()) == num_nodes)
            throw std::invalid_argument("Partition: train side is empty");
        is_test_.assign(static_cast<std::size_t>(num_nodes), 0);
        for (NodeId t : test_nodes_) is_test_[static_cast<std::size_t>(t)] = 1;
        train_nodes_.reserve(static_cast<std::size_t>(num_nodes) - test_nodes_.size());
        for (NodeId n = 0; n < num_nodes; ++n)
            if (!is_test_[static_cast<std::size_t>(n)]) train_nodes_.push_back(n);
    }

    NodeId num_nodes() const { return num_nodes_; }
    const std::vector<NodeId>& train_nodes() const { return train_nodes_; }
    const std::vector<NodeId>& test_nodes() const { return test_nodes_; }

    bool is_test(NodeId n) const {
        if (n < 0 || n >= num_nodes_)
            throw std::invalid_argument("Partition: node id out of range");
        return is_test_[static_cast<std::size_t>(n)] != 0;
    }

private:
    NodeId num_nodes_ = 0;
    std::vector<NodeId> train_nodes_, test_nodes_;
    std::vector<std::uint8_t> is_test_;
};

// Uniform random node split.  test_fraction must lie in (0, 1) and round to a
// non-empty test and train side.
inline Partition split_nodes(const Graph& g, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split_nodes: test_fraction must be in (0, 1)");
    const NodeId n = g.num_nodes();
    const auto k = static_cast<NodeId>(std::llround(test_fraction * static_cast<double>(n)));
    if (k < 1 || k >= n)
        throw std::invalid_argument("split_nodes: fraction yields an empty side");
    std::vector<NodeId> ids(static_cast<std::size_t>(n));
    for (NodeId i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = i;
    Rng rng(mix_seed(seed, 0x73706c6974ull));  // "split" stream
    rng.shuffle(ids);
    ids.resize(static_cast<std::size_t>(k));
    return Partition(n, std::move(ids));
}

// --- induced subgraphs -------------------------------------------------------------

// Dense re-indexed subgraph plus both direction id maps.  to_local is sized by
// the base graph and holds -1 for dropped nodes.
struct InducedGraph {
    Graph graph;
    std::vector<NodeId> to_original;  // local id -> base id
    std::vector<NodeId> to_local;     // base id -> local id or -1

    NodeId local_of(NodeId original) const {
        if (original < 0 || original >= static_cast<NodeId>(to_local.size()))
            throw std::invalid_argument("InducedGraph: base node id out of range");
        return to_local[static_cast<std::size_t>(original)];
    }
};

inline InducedGraph induced_subgraph(const Graph& g, std::span<const NodeId> keep) {
    auto kept = detail::canonical_node_set(keep, g.num_nodes(), "induced_subgraph");
    if (kept.empty()) throw std::invalid_argument("induced_subgraph: empty keep set");

    InducedGraph out;
    out.to_original = kept;
    out.to_local.assign(static_cast<std::size_t>(g.num_nodes()), -1);
    for (std::size_t i = 0; i < kept.size(); ++i)
        out.to_local[static_cast<std::size_t>(kept[i])] = static_cast<NodeId>(i);

    std::vector<Edge> edges;
    for (const auto& [u, v] : g.edges()) {
        const NodeId lu = out.to_local[static_cast<std::size_t>(u)];
        const NodeId lv = out.to_local[static_cast<std::size_t>(v)];
        if (lu >= 0 && lv >= 0) edges.emplace_back(lu, lv);
    }

    std::optional<Mat<double>> features;
    if (g.has_features()) {
        const auto& base = g.features();
        Mat<double> f(kept.size(), base.cols());
        for (std::size_t i = 0; i < kept.size(); ++i)
            std::copy(base.row(static_cast<std::size_t>(kept[i])),
                      base.row(static_cast<std::size_t>(kept[i])) + base.cols(), f.row(i));
        features = std::move(f);
    }

    out.graph = Graph(static_cast<NodeId>(kept.size()), g.directed(), std::move(edges),
                      std::move(features));
    return out;
}

// --- negative graphs -------------------------------------------------------------

enum class NegScope { train_only, whole_graph };

class NegativeGraph {
public:
    NegativeGraph() = default;

    const std::vector<Edge>& edges() const { return edges_; }
    std::size_t num_edges() const { return edges_.size(); }
    bool directed() const { return directed_; }
    NegScope scope() const { return scope_; }
    const std::vector<NodeId>& scope_nodes() const { return scope_nodes_; }

    // True when fewer non-edges existed than requested and the sample was
    // truncated to everything available.
    bool clamped() const { return clamped_; }
    std::size_t requested_count() const { return requested_; }

    bool has_edge(NodeId u, NodeId v) const {
        if (u < 0 || u >= num_nodes_ || v < 0 || v >= num_nodes_ || u == v) return false;
        if (!directed_ && u > v) std::swap(u, v);
        return edge_set_.count(detail::edge_key(u, v, num_nodes_)) != 0;
    }

    // Sorted candidate sources toward n: for directed graphs the tails of
    // sampled non-edges (s, n); for undirected graphs all sampled partners.
    const std::vector<NodeId>& neighbors(NodeId n, NeighborMode mode) const {
        if (n < 0 || n >= num_nodes_)
            throw std::invalid_argument("NegativeGraph: node id out of range");
        if (!directed_) return out_adj_[static_cast<std::size_t>(n)];
        return (mode == NeighborMode::out ? out_adj_ : in_adj_)[static_cast<std::size_t>(n)];
    }

    // Build from an explicit edge list, validating every pair is a self-loop
    // free non-edge of `positive` with both endpoints inside `scope_nodes`.
    static NegativeGraph from_edges(const Graph& positive, NegScope scope,
                                    std::span<const NodeId> scope_nodes,
                                    std::vector<Edge> edges) {
        NegativeGraph neg;
        neg.init(positive, scope, scope_nodes);
        for (auto& [u, v] : edges) {
            if (u == v) throw std::invalid_argument("NegativeGraph: self-loop");
            if (!detail::contains_sorted(neg.scope_nodes_, u) ||
                !detail::contains_sorted(neg.scope_nodes_, v))
                throw std::invalid_argument("NegativeGraph: endpoint outside scope");
            if (positive.has_edge(u, v))
                throw std::invalid_argument("NegativeGraph: pair is a positive edge");
            if (!neg.directed_ && u > v) std::swap(u, v);
        }
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        neg.requested_ = edges.size();
        neg.adopt_edges(std::move(edges));
        return neg;
    }

    friend NegativeGraph generate_negative_graph(const Graph&, NegScope,
                                                 std::span<const NodeId>,
                                                 std::optional<std::size_t>, std::uint64_t);

private:
    void init(const Graph& positive, NegScope scope, std::span<const NodeId> scope_nodes) {
        num_nodes_ = positive.num_nodes();
        directed_ = positive.directed();
        scope_ = scope;
        scope_nodes_ = detail::canonical_node_set(scope_nodes, num_nodes_, "NegativeGraph");
        if (scope_nodes_.empty())
            throw std::invalid_argument("NegativeGraph: empty node scope");
    }

    void adopt_edges(std::vector<Edge> edges) {
        edges_ = std::move(edges);
        const auto n = static_cast<std::size_t>(num_nodes_);
        out_adj_.assign(n, {});
        if (directed_) in_adj_.assign(n, {});
        edge_set_.reserve(edges_.size() * 2);
        for (const auto& [u, v] : edges_) {
            edge_set_.insert(detail::edge_key(u, v, num_nodes_));
            if (directed_) {
                out_adj_[static_cast<std::size_t>(u)].push_back(v);
                in_adj_[static_cast<std::size_t>(v)].push_back(u);
            } else {
                out_adj_[static_cast<std::size_t>(u)].push_back(v);
                out_adj_[static_cast<std::size_t>(v)].push_back(u);
            }
        }
        for (auto& a : out_adj_) std::sort(a.begin(), a.end());
        for (auto& a : in_adj_) std::sort(a.begin(), a.end());
    }

    NodeId num_nodes_ = 0;
    bool directed_ = false;
    NegScope scope_ = NegScope::whole_graph;
    std::vector<NodeId> scope_nodes_;
    std::vector<Edge> edges_;
    std::vector<std::vector<NodeId>> out_adj_, in_adj_;
    std::unordered_set<std::uint64_t> edge_set_;
    bool clamped_ = false;
    std::size_t requested_ = 0;
};

// Number of positive edges with both endpoints inside a sorted scope set.
inline std::size_t edges_within(const Graph& g, const std::vector<NodeId>& sorted_scope) {
    std::size_t count = 0;
    for (const auto& [u, v] : g.edges())
        if (detail::contains_sorted(sorted_scope, u) && detail::contains_sorted(sorted_scope, v))
            ++count;
    return count;
}

// Sample `target_count` distinct non-edges of `positive` uniformly at random,
// both endpoints inside node_scope, self-loops excluded.  target_count
// defaults to the positive edge count within the scope.  Requests exceeding
// the number of available non-edges are clamped (see NegativeGraph::clamped).
inline NegativeGraph generate_negative_graph(const Graph& positive, NegScope scope,
                                             std::span<const NodeId> node_scope,
                                             std::optional<std::size_t> target_count,
                                             std::uint64_t seed) {
    NegativeGraph neg;
    neg.init(positive, scope, node_scope);
    const auto& nodes = neg.scope_nodes_;
    const auto s = nodes.size();
    const bool dir = positive.directed();

    const std::size_t pos_within = edges_within(positive, nodes);
    const std::size_t pairs = dir ? s * (s - 1) : s * (s - 1) / 2;
    const std::size_t available = pairs - pos_within;

    std::size_t target = target_count.value_or(pos_within);
    neg.requested_ = target;
    if (target > available) {
        target = available;
        neg.clamped_ = true;
    }

    Rng rng(mix_seed(seed, 0x6e656761746976ull));
    std::vector<Edge> sample;
    sample.reserve(target);

    // Dense or near-exhausted scopes: enumerate every non-edge and take a
    // random prefix.  Sparse large scopes: rejection-sample, deduplicating.
    if (pairs <= std::size_t{8} * 1024 * 1024 || available < 4 * target) {
        std::vector<Edge> non_edges;
        non_edges.reserve(available);
        for (std::size_t i = 0; i < s; ++i) {
            for (std::size_t j = dir ? 0 : i + 1; j < s; ++j) {
                if (i == j) continue;
                const NodeId u = nodes[i], v = nodes[j];
                if (!positive.has_edge(u, v)) non_edges.emplace_back(u, v);
            }
        }
        auto picked = rng.sample_without_replacement(
            std::span<const Edge>(non_edges), target);
        sample = std::move(picked);
    } else {
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(target * 2);
        const auto max_index = static_cast<std::int64_t>(s) - 1;
        while (sample.size() < target) {
            NodeId u = nodes[static_cast<std::size_t>(rng.uniform_int(0, max_index))];
            NodeId v = nodes[static_cast<std::size_t>(rng.uniform_int(0, max_index))];
            if (u == v) continue;
            if (!dir && u > v) std::swap(u, v);
            if (positive.has_edge(u, v)) continue;
            if (!seen.insert(detail::edge_key(u, v, positive.num_nodes())).second) continue;
            sample.emplace_back(u, v);
        }
    }

    std::sort(sample.begin(), sample.end());
    neg.adopt_edges(std::move(sample));
    return neg;
}

}  // namespace nodepred
