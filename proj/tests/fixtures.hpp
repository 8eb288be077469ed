#pragma once

// Shared test fixtures: the 8-node worked-example graph used throughout the
// docs (0-indexed here), plus small helpers for temp files and tiny graphs.

#include <nodepred/nodepred.hpp>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

using nodepred::Edge;
using nodepred::Graph;
using nodepred::NodeId;

// Undirected 8-node graph; train nodes {0..5}, test nodes {6,7}.
//
//   0-1, 0-5, 1-3, 2-3, 2-4, 2-5, 2-6, 3-6, 5-7, 6-7
inline Graph tiny_graph() {
    return Graph(8, false,
                 {{0, 1}, {0, 5}, {1, 3}, {2, 3}, {2, 4}, {2, 5}, {2, 6}, {3, 6}, {5, 7}, {6, 7}});
}

inline std::vector<NodeId> tiny_train_nodes() { return {0, 1, 2, 3, 4, 5}; }
inline std::vector<NodeId> tiny_test_nodes() { return {6, 7}; }

inline nodepred::Partition tiny_partition() {
    return nodepred::Partition(8, tiny_test_nodes());
}

// The documented train-scope negative graph for tiny_graph (9 non-edges
// among the train nodes).
inline std::vector<Edge> tiny_negative_edges() {
    return {{0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 4}, {1, 5}, {3, 4}, {3, 5}, {4, 5}};
}

inline nodepred::NegativeGraph tiny_negative_train() {
    return nodepred::NegativeGraph::from_edges(tiny_graph(), nodepred::NegScope::train_only,
                                               tiny_train_nodes(), tiny_negative_edges());
}

// Undirected path 0-1-2-...-(n-1).
inline Graph path_graph(NodeId n) {
    std::vector<Edge> edges;
    for (NodeId i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
    return Graph(n, false, edges);
}

// Directed chain 0->1->2->...->(n-1).
inline Graph directed_chain(NodeId n) {
    std::vector<Edge> edges;
    for (NodeId i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
    return Graph(n, true, edges);
}

// Fresh per-test scratch directory under the system temp root.
class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("nodepred_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace fixtures
