#pragma once

// Purity-constrained example generation.  An example is a pair (S, t): a set
// S of candidate neighbors proposed for a target node t, labeled positive
// (S was drawn around t's actual neighbors) or negative (around sampled
// non-neighbors).  Purity controls how much of the opposite polarity leaks
// into S:
//
//   pure edges     members drawn from the pool matching the label
//   spurious edges members drawn from the opposite pool
//   min_pure       minimum percentage of the pure pool that must be included
//   max_spurious   maximum percentage of the spurious pool that may be added
//
// Directed graphs use incoming neighbors for both pools, matching the
// aggregation direction of the model.

#include <nodepred/graph.hpp>
#include <nodepred/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace nodepred {

struct Purity {
    double min_pure = 100.0;     // percentage in [0, 100]
    double max_spurious = 0.0;   // percentage in [0, 100]

    void validate() const {
        if (!(min_pure >= 0.0 && min_pure <= 100.0) ||
            !(max_spurious >= 0.0 && max_spurious <= 100.0))
            throw std::invalid_argument("Purity: percentages must lie in [0, 100]");
    }
};

struct Example {
    std::vector<NodeId> members;  // the set S, sorted
    NodeId target = -1;           // the node t
    int label = 0;                // 1 positive, 0 negative
    std::size_t pure_count = 0;
    std::size_t spurious_count = 0;
};

enum class ExampleScope { train, test };

struct ExampleSet {
    std::vector<Example> examples;
    Purity purity;
    ExampleScope scope = ExampleScope::train;
    std::uint64_t seed = 0;
    std::size_t skipped_positive = 0;  // targets with no actual neighbors
    std::size_t skipped_negative = 0;  // targets with no sampled non-neighbors
};

// (min_pure_count, max_spurious_count) for the given pool sizes.  Percentages
// are snapped to the nearest integer product before rounding so that e.g.
// 3 * 70% counts as exactly 2.1 -> ceil 3, immune to binary representation
// error in the percentage.
inline std::pair<std::size_t, std::size_t> pure_spurious_bounds(const Purity& purity,
                                                                std::size_t pure_avail,
                                                                std::size_t spurious_avail) {
    purity.validate();
    auto snapped = [](double raw) {
        const double nearest = std::round(raw);
        return std::abs(raw - nearest) < 1e-9 ? nearest : raw;
    };
    const double pure_raw = snapped(static_cast<double>(pure_avail) * purity.min_pure / 100.0);
    const double spur_raw =
        snapped(static_cast<double>(spurious_avail) * purity.max_spurious / 100.0);
    return {static_cast<std::size_t>(std::ceil(pure_raw)),
            static_cast<std::size_t>(std::floor(spur_raw))};
}

// Draw one example around `target`: k_pure uniform in [min_pure_count,
// |pure_pool|] members from pure_pool, k_spur uniform in [0,
// max_spurious_count] from spurious_pool.  Returns nullopt when the pure pool
// is empty (the caller skips and tallies the target).  Members are never
// empty: when both draws come out zero (possible only at min_pure = 0) one
// pure member is taken instead.
inline std::optional<Example> make_example(NodeId target, std::span<const NodeId> pure_pool,
                                           std::span<const NodeId> spurious_pool,
                                           const Purity& purity, int label,
                                           std::uint64_t rng_seed) {
    purity.validate();
    if (label != 0 && label != 1) throw std::invalid_argument("make_example: label must be 0/1");
    if (pure_pool.empty()) return std::nullopt;

    for (NodeId m : pure_pool)
        if (m == target) throw std::invalid_argument("make_example: target inside pure pool");
    for (NodeId m : spurious_pool) {
        if (m == target) throw std::invalid_argument("make_example: target inside spurious pool");
        if (std::find(pure_pool.begin(), pure_pool.end(), m) != pure_pool.end())
            throw std::invalid_argument("make_example: pools overlap");
    }

    const auto [min_pure_count, max_spur_count] =
        pure_spurious_bounds(purity, pure_pool.size(), spurious_pool.size());

    Rng rng(rng_seed);
    auto k_pure = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(min_pure_count),
                        static_cast<std::int64_t>(pure_pool.size())));
    const auto k_spur = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(max_spur_count)));
    if (k_pure + k_spur == 0) k_pure = 1;

    Example ex;
    ex.target = target;
    ex.label = label;
    ex.pure_count = k_pure;
    ex.spurious_count = k_spur;
    ex.members = rng.sample_without_replacement(pure_pool, k_pure);
    auto spur = rng.sample_without_replacement(spurious_pool, k_spur);
    ex.members.insert(ex.members.end(), spur.begin(), spur.end());
    std::sort(ex.members.begin(), ex.members.end());
    return ex;
}

namespace detail {

// One positive and one negative example per target, skipping targets whose
// pure pool is empty.  Node ids in the emitted examples are the ids of the
// pool vectors handed in (original graph ids throughout this library).
template <class PosPool, class NegPool>
ExampleSet generate_examples(std::span<const NodeId> targets, PosPool&& positive_pool,
                             NegPool&& negative_pool, const Purity& purity,
                             ExampleScope scope, std::uint64_t seed) {
    purity.validate();
    ExampleSet set;
    set.purity = purity;
    set.scope = scope;
    set.seed = seed;
    for (NodeId t : targets) {
        const std::vector<NodeId>& pos_pool = positive_pool(t);
        const std::vector<NodeId>& neg_pool = negative_pool(t);
        // Per-target, per-polarity substreams keep generation order-free.
        auto pos = make_example(t, pos_pool, neg_pool, purity, 1,
                                mix_seed(seed, static_cast<std::uint64_t>(t), 1));
        if (pos)
            set.examples.push_back(std::move(*pos));
        else
            ++set.skipped_positive;
        auto neg = make_example(t, neg_pool, pos_pool, purity, 0,
                                mix_seed(seed, static_cast<std::uint64_t>(t), 0));
        if (neg)
            set.examples.push_back(std::move(*neg));
        else
            ++set.skipped_negative;
    }
    if (set.examples.empty())
        throw std::runtime_error("example generation produced zero examples");
    return set;
}

}  // namespace detail

// Training examples: targets are the train nodes; actual neighbors come from
// the induced train graph, sampled non-neighbors from neg_train.  Both the
// induced graph's id map and neg_train speak original-graph ids, and so do
// the emitted examples.
inline ExampleSet generate_train_examples(const InducedGraph& g_train,
                                          const NegativeGraph& neg_train,
                                          const Purity& purity, std::uint64_t seed) {
    if (neg_train.scope_nodes() != g_train.to_original)
        throw std::invalid_argument(
            "generate_train_examples: negative graph scope must equal the train node set");

    std::vector<std::vector<NodeId>> pos_pools(g_train.to_original.size());
    for (std::size_t local = 0; local < g_train.to_original.size(); ++local) {
        const auto& local_neigh =
            g_train.graph.neighbors(static_cast<NodeId>(local), NeighborMode::in);
        pos_pools[local].reserve(local_neigh.size());
        for (NodeId ln : local_neigh)
            pos_pools[local].push_back(g_train.to_original[static_cast<std::size_t>(ln)]);
        std::sort(pos_pools[local].begin(), pos_pools[local].end());
    }

    return detail::generate_examples(
        std::span<const NodeId>(g_train.to_original),
        [&](NodeId t) -> const std::vector<NodeId>& {
            return pos_pools[static_cast<std::size_t>(g_train.local_of(t))];
        },
        [&](NodeId t) -> const std::vector<NodeId>& {
            return neg_train.neighbors(t, NeighborMode::in);
        },
        purity, ExampleScope::train, seed);
}

// Test examples: targets are the test nodes; pools come from the full graph
// and a whole-graph negative sample, so members may be train or test nodes.
inline ExampleSet generate_test_examples(const Graph& g, const NegativeGraph& neg_whole,
                                         const Partition& partition, const Purity& purity,
                                         std::uint64_t seed) {
    if (neg_whole.scope() != NegScope::whole_graph)
        throw std::invalid_argument(
            "generate_test_examples: negative graph must have whole-graph scope");
    return detail::generate_examples(
        std::span<const NodeId>(partition.test_nodes()),
        [&](NodeId t) -> const std::vector<NodeId>& {
            return g.neighbors(t, NeighborMode::in);
        },
        [&](NodeId t) -> const std::vector<NodeId>& {
            return neg_whole.neighbors(t, NeighborMode::in);
        },
        purity, ExampleScope::test, seed);
}

// (train members, test members) of an example under a partition.
inline std::pair<std::size_t, std::size_t> example_composition(const Example& ex,
                                                               const Partition& partition) {
    std::size_t train = 0, test = 0;
    for (NodeId m : ex.members) (partition.is_test(m) ? test : train) += 1;
    return {train, test};
}

// --- serialization ---------------------------------------------------------------

inline constexpr const char* kExamplesHeader = "#nodepred-examples 1";

inline void write_examples(std::ostream& out, const ExampleSet& set) {
    out << kExamplesHeader << "\n";
    out << "%scope " << (set.scope == ExampleScope::train ? "train" : "test") << " purity "
        << set.purity.min_pure << " " << set.purity.max_spurious << " seed " << set.seed
        << " skipped " << set.skipped_positive << " " << set.skipped_negative << "\n";
    for (const auto& ex : set.examples) {
        out << ex.label << " " << ex.target << " " << ex.pure_count << " " << ex.spurious_count;
        for (NodeId m : ex.members) out << " " << m;
        out << "\n";
    }
}

inline void write_examples(const std::string& path, const ExampleSet& set) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    write_examples(out, set);
    if (!out) throw std::invalid_argument("write failed: " + path);
}

inline ExampleSet read_examples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open for reading: " + path);
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    ExampleSet set;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        if (!saw_header) {
            if (line.rfind(kExamplesHeader, 0) != 0)
                throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                            ": expected header '" +
                                            std::string(kExamplesHeader) + "'");
            saw_header = true;
            continue;
        }
        if (line[0] == '%') {
            std::istringstream meta(line.substr(1));
            std::string tag;
            while (meta >> tag) {
                if (tag == "scope") {
                    std::string s;
                    meta >> s;
                    set.scope = (s == "test") ? ExampleScope::test : ExampleScope::train;
                } else if (tag == "purity") {
                    meta >> set.purity.min_pure >> set.purity.max_spurious;
                } else if (tag == "seed") {
                    meta >> set.seed;
                } else if (tag == "skipped") {
                    meta >> set.skipped_positive >> set.skipped_negative;
                }
            }
            continue;
        }
        std::istringstream fields(line);
        Example ex;
        if (!(fields >> ex.label >> ex.target >> ex.pure_count >> ex.spurious_count))
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": expected 'label target k_pure k_spur member...'");
        NodeId m;
        while (fields >> m) ex.members.push_back(m);
        if (ex.members.size() != ex.pure_count + ex.spurious_count)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": member count disagrees with pure+spurious counts");
        set.examples.push_back(std::move(ex));
    }
    if (!saw_header) throw std::invalid_argument(path + ": missing examples header");
    return set;
}

}  // namespace nodepred
