#pragma once

// Text formats for graphs, node features, and partitions, plus small file
// helpers shared by every artifact writer.
//
//   edge list   #nodes <N> directed <0|1>   then one `<u> <v>` per line
//   features    line i = comma-separated reals for node i (no header)
//   partition   #nodepred-partition 1       then `train` or `test` per node
//
// `%` starts a comment line in edge lists and partitions; blank lines are
// skipped everywhere.  Readers reject unknown format versions and report
// line numbers on parse errors.  Malformed or unreadable inputs throw
// std::invalid_argument (the CLI maps that to its usage-error exit code).

#include <nodepred/graph.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace nodepred {

namespace detail {

inline std::string strip_comment(const std::string& line) {
    const auto pos = line.find('%');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

inline bool blank(std::string_view s) {
    return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

[[noreturn]] inline void parse_fail(const std::string& path, std::size_t line_no,
                                    const std::string& what) {
    throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + what);
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open for reading: " + path);
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("cannot open for writing: " + path);
    return out;
}

}  // namespace detail

// --- edge lists ---------------------------------------------------------------

inline void write_edge_list(const std::string& path, const Graph& g) {
    auto out = detail::open_output(path);
    out << "#nodes " << g.num_nodes() << " directed " << (g.directed() ? 1 : 0) << "\n";
    for (const auto& [u, v] : g.edges()) out << u << " " << v << "\n";
    if (!out) throw std::invalid_argument("write failed: " + path);
}

inline Graph read_edge_list(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    NodeId num_nodes = 0;
    int directed_flag = 0;
    std::vector<Edge> edges;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = detail::strip_comment(line);
        if (detail::blank(body)) continue;
        std::istringstream fields(body);
        if (!saw_header) {
            std::string tag_nodes, tag_directed;
            if (!(fields >> tag_nodes >> num_nodes >> tag_directed >> directed_flag) ||
                tag_nodes != "#nodes" || tag_directed != "directed" ||
                (directed_flag != 0 && directed_flag != 1) || num_nodes < 0)
                detail::parse_fail(path, line_no,
                                   "expected header '#nodes <N> directed <0|1>'");
            std::string extra;
            if (fields >> extra) detail::parse_fail(path, line_no, "trailing tokens in header");
            saw_header = true;
            continue;
        }
        NodeId u, v;
        if (!(fields >> u >> v)) detail::parse_fail(path, line_no, "expected '<u> <v>'");
        std::string extra;
        if (fields >> extra) detail::parse_fail(path, line_no, "trailing tokens after edge");
        edges.emplace_back(u, v);
    }
    if (!saw_header) throw std::invalid_argument(path + ": missing edge-list header");
    try {
        return Graph(num_nodes, directed_flag == 1, std::move(edges));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

// --- features -----------------------------------------------------------------

inline void write_features(const std::string& path, const Mat<double>& f) {
    auto out = detail::open_output(path);
    char buf[64];
    for (std::size_t r = 0; r < f.rows(); ++r) {
        for (std::size_t c = 0; c < f.cols(); ++c) {
            const int len = std::snprintf(buf, sizeof buf, "%.17g", f(r, c));
            if (c) out << ",";
            out.write(buf, len);
        }
        out << "\n";
    }
    if (!out) throw std::invalid_argument("write failed: " + path);
}

inline Mat<double> read_features(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::vector<double>> rows;
    std::size_t cols = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (detail::blank(line)) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (start <= line.size()) {
            auto end = line.find(',', start);
            if (end == std::string::npos) end = line.size();
            std::string cell = line.substr(start, end - start);
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                while (used < cell.size() &&
                       (cell[used] == ' ' || cell[used] == '\t' || cell[used] == '\r'))
                    ++used;
                if (used != cell.size()) throw std::invalid_argument("junk");
            } catch (const std::exception&) {
                detail::parse_fail(path, line_no, "bad feature value '" + cell + "'");
            }
            start = end + 1;
        }
        if (cols == 0) cols = row.size();
        if (row.size() != cols)
            detail::parse_fail(path, line_no, "inconsistent feature dimension");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument(path + ": empty feature file");

    Mat<double> f(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), f.row(r));
    return f;
}

// --- partitions ----------------------------------------------------------------

inline constexpr const char* kPartitionHeader = "#nodepred-partition 1";

inline void write_partition(const std::string& path, const Partition& p) {
    auto out = detail::open_output(path);
    out << kPartitionHeader << "\n";
    for (NodeId n = 0; n < p.num_nodes(); ++n)
        out << (p.is_test(n) ? "test" : "train") << "\n";
    if (!out) throw std::invalid_argument("write failed: " + path);
}

inline Partition read_partition(const std::string& path, NodeId num_nodes) {
    auto in = detail::open_input(path);
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    std::vector<NodeId> test_nodes;
    NodeId node = 0;

    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = detail::strip_comment(line);
        if (detail::blank(body)) continue;
        std::istringstream fields(body);
        std::string token;
        fields >> token;
        if (!saw_header) {
            std::string version;
            if (token != "#nodepred-partition" || !(fields >> version) || version != "1")
                detail::parse_fail(path, line_no, "expected header '" +
                                                      std::string(kPartitionHeader) + "'");
            saw_header = true;
            continue;
        }
        if (token == "test")
            test_nodes.push_back(node);
        else if (token != "train")
            detail::parse_fail(path, line_no, "expected 'train' or 'test'");
        ++node;
    }
    if (!saw_header) throw std::invalid_argument(path + ": missing partition header");
    if (node != num_nodes)
        throw std::invalid_argument(path + ": partition lists " + std::to_string(node) +
                                    " nodes, graph has " + std::to_string(num_nodes));
    try {
        return Partition(num_nodes, std::move(test_nodes));
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

// --- digests -----------------------------------------------------------------------

// FNV-1a over a byte range; used for input digests in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open for digest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace nodepred
