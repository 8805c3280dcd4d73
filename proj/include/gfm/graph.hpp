#ifndef GFM_GRAPH_HPP
#define GFM_GRAPH_HPP

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gfm/common.hpp"

namespace gfm {

struct Edge {
    int u = 0;
    int v = 0;
    double w = 0.0; // km, > 0
};

// Sparse undirected weighted graph. Immutable after construction; every
// operation on it is a pure function, so instances are safe to share
// across threads.
class Graph {
public:
    // Validates all invariants: ids in range, no self loops, no duplicate
    // edges, positive weights, connectivity from node 0.
    static Graph build(int node_count, std::vector<Edge> edges,
                       std::optional<std::vector<std::pair<double, double>>> coords = {});

    int node_count() const { return node_count_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }
    bool has_coords() const { return coords_.has_value(); }
    const std::vector<std::pair<double, double>>& coords() const;

    // (neighbor, weight) pairs, sorted by neighbor id
    const std::vector<std::pair<int, double>>& neighbors(int u) const { return adj_[u]; }

    bool has_edge(int u, int v) const;
    // weight of edge (u,v); throws if absent
    double edge_weight(int u, int v) const;

    std::uint64_t content_hash() const;

private:
    Graph() = default;
    int node_count_ = 0;
    std::vector<Edge> edges_;
    std::optional<std::vector<std::pair<double, double>>> coords_;
    std::vector<std::vector<std::pair<int, double>>> adj_;
};

struct GraphStats {
    int node_count = 0;
    int edge_count = 0;
    double density = 0.0;    // 2M / (N(N-1))
    double avg_degree = 0.0; // 2M / N
};

GraphStats stats(const Graph& g);

// Edge-list text format:
//   line 1: "N M"
//   M lines: "u v w_km"
//   optional: "COORDS" then N lines "id x y"
// '#' starts a comment, whitespace separated, UTF-8.
Graph load_edge_list(const std::string& text);
Graph load_edge_list_file(const std::string& path);
std::string to_edge_list(const Graph& g);
void save_edge_list_file(const Graph& g, const std::string& path);

// Seeded sparse "traffic" graph: a backbone cycle with arterial-range
// weights plus chord/cross edges with cross-range weights. Pure function
// of its arguments.
Graph generate_simulation_graph(std::uint64_t seed, int n_nodes,
                                std::pair<double, double> arterial_range = {1.0, 3.0},
                                std::pair<double, double> cross_range = {3.5, 7.0},
                                int chord_count = -1 /* default: n/3 + 1 */);

// Seeded planar-ish sparse proxy at road-network scale: random points
// stitched by k-nearest edges until the target average degree is reached,
// then bridged into one component. Weights are euclidean lengths in km.
Graph generate_proxy_graph(std::uint64_t seed, int n_nodes, double target_avg_degree = 3.2);

struct DijkstraResult {
    std::vector<double> dist; // km from source
    std::vector<int> pred;    // predecessor chain; -1 at source
};

DijkstraResult dijkstra(const Graph& g, int source);

// Reconstructs the source->target path from a predecessor chain.
std::vector<int> reconstruct_path(const DijkstraResult& r, int source, int target);

struct PathResult {
    std::vector<int> nodes;
    double length_km = 0.0;
};

// Optimal s->t path via A* with an admissible scaled-euclidean heuristic.
// Requires coordinates.
PathResult astar(const Graph& g, int s, int t);

// Metric closure over a node subset with witness paths for expansion.
class ClosureMatrix {
public:
    ClosureMatrix() = default;

    const std::vector<int>& subset() const { return subset_; }
    int size() const { return static_cast<int>(subset_.size()); }
    double dist(int a, int b) const { return dist_[static_cast<std::size_t>(a) * subset_.size() + b]; }
    const std::vector<int>& witness(int a, int b) const;
    bool is_virtual_pair(int a, int b) const;
    // (from_index, to_index) of the virtual zero-weight pair, if any
    std::optional<std::pair<int, int>> virtual_pair() const { return virtual_; }

    friend ClosureMatrix metric_closure(const Graph& g, const std::vector<int>& subset);
    friend ClosureMatrix open_tour_closure(const ClosureMatrix& base, int origin, int dest);

private:
    std::vector<int> subset_;
    std::vector<double> dist_;
    std::vector<std::vector<int>> witness_; // row-major per ordered index pair
    std::optional<std::pair<int, int>> virtual_;
};

ClosureMatrix metric_closure(const Graph& g, const std::vector<int>& subset);

// Copy of the closure with a zero-weight virtual pair dest->origin (both
// directions zeroed) so a closed-tour solver can produce an open
// origin->dest order; expansion cuts at the flagged pair.
ClosureMatrix open_tour_closure(const ClosureMatrix& base, int origin, int dest);

// Expands an order over closure indices back into a node walk in the
// original graph by concatenating witness paths (junctions merged,
// virtual pairs skipped). `closed` appends the return leg to order[0].
std::vector<int> expand_order(const ClosureMatrix& closure, const std::vector<int>& order,
                              bool closed);

} // namespace gfm

#endif // GFM_GRAPH_HPP
