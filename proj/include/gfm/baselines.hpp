#ifndef GFM_BASELINES_HPP
#define GFM_BASELINES_HPP

#include "gfm/task.hpp"

namespace gfm {

// Visit order as indices into a ClosureMatrix subset. Closed orders wrap
// back to indices.front() implicitly.
struct TourOrder {
    std::vector<int> indices;
    bool closed = true;
};

// Closure-distance length of an order (including the return leg if closed).
double order_length(const ClosureMatrix& closure, const TourOrder& order);

// Greedy nearest-unvisited chain from start_index; ties break to the
// lowest index.
TourOrder nearest_neighbor(const ClosureMatrix& closure, int start_index, bool closed = true);

// Best-improvement segment reversal to a 2-opt-stable order. Open orders
// keep both endpoints fixed.
TourOrder two_opt(const ClosureMatrix& closure, TourOrder order);

// Exact bitmask DP over the whole subset. closed=true -> optimal cycle;
// closed=false -> optimal path between the fixed endpoint indices.
// Throws on subsets larger than 16.
TourOrder held_karp(const ClosureMatrix& closure, bool closed,
                    std::optional<std::pair<int, int>> endpoints = {});

// Table-style greedy: hop to the closure-nearest unvisited required node
// via witness paths, then close/finish per kind. Always feasible.
Solution greedy_walk_tour(const Graph& g, const TaskSpec& spec);

} // namespace gfm

#endif // GFM_BASELINES_HPP
