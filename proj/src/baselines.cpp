#include "gfm/baselines.hpp"

#include <limits>

namespace gfm {

double order_length(const ClosureMatrix& closure, const TourOrder& order) {
    double total = 0.0;
    for (std::size_t i = 1; i < order.indices.size(); ++i)
        total += closure.dist(order.indices[i - 1], order.indices[i]);
    if (order.closed && order.indices.size() > 1)
        total += closure.dist(order.indices.back(), order.indices.front());
    return total;
}

TourOrder nearest_neighbor(const ClosureMatrix& closure, int start_index, bool closed) {
    const int n = closure.size();
    if (start_index < 0 || start_index >= n)
        throw std::invalid_argument("nearest_neighbor: bad start index");
    TourOrder order;
    order.closed = closed;
    order.indices.reserve(n);
    std::vector<char> visited(n, 0);
    int cur = start_index;
    visited[cur] = 1;
    order.indices.push_back(cur);
    for (int step = 1; step < n; ++step) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (visited[j]) continue;
            const double d = closure.dist(cur, j);
            if (d < best_d) { // strict: ties keep the lowest index
                best_d = d;
                best = j;
            }
        }
        visited[best] = 1;
        order.indices.push_back(best);
        cur = best;
    }
    return order;
}

TourOrder two_opt(const ClosureMatrix& closure, TourOrder order) {
    auto& idx = order.indices;
    const int n = static_cast<int>(idx.size());
    if (n < 4 && order.closed) return order;
    if (n < 3 && !order.closed) return order;
    const double kEps = 1e-12;
    bool improved = true;
    while (improved) {
        improved = false;
        double best_delta = -kEps;
        int best_i = -1, best_j = -1;
        if (order.closed) {
            // reverse idx[i+1..j]; edges (i,i+1) and (j,j+1 mod n) swap
            for (int i = 0; i < n - 1; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    const int jn = (j + 1) % n;
                    if (jn == i) continue; // whole-cycle reversal
                    const double delta = closure.dist(idx[i], idx[j]) +
                                         closure.dist(idx[i + 1], idx[jn]) -
                                         closure.dist(idx[i], idx[i + 1]) -
                                         closure.dist(idx[j], idx[jn]);
                    if (delta < best_delta) {
                        best_delta = delta;
                        best_i = i + 1;
                        best_j = j;
                    }
                }
            }
        } else {
            // endpoints fixed: reverse idx[i..j] with 1 <= i <= j <= n-2
            for (int i = 1; i + 1 < n; ++i) {
                for (int j = i; j + 1 < n; ++j) {
                    const double delta = closure.dist(idx[i - 1], idx[j]) +
                                         closure.dist(idx[i], idx[j + 1]) -
                                         closure.dist(idx[i - 1], idx[i]) -
                                         closure.dist(idx[j], idx[j + 1]);
                    if (delta < best_delta) {
                        best_delta = delta;
                        best_i = i;
                        best_j = j;
                    }
                }
            }
        }
        if (best_i >= 0) {
            std::reverse(idx.begin() + best_i, idx.begin() + best_j + 1);
            improved = true;
        }
    }
    return order;
}

TourOrder held_karp(const ClosureMatrix& closure, bool closed,
                    std::optional<std::pair<int, int>> endpoints) {
    const int n = closure.size();
    if (n > 16) throw std::invalid_argument("held_karp: subset larger than 16 nodes");
    if (n == 0) throw std::invalid_argument("held_karp: empty closure");
    if (n == 1) return {{0}, closed};

    int start = 0, finish = -1;
    if (!closed) {
        if (!endpoints) throw std::invalid_argument("held_karp: open path needs fixed endpoints");
        start = endpoints->first;
        finish = endpoints->second;
        if (start < 0 || start >= n || finish < 0 || finish >= n || start == finish)
            throw std::invalid_argument("held_karp: bad endpoints");
    } else if (endpoints) {
        start = endpoints->first;
    }

    const double kInf = std::numeric_limits<double>::infinity();
    const int full = 1 << n;
    // dp[mask][j]: cheapest start->j path visiting exactly `mask` (start in mask)
    std::vector<double> dp(static_cast<std::size_t>(full) * n, kInf);
    std::vector<std::int8_t> parent(static_cast<std::size_t>(full) * n, -1);
    dp[(std::size_t(1) << start) * n + start] = 0.0;
    for (int mask = 0; mask < full; ++mask) {
        if (!(mask & (1 << start))) continue;
        for (int j = 0; j < n; ++j) {
            const double cur = dp[static_cast<std::size_t>(mask) * n + j];
            if (cur == kInf || !(mask & (1 << j))) continue;
            for (int k = 0; k < n; ++k) {
                if (mask & (1 << k)) continue;
                const int nmask = mask | (1 << k);
                double& slot = dp[static_cast<std::size_t>(nmask) * n + k];
                const double cand = cur + closure.dist(j, k);
                if (cand < slot) {
                    slot = cand;
                    parent[static_cast<std::size_t>(nmask) * n + k] = static_cast<std::int8_t>(j);
                }
            }
        }
    }

    const int all = full - 1;
    int last = -1;
    if (closed) {
        double best = kInf;
        for (int j = 0; j < n; ++j) {
            if (j == start && n > 1) continue;
            const double cand = dp[static_cast<std::size_t>(all) * n + j] + closure.dist(j, start);
            if (cand < best) {
                best = cand;
                last = j;
            }
        }
    } else {
        last = finish;
    }

    TourOrder order;
    order.closed = closed;
    int mask = all, j = last;
    while (j != -1) {
        order.indices.push_back(j);
        const int p = parent[static_cast<std::size_t>(mask) * n + j];
        mask &= ~(1 << j);
        j = p;
    }
    std::reverse(order.indices.begin(), order.indices.end());
    return order;
}

Solution greedy_walk_tour(const Graph& g, const TaskSpec& spec) {
    if (spec.kind == TaskKind::SP)
        throw std::invalid_argument("greedy_walk_tour: tour kinds only");
    spec.validate(g);

    std::vector<int> subset = spec.required;
    subset.push_back(spec.source);
    if (spec.kind == TaskKind::TPDOD) subset.push_back(spec.target);
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    ClosureMatrix closure = metric_closure(g, subset);

    auto index_of = [&](int node) {
        return static_cast<int>(std::lower_bound(subset.begin(), subset.end(), node) -
                                subset.begin());
    };
    const int start = index_of(spec.source);
    const int finish = spec.kind == TaskKind::TPDOD ? index_of(spec.target) : start;

    std::vector<char> pending(subset.size(), 0);
    for (int r : spec.required) pending[index_of(r)] = 1;
    pending[start] = 0;
    if (spec.kind == TaskKind::TPDOD) pending[finish] = 0;

    Solution sol;
    sol.method_tag = "greedy";
    sol.walk.push_back(spec.source);
    int cur = start;
    auto hop_to = [&](int next) {
        const auto& piece = closure.witness(cur, next);
        sol.walk.insert(sol.walk.end(), piece.begin() + 1, piece.end());
        cur = next;
    };
    for (;;) {
        int best = -1;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < pending.size(); ++j) {
            if (!pending[j]) continue;
            const double d = closure.dist(cur, static_cast<int>(j));
            if (d < best_d) { // lowest index on ties (subset is sorted by node id)
                best_d = d;
                best = static_cast<int>(j);
            }
        }
        if (best < 0) break;
        pending[best] = 0;
        hop_to(best);
    }
    if (cur != finish) hop_to(finish);

    sol.objective_km = objective(g, sol.walk);
    sol.feasible = true;
    return sol;
}

} // namespace gfm
