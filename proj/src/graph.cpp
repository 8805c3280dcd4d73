#include "gfm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

namespace gfm {

namespace {

void check_connected(int n, const std::vector<std::vector<std::pair<int, double>>>& adj) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int reached = 1;
    while (!stack.empty()) {
        int u = stack.back();
        stack.pop_back();
        for (auto [v, w] : adj[u]) {
            (void)w;
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                stack.push_back(v);
            }
        }
    }
    if (reached != n) {
        throw InvalidGraphError("graph is disconnected: reached " + std::to_string(reached) +
                                " of " + std::to_string(n) + " nodes from node 0");
    }
}

} // namespace

Graph Graph::build(int node_count, std::vector<Edge> edges,
                   std::optional<std::vector<std::pair<double, double>>> coords) {
    if (node_count <= 0) throw InvalidGraphError("node_count must be positive");
    if (coords && static_cast<int>(coords->size()) != node_count)
        throw InvalidGraphError("coords size does not match node_count");

    Graph g;
    g.node_count_ = node_count;
    g.adj_.assign(node_count, {});
    std::set<std::pair<int, int>> seen;
    for (const Edge& e : edges) {
        if (e.u < 0 || e.u >= node_count || e.v < 0 || e.v >= node_count)
            throw InvalidGraphError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                    ") references an out-of-range node id");
        if (e.u == e.v)
            throw InvalidGraphError("self-loop at node " + std::to_string(e.u));
        if (!(e.w > 0.0))
            throw InvalidGraphError("nonpositive weight on edge (" + std::to_string(e.u) + "," +
                                    std::to_string(e.v) + ")");
        auto key = std::minmax(e.u, e.v);
        if (!seen.insert(key).second)
            throw InvalidGraphError("duplicate edge (" + std::to_string(e.u) + "," +
                                    std::to_string(e.v) + ")");
        g.adj_[e.u].emplace_back(e.v, e.w);
        g.adj_[e.v].emplace_back(e.u, e.w);
    }
    for (auto& nbrs : g.adj_) std::sort(nbrs.begin(), nbrs.end());
    check_connected(node_count, g.adj_);
    g.edges_ = std::move(edges);
    g.coords_ = std::move(coords);
    return g;
}

const std::vector<std::pair<double, double>>& Graph::coords() const {
    if (!coords_) throw InvalidGraphError("graph has no coordinates");
    return *coords_;
}

bool Graph::has_edge(int u, int v) const {
    const auto& nbrs = adj_[u];
    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), std::make_pair(v, -1.0));
    return it != nbrs.end() && it->first == v;
}

double Graph::edge_weight(int u, int v) const {
    const auto& nbrs = adj_[u];
    auto it = std::lower_bound(nbrs.begin(), nbrs.end(), std::make_pair(v, -1.0));
    if (it == nbrs.end() || it->first != v)
        throw InvalidGraphError("no edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
    return it->second;
}

std::uint64_t Graph::content_hash() const {
    return fnv1a64(to_edge_list(*this));
}

GraphStats stats(const Graph& g) {
    GraphStats s;
    s.node_count = g.node_count();
    s.edge_count = g.edge_count();
    const double n = s.node_count;
    const double m = s.edge_count;
    s.density = 2.0 * m / (n * (n - 1.0));
    s.avg_degree = 2.0 * m / n;
    return s;
}

// ============================================================================
// Edge-list text format
// ============================================================================

namespace {

// strips '#' comments; returns whether any tokens remain
bool tokenize_line(const std::string& line, std::vector<std::string>& out) {
    out.clear();
    std::string stripped = line;
    auto hash = stripped.find('#');
    if (hash != std::string::npos) stripped.resize(hash);
    std::istringstream iss(stripped);
    std::string tok;
    while (iss >> tok) out.push_back(tok);
    return !out.empty();
}

[[noreturn]] void parse_fail(int lineno, const std::string& what) {
    throw ParseError("edge list parse error at line " + std::to_string(lineno) + ": " + what);
}

} // namespace

Graph load_edge_list(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> toks;
    int lineno = 0;

    auto next_tokens = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (tokenize_line(line, toks)) return true;
        }
        return false;
    };

    if (!next_tokens()) throw ParseError("edge list is empty");
    if (toks.size() != 2) parse_fail(lineno, "expected header \"N M\"");
    int n = 0, m = 0;
    try {
        n = std::stoi(toks[0]);
        m = std::stoi(toks[1]);
    } catch (const std::exception&) {
        parse_fail(lineno, "header fields are not integers");
    }
    if (n <= 0 || m < 0) parse_fail(lineno, "header out of range");

    std::vector<Edge> edges;
    edges.reserve(m);
    for (int i = 0; i < m; ++i) {
        if (!next_tokens()) throw ParseError("unexpected end of file: expected " +
                                             std::to_string(m) + " edges, got " + std::to_string(i));
        if (toks.size() != 3) parse_fail(lineno, "expected \"u v w_km\"");
        Edge e;
        try {
            e.u = std::stoi(toks[0]);
            e.v = std::stoi(toks[1]);
            e.w = std::stod(toks[2]);
        } catch (const std::exception&) {
            parse_fail(lineno, "malformed edge fields");
        }
        edges.push_back(e);
    }

    std::optional<std::vector<std::pair<double, double>>> coords;
    if (next_tokens()) {
        if (toks.size() != 1 || toks[0] != "COORDS") parse_fail(lineno, "expected COORDS section");
        coords.emplace(n, std::pair<double, double>{0.0, 0.0});
        std::vector<char> have(n, 0);
        for (int i = 0; i < n; ++i) {
            if (!next_tokens()) throw ParseError("unexpected end of file in COORDS section");
            if (toks.size() != 3) parse_fail(lineno, "expected \"id x y\"");
            int id = 0;
            double x = 0.0, y = 0.0;
            try {
                id = std::stoi(toks[0]);
                x = std::stod(toks[1]);
                y = std::stod(toks[2]);
            } catch (const std::exception&) {
                parse_fail(lineno, "malformed coordinate fields");
            }
            if (id < 0 || id >= n) parse_fail(lineno, "coordinate node id out of range");
            if (have[id]) parse_fail(lineno, "duplicate coordinate for node " + std::to_string(id));
            have[id] = 1;
            (*coords)[id] = {x, y};
        }
        if (next_tokens()) parse_fail(lineno, "trailing content after COORDS section");
    }

    return Graph::build(n, std::move(edges), std::move(coords));
}

Graph load_edge_list_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open graph file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_edge_list(ss.str());
}

std::string to_edge_list(const Graph& g) {
    std::ostringstream out;
    out.precision(17);
    out << g.node_count() << ' ' << g.edge_count() << '\n';
    for (const Edge& e : g.edges()) out << e.u << ' ' << e.v << ' ' << e.w << '\n';
    if (g.has_coords()) {
        out << "COORDS\n";
        const auto& c = g.coords();
        for (int i = 0; i < g.node_count(); ++i)
            out << i << ' ' << c[i].first << ' ' << c[i].second << '\n';
    }
    return out.str();
}

void save_edge_list_file(const Graph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write graph file: " + path);
    out << to_edge_list(g);
}

// ============================================================================
// Seeded generators
// ============================================================================

Graph generate_simulation_graph(std::uint64_t seed, int n_nodes,
                                std::pair<double, double> arterial_range,
                                std::pair<double, double> cross_range, int chord_count) {
    if (n_nodes < 4) throw InvalidGraphError("simulation graph needs at least 4 nodes");
    if (!(arterial_range.first > 0.0 && arterial_range.second >= arterial_range.first) ||
        !(cross_range.first > 0.0 && cross_range.second >= cross_range.first))
        throw InvalidGraphError("weight ranges must be positive intervals");
    if (chord_count < 0) chord_count = n_nodes / 3 + 1;

    Rng rng(seed);
    std::vector<Edge> edges;
    std::set<std::pair<int, int>> used;

    // backbone: arterial ring
    for (int i = 0; i < n_nodes; ++i) {
        int j = (i + 1) % n_nodes;
        double w = rng.uniform(arterial_range.first, arterial_range.second);
        edges.push_back({i, j, w});
        used.insert(std::minmax(i, j));
    }

    // cross links between non-adjacent ring nodes
    int added = 0;
    int attempts = 0;
    while (added < chord_count && attempts < 64 * chord_count) {
        ++attempts;
        int u = static_cast<int>(rng.uniform_int(n_nodes));
        int v = static_cast<int>(rng.uniform_int(n_nodes));
        if (u == v) continue;
        auto key = std::minmax(u, v);
        if (used.count(key)) continue;
        used.insert(key);
        double w = rng.uniform(cross_range.first, cross_range.second);
        edges.push_back({key.first, key.second, w});
        ++added;
    }

    // ring layout with jitter so A* has usable coordinates
    std::vector<std::pair<double, double>> coords(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
        double angle = 2.0 * M_PI * i / n_nodes;
        double r = 1.0 + 0.08 * (rng.uniform() - 0.5);
        coords[i] = {r * std::cos(angle), r * std::sin(angle)};
    }

    return Graph::build(n_nodes, std::move(edges), std::move(coords));
}

Graph generate_proxy_graph(std::uint64_t seed, int n_nodes, double target_avg_degree) {
    if (n_nodes < 4) throw InvalidGraphError("proxy graph needs at least 4 nodes");
    Rng rng(seed);

    // random points on a ~3km x 3km patch
    std::vector<std::pair<double, double>> coords(n_nodes);
    for (auto& c : coords) c = {rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0)};

    auto dist2 = [&](int a, int b) {
        double dx = coords[a].first - coords[b].first;
        double dy = coords[a].second - coords[b].second;
        return dx * dx + dy * dy;
    };

    // candidate edges by euclidean length, shortest first
    std::vector<std::pair<double, std::pair<int, int>>> cand;
    cand.reserve(static_cast<std::size_t>(n_nodes) * 16);
    for (int i = 0; i < n_nodes; ++i) {
        std::vector<std::pair<double, int>> near;
        near.reserve(n_nodes - 1);
        for (int j = 0; j < n_nodes; ++j)
            if (j != i) near.emplace_back(dist2(i, j), j);
        int k = std::min<int>(8, static_cast<int>(near.size()));
        std::partial_sort(near.begin(), near.begin() + k, near.end());
        for (int t = 0; t < k; ++t) {
            auto key = std::minmax(i, near[t].second);
            cand.emplace_back(near[t].first, key);
        }
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    const int target_edges = static_cast<int>(std::lround(target_avg_degree * n_nodes / 2.0));

    // union-find for connectivity bookkeeping
    std::vector<int> parent(n_nodes);
    for (int i = 0; i < n_nodes; ++i) parent[i] = i;
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };

    std::vector<Edge> edges;
    std::set<std::pair<int, int>> used;
    auto add_edge = [&](int u, int v) {
        auto key = std::minmax(u, v);
        if (!used.insert(key).second) return false;
        double w = std::sqrt(dist2(u, v));
        if (w <= 0.0) w = 1e-4; // coincident points
        edges.push_back({key.first, key.second, w});
        parent[find(u)] = find(v);
        return true;
    };

    for (const auto& [d2, uv] : cand) {
        (void)d2;
        if (static_cast<int>(edges.size()) >= target_edges) break;
        add_edge(uv.first, uv.second);
    }

    // bridge remaining components with their closest cross pair
    for (;;) {
        int root0 = find(0);
        int best_u = -1, best_v = -1;
        double best = std::numeric_limits<double>::max();
        for (int u = 0; u < n_nodes; ++u) {
            if (find(u) != root0) continue;
            for (int v = 0; v < n_nodes; ++v) {
                if (find(v) == root0) continue;
                double d = dist2(u, v);
                if (d < best) {
                    best = d;
                    best_u = u;
                    best_v = v;
                }
            }
        }
        if (best_u < 0) break; // single component
        add_edge(best_u, best_v);
    }

    return Graph::build(n_nodes, std::move(edges), std::move(coords));
}

// ============================================================================
// Shortest paths
// ============================================================================

DijkstraResult dijkstra(const Graph& g, int source) {
    const int n = g.node_count();
    if (source < 0 || source >= n) throw InvalidGraphError("dijkstra: invalid source");
    DijkstraResult r;
    r.dist.assign(n, std::numeric_limits<double>::infinity());
    r.pred.assign(n, -1);
    r.dist[source] = 0.0;

    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    pq.emplace(0.0, source);
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > r.dist[u]) continue;
        for (auto [v, w] : g.neighbors(u)) {
            double nd = d + w;
            if (nd < r.dist[v]) {
                r.dist[v] = nd;
                r.pred[v] = u;
                pq.emplace(nd, v);
            }
        }
    }
    return r;
}

std::vector<int> reconstruct_path(const DijkstraResult& r, int source, int target) {
    std::vector<int> path;
    for (int cur = target; cur != -1; cur = r.pred[cur]) {
        path.push_back(cur);
        if (cur == source) break;
    }
    if (path.back() != source) throw InvalidGraphError("no predecessor chain to source");
    std::reverse(path.begin(), path.end());
    return path;
}

PathResult astar(const Graph& g, int s, int t) {
    const int n = g.node_count();
    if (s < 0 || s >= n || t < 0 || t >= n) throw InvalidGraphError("astar: invalid endpoints");
    if (!g.has_coords()) throw InvalidGraphError("astar requires coordinates");
    const auto& c = g.coords();

    auto euclid = [&](int a, int b) {
        double dx = c[a].first - c[b].first;
        double dy = c[a].second - c[b].second;
        return std::sqrt(dx * dx + dy * dy);
    };

    // admissible scale: min over edges of w / euclidean length (0 when degenerate)
    double scale = std::numeric_limits<double>::infinity();
    for (const Edge& e : g.edges()) {
        double len = euclid(e.u, e.v);
        scale = len > 0.0 ? std::min(scale, e.w / len) : 0.0;
    }
    if (!std::isfinite(scale)) scale = 0.0;

    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> pred(n, -1);
    dist[s] = 0.0;
    using Item = std::pair<double, int>; // (f = g + h, node)
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    open.emplace(scale * euclid(s, t), s);
    std::vector<char> closed(n, 0);
    while (!open.empty()) {
        auto [f, u] = open.top();
        (void)f;
        open.pop();
        if (closed[u]) continue;
        closed[u] = 1;
        if (u == t) break;
        for (auto [v, w] : g.neighbors(u)) {
            double nd = dist[u] + w;
            if (nd < dist[v]) {
                dist[v] = nd;
                pred[v] = u;
                open.emplace(nd + scale * euclid(v, t), v);
            }
        }
    }

    PathResult out;
    out.length_km = dist[t];
    DijkstraResult chain{std::move(dist), std::move(pred)};
    out.nodes = reconstruct_path(chain, s, t);
    return out;
}

// ============================================================================
// Metric closure / virtual edges / expansion
// ============================================================================

const std::vector<int>& ClosureMatrix::witness(int a, int b) const {
    if (a < 0 || b < 0 || a >= size() || b >= size())
        throw InvalidGraphError("closure witness: index out of range");
    return witness_[static_cast<std::size_t>(a) * subset_.size() + b];
}

bool ClosureMatrix::is_virtual_pair(int a, int b) const {
    return virtual_ && ((virtual_->first == a && virtual_->second == b) ||
                        (virtual_->first == b && virtual_->second == a));
}

ClosureMatrix metric_closure(const Graph& g, const std::vector<int>& subset) {
    if (subset.empty()) throw InvalidGraphError("closure subset is empty");
    std::set<int> uniq;
    for (int v : subset) {
        if (v < 0 || v >= g.node_count()) throw InvalidGraphError("closure subset id out of range");
        if (!uniq.insert(v).second) throw InvalidGraphError("closure subset has duplicates");
    }

    ClosureMatrix cm;
    cm.subset_ = subset;
    const int k = cm.size();
    cm.dist_.assign(static_cast<std::size_t>(k) * k, 0.0);
    cm.witness_.assign(static_cast<std::size_t>(k) * k, {});
    for (int a = 0; a < k; ++a) {
        DijkstraResult r = dijkstra(g, subset[a]);
        for (int b = 0; b < k; ++b) {
            cm.dist_[static_cast<std::size_t>(a) * k + b] = r.dist[subset[b]];
            cm.witness_[static_cast<std::size_t>(a) * k + b] =
                reconstruct_path(r, subset[a], subset[b]);
        }
    }
    return cm;
}

ClosureMatrix open_tour_closure(const ClosureMatrix& base, int origin, int dest) {
    const auto& sub = base.subset();
    auto idx_of = [&](int node) {
        auto it = std::find(sub.begin(), sub.end(), node);
        if (it == sub.end()) throw InvalidGraphError("open_tour_closure: node not in subset");
        return static_cast<int>(it - sub.begin());
    };
    int oi = idx_of(origin), di = idx_of(dest);
    if (oi == di) throw InvalidGraphError("open_tour_closure: origin equals dest");

    ClosureMatrix cm = base;
    const int k = cm.size();
    cm.dist_[static_cast<std::size_t>(di) * k + oi] = 0.0;
    cm.dist_[static_cast<std::size_t>(oi) * k + di] = 0.0;
    cm.virtual_ = std::make_pair(di, oi);
    return cm;
}

std::vector<int> expand_order(const ClosureMatrix& closure, const std::vector<int>& order,
                              bool closed) {
    if (order.empty()) throw InvalidGraphError("expand_order: empty order");
    if (order.size() == 1 && !closed) return closure.witness(order[0], order[0]);
    std::vector<int> seq = order;
    if (closed) seq.push_back(order.front());

    // rotate a closed order so a virtual pair becomes the wrap-around cut
    if (closure.virtual_pair()) {
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            if (closure.is_virtual_pair(seq[i], seq[i + 1])) {
                if (!closed)
                    throw InvalidGraphError("expand_order: virtual pair inside an open order");
                std::vector<int> rot;
                rot.reserve(order.size());
                // start just after the cut, walk the cycle, end just before it
                for (std::size_t t = 0; t < order.size(); ++t)
                    rot.push_back(seq[(i + 1 + t) % order.size()]);
                // the virtual edge replaces the dest->origin return leg, so
                // the real walk must run origin -> dest
                if (rot.front() == closure.virtual_pair()->first)
                    std::reverse(rot.begin(), rot.end());
                seq = std::move(rot);
                break;
            }
        }
    }

    std::vector<int> walk;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
        const auto& piece = closure.witness(seq[i], seq[i + 1]);
        if (piece.empty()) throw InvalidGraphError("expand_order: unknown pair");
        std::size_t from = walk.empty() ? 0 : 1; // merge junction node
        for (std::size_t t = from; t < piece.size(); ++t) walk.push_back(piece[t]);
    }
    return walk;
}

} // namespace gfm
