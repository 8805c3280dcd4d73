#include "gfm/walker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace gfm {

void WalkConfig::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("WalkConfig: beta must be > 0");
    if (!(p > 0.0)) throw std::invalid_argument("WalkConfig: p must be > 0");
    if (!(q > 0.0)) throw std::invalid_argument("WalkConfig: q must be > 0");
    if (walk_length < 3) throw std::invalid_argument("WalkConfig: walk_length must be >= 3");
    if (walks_per_node < 1) throw std::invalid_argument("WalkConfig: walks_per_node must be >= 1");
}

double walk_bias(const Graph& g, int i, int j, int r, const WalkConfig& cfg) {
    (void)i;
    if (r == kNoPrevious) return 1.0;
    if (j == r) return cfg.p;
    if (g.has_edge(j, r)) return 1.0;
    return cfg.q;
}

std::vector<double> step_distribution(const Graph& g, int i, int r, const WalkConfig& cfg) {
    const auto& nbrs = g.neighbors(i);
    std::vector<double> util(nbrs.size());
    double max_u = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < nbrs.size(); ++k) {
        auto [j, w] = nbrs[k];
        util[k] = -cfg.beta * w * walk_bias(g, i, j, r, cfg);
        max_u = std::max(max_u, util[k]);
    }
    double z = 0.0;
    for (double& u : util) {
        u = std::exp(u - max_u);
        z += u;
    }
    for (double& u : util) u /= z;
    return util;
}

Walk sample_walk(const Graph& g, int start, const WalkConfig& cfg, Rng& rng) {
    if (start < 0 || start >= g.node_count())
        throw std::invalid_argument("sample_walk: invalid start node");
    Walk walk;
    walk.nodes.reserve(cfg.walk_length);
    walk.nodes.push_back(start);
    int prev = kNoPrevious;
    while (static_cast<int>(walk.nodes.size()) < cfg.walk_length) {
        int cur = walk.nodes.back();
        std::vector<double> probs = step_distribution(g, cur, prev, cfg);
        double u = rng.uniform();
        double acc = 0.0;
        std::size_t pick = probs.size() - 1;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) {
                pick = k;
                break;
            }
        }
        prev = cur;
        walk.nodes.push_back(g.neighbors(cur)[pick].first);
    }
    return walk;
}

std::vector<Walk> generate_corpus(const Graph& g, const WalkConfig& cfg) {
    cfg.validate();
    std::vector<Walk> corpus;
    corpus.reserve(static_cast<std::size_t>(g.node_count()) * cfg.walks_per_node);
    for (int start = 0; start < g.node_count(); ++start) {
        for (int idx = 0; idx < cfg.walks_per_node; ++idx) {
            Rng rng(derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(start),
                                static_cast<std::uint64_t>(idx)));
            corpus.push_back(sample_walk(g, start, cfg, rng));
        }
    }
    return corpus;
}

std::string corpus_to_text(const std::vector<Walk>& corpus, const Graph& g,
                           const WalkConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "# gfm walk corpus\n";
    out << "# graph_hash " << g.content_hash() << '\n';
    out << "# beta " << cfg.beta << " p " << cfg.p << " q " << cfg.q << " T " << cfg.walk_length
        << " walks_per_node " << cfg.walks_per_node << " seed " << cfg.rng_seed << '\n';
    for (const Walk& w : corpus) {
        for (std::size_t i = 0; i < w.nodes.size(); ++i) {
            if (i) out << ' ';
            out << w.nodes[i];
        }
        out << '\n';
    }
    return out.str();
}

std::vector<Walk> corpus_from_text(const std::string& text) {
    std::vector<Walk> corpus;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream iss(line);
        Walk w;
        int id;
        while (iss >> id) w.nodes.push_back(id);
        if (!w.nodes.empty()) corpus.push_back(std::move(w));
    }
    return corpus;
}

void save_corpus_file(const std::vector<Walk>& corpus, const Graph& g, const WalkConfig& cfg,
                      const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write corpus file: " + path);
    out << corpus_to_text(corpus, g, cfg);
}

std::vector<Walk> load_corpus_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open corpus file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return corpus_from_text(ss.str());
}

} // namespace gfm
