#ifndef GFM_WALKER_HPP
#define GFM_WALKER_HPP

#include <string>
#include <vector>

#include "gfm/common.hpp"
#include "gfm/graph.hpp"

namespace gfm {

// Sentinel for "no previous node" on the first step of a walk.
inline constexpr int kNoPrevious = -1;

struct WalkConfig {
    double beta = 1.0;       // softmax sharpness, > 0
    double p = 2.0;          // backtrack penalty, > 0
    double q = 1.2;          // in-out penalty, > 0
    int walk_length = 10;    // T >= 3
    int walks_per_node = 10;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

struct Walk {
    std::vector<int> nodes;
};

// Bias term b(i,j,r): p when j backtracks to r, 1 when j is adjacent to r
// (or there is no previous node), q otherwise. Penalties act inside
// exp(-beta * w * b), so values > 1 suppress a move.
double walk_bias(const Graph& g, int i, int j, int r, const WalkConfig& cfg);

// Transition distribution over neighbors(i), aligned with the neighbor
// list order. Sums to 1.
std::vector<double> step_distribution(const Graph& g, int i, int r, const WalkConfig& cfg);

Walk sample_walk(const Graph& g, int start, const WalkConfig& cfg, Rng& rng);

// walks_per_node walks from every node; per-walk sub-seeds derived from
// (rng_seed, start, index) so generation order never affects the output.
std::vector<Walk> generate_corpus(const Graph& g, const WalkConfig& cfg);

// Corpus file: '#' header lines recording the config and graph hash, then
// one walk per line as space-separated node ids.
std::string corpus_to_text(const std::vector<Walk>& corpus, const Graph& g, const WalkConfig& cfg);
std::vector<Walk> corpus_from_text(const std::string& text);
void save_corpus_file(const std::vector<Walk>& corpus, const Graph& g, const WalkConfig& cfg,
                      const std::string& path);
std::vector<Walk> load_corpus_file(const std::string& path);

} // namespace gfm

#endif // GFM_WALKER_HPP
