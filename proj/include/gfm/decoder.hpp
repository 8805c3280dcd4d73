#ifndef GFM_DECODER_HPP
#define GFM_DECODER_HPP

#include <limits>
#include <numeric>

#include "gfm/baselines.hpp"
#include "gfm/curriculum.hpp"
#include "gfm/model.hpp"
#include "gfm/task.hpp"

namespace gfm {

enum class DecodeMode { Greedy, Beam, Sample };

struct DecodeConfig {
    int beam_width = 8;
    double temperature = 1.0;
    int max_walk_length = -1; // -1: 4 * node_count
    std::uint64_t rng_seed = 0;
    DecodeMode mode = DecodeMode::Beam;
    double blend_lambda = 0.5; // model weight in the insertion score

    void validate() const {
        if (beam_width < 1) throw std::invalid_argument("DecodeConfig: beam_width >= 1");
        if (!(temperature > 0.0)) throw std::invalid_argument("DecodeConfig: temperature > 0");
        if (blend_lambda < 0.0 || blend_lambda > 1.0)
            throw std::invalid_argument("DecodeConfig: blend_lambda in [0,1]");
    }
};

namespace detail {

template <typename S>
Vocab model_vocab(const Parameters<S>& params) {
    return Vocab{params.config.vocab_size - 2};
}

// One forward pass over rows of the form [prefix..., MASK, goal]; returns
// the MASK-row logits, one row per prefix.
template <typename S>
Mat<S> mask_logits(const Parameters<S>& params, const std::vector<std::vector<int>>& prefixes,
                   const std::vector<int>& goals) {
    const Vocab vocab = model_vocab(params);
    int seq = 0;
    for (const auto& p : prefixes) seq = std::max(seq, static_cast<int>(p.size()) + 2);

    TokenBatch batch;
    batch.batch = static_cast<int>(prefixes.size());
    batch.seq = seq;
    batch.tokens.reserve(static_cast<std::size_t>(batch.batch) * seq);
    for (std::size_t b = 0; b < prefixes.size(); ++b) {
        const auto& p = prefixes[b];
        for (int v : p) batch.tokens.push_back(v);
        batch.tokens.push_back(vocab.mask_token());
        batch.tokens.push_back(goals[b]);
        for (int t = static_cast<int>(p.size()) + 2; t < seq; ++t)
            batch.tokens.push_back(vocab.pad_token());
        batch.valid_len.push_back(static_cast<int>(p.size()) + 2);
    }

    Mat<S> logits = forward(params, batch);
    Mat<S> rows(batch.batch, logits.cols());
    for (int b = 0; b < batch.batch; ++b) {
        const int mask_pos = static_cast<int>(prefixes[b].size());
        rows.row(b) = logits.row(static_cast<Eigen::Index>(b) * seq + mask_pos);
    }
    return rows;
}

// log-softmax of `row` restricted to the given token set
template <typename S>
std::vector<double> restricted_log_softmax(const Eigen::Ref<const Vec<S>>& row,
                                           const std::vector<int>& support, double temperature) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int v : support) mx = std::max(mx, static_cast<double>(row[v]) / temperature);
    double z = 0.0;
    for (int v : support) z += std::exp(static_cast<double>(row[v]) / temperature - mx);
    std::vector<double> out;
    out.reserve(support.size());
    for (int v : support)
        out.push_back(static_cast<double>(row[v]) / temperature - mx - std::log(z));
    return out;
}

} // namespace detail

// Neighbor-restricted next-step distribution: query [prefix..., MASK, goal],
// logits at the MASK restricted to neighbors(last(prefix)) and renormalized
// in log-space. Returns (neighbor, log-probability) sorted by neighbor id.
template <typename S>
std::vector<std::pair<int, double>> score_next(const Parameters<S>& params, const Graph& g,
                                               const std::vector<int>& prefix, int goal,
                                               double temperature = 1.0) {
    if (prefix.empty()) throw std::invalid_argument("score_next: empty prefix");
    if (static_cast<int>(prefix.size()) > params.config.max_seq_len - 2)
        throw std::invalid_argument("score_next: prefix longer than max_seq_len - 2");
    Mat<S> rows = detail::mask_logits(params, {prefix}, {goal});
    const auto& nbrs = g.neighbors(prefix.back());
    std::vector<int> support;
    support.reserve(nbrs.size());
    for (const auto& [v, w] : nbrs) {
        (void)w;
        support.push_back(v);
    }
    Vec<S> row = rows.row(0);
    auto lp = detail::restricted_log_softmax<S>(row, support, temperature);
    std::vector<std::pair<int, double>> out;
    out.reserve(support.size());
    for (std::size_t i = 0; i < support.size(); ++i) out.emplace_back(support[i], lp[i]);
    return out;
}

// Beam search over simple paths scored by cumulative score_next. Returns
// the best completed walk by objective; no completion within
// max_walk_length means feasible=false (never a constraint-violating walk).
template <typename S>
Solution decode_sp(const Parameters<S>& params, const Graph& g, const TaskSpec& spec,
                   const DecodeConfig& cfg = {}) {
    if (spec.kind != TaskKind::SP) throw std::invalid_argument("decode_sp: SP tasks only");
    spec.validate(g);
    cfg.validate();
    if (g.node_count() > detail::model_vocab(params).node_count)
        throw std::invalid_argument("decode_sp: graph larger than model vocabulary");

    Solution best;
    best.method_tag = "gfm-sp";
    if (spec.source == spec.target) {
        best.walk = {spec.source};
        best.feasible = true;
        return best;
    }

    const int max_len = cfg.max_walk_length > 0 ? cfg.max_walk_length : 4 * g.node_count();
    const int window = params.config.max_seq_len - 2;

    struct Beam {
        std::vector<int> walk;
        std::vector<char> visited;
        double logp = 0.0;
    };
    std::vector<Beam> beams(1);
    beams[0].walk = {spec.source};
    beams[0].visited.assign(g.node_count(), 0);
    beams[0].visited[spec.source] = 1;

    double best_obj = std::numeric_limits<double>::infinity();
    Rng rng(derive_seed(cfg.rng_seed, 0xbea2, 0));

    for (int step = 1; step < max_len && !beams.empty(); ++step) {
        std::vector<std::vector<int>> prefixes;
        std::vector<int> goals;
        prefixes.reserve(beams.size());
        for (const Beam& b : beams) {
            const int take = std::min<int>(window, static_cast<int>(b.walk.size()));
            prefixes.emplace_back(b.walk.end() - take, b.walk.end());
            goals.push_back(spec.target);
        }
        Mat<S> rows = detail::mask_logits(params, prefixes, goals);

        struct Cand {
            std::size_t beam;
            int node;
            double logp;
        };
        std::vector<Cand> cands;
        for (std::size_t bi = 0; bi < beams.size(); ++bi) {
            const Beam& b = beams[bi];
            const auto& nbrs = g.neighbors(b.walk.back());
            std::vector<int> support;
            for (const auto& [v, w] : nbrs) {
                (void)w;
                if (!b.visited[v]) support.push_back(v);
            }
            if (support.empty()) continue;
            Vec<S> row = rows.row(static_cast<Eigen::Index>(bi));
            auto lp = detail::restricted_log_softmax<S>(row, support, cfg.temperature);
            for (std::size_t k = 0; k < support.size(); ++k) {
                const int v = support[k];
                const double score = b.logp + lp[k];
                if (v == spec.target) {
                    std::vector<int> done = b.walk;
                    done.push_back(v);
                    const double obj = objective(g, done);
                    if (obj < best_obj) {
                        best_obj = obj;
                        best.walk = std::move(done);
                    }
                } else {
                    cands.push_back({bi, v, score});
                }
            }
        }
        if (cands.empty()) break;
        // once a completion exists, longer beams rarely beat it; stop after
        // exploring twice its depth
        if (std::isfinite(best_obj) && step >= 2 * static_cast<int>(best.walk.size())) break;

        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.logp != b.logp) return a.logp > b.logp;
            return a.node < b.node;
        });

        std::vector<Cand> chosen;
        if (cfg.mode == DecodeMode::Greedy) {
            chosen.push_back(cands.front());
        } else if (cfg.mode == DecodeMode::Beam) {
            const std::size_t keep = std::min<std::size_t>(cfg.beam_width, cands.size());
            chosen.assign(cands.begin(), cands.begin() + keep);
        } else { // Sample
            double mx = cands.front().logp;
            std::vector<double> cdf(cands.size());
            double acc = 0.0;
            for (std::size_t i = 0; i < cands.size(); ++i) {
                acc += std::exp(cands[i].logp - mx);
                cdf[i] = acc;
            }
            std::vector<char> taken(cands.size(), 0);
            for (int draw = 0; draw < cfg.beam_width; ++draw) {
                const double u = rng.uniform() * acc;
                std::size_t pick =
                    std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
                pick = std::min(pick, cands.size() - 1);
                if (!taken[pick]) {
                    taken[pick] = 1;
                    chosen.push_back(cands[pick]);
                }
            }
        }

        std::vector<Beam> next;
        next.reserve(chosen.size());
        for (const Cand& c : chosen) {
            Beam nb = beams[c.beam];
            nb.walk.push_back(c.node);
            nb.visited[c.node] = 1;
            nb.logp = c.logp;
            next.push_back(std::move(nb));
        }
        beams = std::move(next);
    }

    if (std::isfinite(best_obj)) {
        best.objective_km = best_obj;
        best.feasible = true;
    }
    return best;
}

// Model-guided cheapest insertion over the closure: each step inserts the
// (node, gap) pair maximizing
//   blend_lambda * log p(node | [a, MASK, b]) - (1 - blend_lambda) * insertion cost.
// blend_lambda = 0 reduces exactly to classical cheapest insertion.
template <typename S>
TourOrder order_required(const Parameters<S>& params, const Graph& g,
                         const ClosureMatrix& closure, const TaskSpec& spec,
                         const DecodeConfig& cfg = {}) {
    if (spec.kind == TaskKind::SP) throw std::invalid_argument("order_required: tour kinds only");
    cfg.validate();
    (void)g;

    const auto& subset = closure.subset();
    auto index_of = [&](int node) {
        auto it = std::find(subset.begin(), subset.end(), node);
        if (it == subset.end()) throw std::invalid_argument("order_required: node not in closure");
        return static_cast<int>(it - subset.begin());
    };

    TourOrder order;
    order.closed = true;
    std::vector<char> placed(subset.size(), 0);
    order.indices.push_back(index_of(spec.source));
    placed[order.indices[0]] = 1;
    if (spec.kind == TaskKind::TPDOD) {
        const int di = index_of(spec.target);
        order.indices.push_back(di);
        placed[di] = 1;
    }

    std::vector<int> remaining;
    for (std::size_t i = 0; i < subset.size(); ++i)
        if (!placed[i]) remaining.push_back(static_cast<int>(i));

    const Vocab vocab = detail::model_vocab(params);
    while (!remaining.empty()) {
        const int len = static_cast<int>(order.indices.size());
        // candidate gaps (a, b), excluding the virtual pair's reserved slot
        std::vector<std::pair<int, int>> gaps;
        if (len == 1) {
            gaps.emplace_back(order.indices[0], order.indices[0]);
        } else {
            const auto vp = closure.virtual_pair();
            for (int i = 0; i < len; ++i) {
                const int a = order.indices[i];
                const int b = order.indices[(i + 1) % len];
                // keep the directed dest->origin return leg virtual
                if (vp && a == vp->first && b == vp->second) continue;
                gaps.emplace_back(a, b);
            }
        }

        Mat<S> rows;
        if (cfg.blend_lambda > 0.0) {
            std::vector<std::vector<int>> prefixes;
            std::vector<int> goals;
            for (auto [a, b] : gaps) {
                prefixes.push_back({subset[a]});
                goals.push_back(subset[b]);
            }
            rows = detail::mask_logits(params, prefixes, goals);
        }

        int best_r = -1;
        std::size_t best_gap = 0;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t gi = 0; gi < gaps.size(); ++gi) {
            auto [a, b] = gaps[gi];
            std::vector<double> lp;
            if (cfg.blend_lambda > 0.0) {
                std::vector<int> support(vocab.node_count);
                std::iota(support.begin(), support.end(), 0);
                Vec<S> row = rows.row(static_cast<Eigen::Index>(gi));
                lp = detail::restricted_log_softmax<S>(row, support, cfg.temperature);
            }
            for (int r : remaining) {
                const double cost = closure.dist(a, r) + closure.dist(r, b) - closure.dist(a, b);
                double score = -(1.0 - cfg.blend_lambda) * cost;
                if (cfg.blend_lambda > 0.0) score += cfg.blend_lambda * lp[subset[r]];
                if (score > best_score + 1e-15 ||
                    (score > best_score - 1e-15 && best_r >= 0 && subset[r] < subset[best_r])) {
                    best_score = score;
                    best_r = r;
                    best_gap = gi;
                }
            }
        }

        // splice best_r into its gap
        if (len == 1) {
            order.indices.push_back(best_r);
        } else {
            auto [a, b] = gaps[best_gap];
            (void)b;
            for (int i = 0; i < len; ++i) {
                if (order.indices[i] == a) {
                    order.indices.insert(order.indices.begin() + i + 1, best_r);
                    break;
                }
            }
        }
        remaining.erase(std::find(remaining.begin(), remaining.end(), best_r));
    }
    return order;
}

// Closure -> model-guided insertion -> 2-opt -> witness expansion.
// Feasible by construction.
template <typename S>
Solution decode_tour(const Parameters<S>& params, const Graph& g, const TaskSpec& spec,
                     const DecodeConfig& cfg = {}) {
    if (spec.kind == TaskKind::SP) throw std::invalid_argument("decode_tour: tour kinds only");
    spec.validate(g);
    cfg.validate();

    std::vector<int> subset = spec.required;
    subset.push_back(spec.source);
    if (spec.kind == TaskKind::TPDOD) subset.push_back(spec.target);
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());

    ClosureMatrix closure = metric_closure(g, subset);
    if (spec.kind == TaskKind::TPDOD)
        closure = open_tour_closure(closure, spec.source, spec.target);

    TourOrder order = order_required(params, g, closure, spec, cfg);

    auto rotate_to_front = [&](int idx) {
        auto it = std::find(order.indices.begin(), order.indices.end(), idx);
        std::rotate(order.indices.begin(), it, order.indices.end());
    };
    const auto& sub = closure.subset();
    auto index_of = [&](int node) {
        return static_cast<int>(std::find(sub.begin(), sub.end(), node) - sub.begin());
    };

    if (spec.kind == TaskKind::TPDOD) {
        // pin origin first / dest last and refine as an open path, keeping
        // the virtual pair on the wrap-around
        rotate_to_front(index_of(spec.source));
        order.closed = false;
        order = two_opt(closure, order);
        order.closed = true;
    } else {
        order = two_opt(closure, order);
        rotate_to_front(index_of(spec.source));
    }

    Solution sol;
    sol.method_tag = "gfm-tour";
    sol.walk = expand_order(closure, order.indices, true);
    sol.objective_km = objective(g, sol.walk);
    sol.feasible = true;
    return sol;
}

// Kind dispatch.
template <typename S>
Solution decode(const Parameters<S>& params, const Graph& g, const TaskSpec& spec,
                const DecodeConfig& cfg = {}) {
    return spec.kind == TaskKind::SP ? decode_sp(params, g, spec, cfg)
                                     : decode_tour(params, g, spec, cfg);
}

// CSV row "kind,source,target,required,objective_km,feasible,runtime_s,walk";
// `required` and `walk` are ';'-separated.
inline std::string solution_csv_row(const TaskSpec& spec, const Solution& sol) {
    std::ostringstream os;
    os << to_string(spec.kind) << ',' << spec.source << ',' << spec.target << ',';
    for (std::size_t i = 0; i < spec.required.size(); ++i)
        os << (i ? ";" : "") << spec.required[i];
    os << ',' << sol.objective_km << ',' << (sol.feasible ? 1 : 0) << ',' << sol.runtime_s << ',';
    for (std::size_t i = 0; i < sol.walk.size(); ++i) os << (i ? ";" : "") << sol.walk[i];
    return os.str();
}

} // namespace gfm

#endif // GFM_DECODER_HPP
