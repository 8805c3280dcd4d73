#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdio>
#include <numeric>

#include "gfm/decoder.hpp"
#include "gfm/harness.hpp"
#include "gfm/trainer.hpp"
#include "gfm/walker.hpp"

using namespace gfm;

namespace {

void report(int k, bool ok, const std::string& detail) {
    std::printf("CRITERION %d: %s%s%s\n", k, ok ? "PASS" : "FAIL", detail.empty() ? "" : " - ",
                detail.c_str());
    std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

// ---------------------------------------------------------------------------
// shared fixtures
// ---------------------------------------------------------------------------

const Graph& sim_graph() {
    static Graph g = generate_simulation_graph(42, 20);
    return g;
}

ModelConfig toy_model_config() {
    ModelConfig cfg;
    cfg.layers = 6;
    cfg.heads = 6;
    cfg.embed_dim = 192;
    cfg.max_seq_len = 12;
    cfg.vocab_size = 22;
    cfg.dropout = 0.1;
    return cfg;
}

std::vector<CurriculumSample> toy_dataset() {
    WalkConfig wcfg;
    wcfg.walk_length = 10;
    wcfg.walks_per_node = 10;
    wcfg.rng_seed = 7;
    auto corpus = generate_corpus(sim_graph(), wcfg);
    CurriculumConfig ccfg;
    return build_dataset(corpus, ccfg, 11);
}

// Trains the toy configuration once and caches the checkpoint next to the
// test binary so reruns skip the training phase.
const char* kToyCheckpoint = "acceptance_toy_ck.gfm";

std::pair<Parameters<float>, double> toy_checkpoint() {
    try {
        Parameters<float> p = load_checkpoint<float>(kToyCheckpoint);
        ModelConfig want = toy_model_config();
        if (p.config.layers == want.layers && p.config.embed_dim == want.embed_dim &&
            p.config.vocab_size == want.vocab_size)
            return {std::move(p), -1.0};
    } catch (const std::exception&) {
    }
    auto dataset = toy_dataset();
    Vocab vocab{20};
    TrainConfig tcfg;
    tcfg.total_steps = 15000;
    tcfg.learning_rate = 5e-4;
    tcfg.batch_size = 32;
    tcfg.rng_seed = 1;
    const auto t0 = std::chrono::steady_clock::now();
    auto result = train<float>(dataset, vocab, toy_model_config(), tcfg);
    const double elapsed = seconds_since(t0);
    save_checkpoint(result.state.params, kToyCheckpoint);
    return {std::move(result.state.params), elapsed};
}

// closure + exact Held-Karp oracle for a tour instance
double tour_oracle(const Graph& g, const TaskSpec& spec) {
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
    TourOrder order =
        spec.kind == TaskKind::TPDOD
            ? held_karp(closure, false,
                        std::pair<int, int>{index_of(spec.source), index_of(spec.target)})
            : held_karp(closure, true);
    return order_length(closure, order);
}

// classical NN(+2opt) baseline expanded to a walk, mirroring the harness
Solution closure_baseline(const Graph& g, const TaskSpec& spec, bool refine) {
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
    const bool open = spec.kind == TaskKind::TPDOD;
    TourOrder order;
    if (open) {
        const int finish = index_of(spec.target);
        order.closed = false;
        order.indices.push_back(start);
        std::vector<char> used(subset.size(), 0);
        used[start] = used[finish] = 1;
        int cur = start;
        for (std::size_t step = 2; step < subset.size(); ++step) {
            int best = -1;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < subset.size(); ++j)
                if (!used[j] && closure.dist(cur, static_cast<int>(j)) < best_d) {
                    best_d = closure.dist(cur, static_cast<int>(j));
                    best = static_cast<int>(j);
                }
            used[best] = 1;
            order.indices.push_back(best);
            cur = best;
        }
        order.indices.push_back(finish);
    } else {
        order = nearest_neighbor(closure, start);
    }
    if (refine) order = two_opt(closure, order);
    if (!open) {
        auto it = std::find(order.indices.begin(), order.indices.end(), start);
        std::rotate(order.indices.begin(), it, order.indices.end());
    }
    Solution sol;
    sol.method_tag = refine ? "nn2opt" : "nn";
    sol.walk = expand_order(closure, order.indices, !open);
    sol.objective_km = objective(g, sol.walk);
    sol.feasible = true;
    return sol;
}

} // namespace

// ---------------------------------------------------------------------------
// 1. gradient correctness: full finite-difference sweep
// ---------------------------------------------------------------------------
TEST_CASE("criterion 1: gradient correctness") {
    const auto t0 = std::chrono::steady_clock::now();

    ModelConfig cfg;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.embed_dim = 16;
    cfg.max_seq_len = 8;
    cfg.vocab_size = 24;
    cfg.dropout = 0.0;
    Parameters<double> params = init_params<double>(cfg, 3);

    TokenBatch batch;
    batch.batch = 4;
    batch.seq = 6;
    batch.tokens = {0, 22, 5, 3, 23, 23,   7, 1, 22, 9,  2, 23,
                    11, 22, 13, 23, 23, 23, 4, 6, 8, 22, 10, 12};
    batch.valid_len = {4, 5, 3, 6};
    const std::vector<int> mask_pos = {1, 2, 1, 3};
    const std::vector<std::vector<int>> targets = {{5, 7}, {2}, {13, 14, 15}, {9, 11}};

    auto scalar_loss = [&](const Parameters<double>& p) {
        Mat<double> logits = forward(p, batch);
        double total = 0.0;
        for (int b = 0; b < batch.batch; ++b) {
            Vec<double> row = logits.row(static_cast<Eigen::Index>(b) * batch.seq + mask_pos[b]);
            total += multi_target_loss<double>(row, targets[b]);
        }
        return total;
    };

    ForwardCache<double> cache;
    Mat<double> logits = forward(params, batch, &cache);
    Mat<double> dlogits = Mat<double>::Zero(logits.rows(), logits.cols());
    for (int b = 0; b < batch.batch; ++b) {
        const Eigen::Index row = static_cast<Eigen::Index>(b) * batch.seq + mask_pos[b];
        Vec<double> lrow = logits.row(row);
        dlogits.row(row) = multi_target_loss_grad<double>(lrow, targets[b]).transpose();
    }
    Parameters<double> grads = backward(params, cache, dlogits);

    // central finite differences over every individual parameter
    const double eps = 1e-4;
    double worst = 0.0;
    std::string worst_name;
    std::vector<std::pair<double*, Eigen::Index>> spans;
    visit_params(params, [&](const char*, double* d, Eigen::Index n) { spans.emplace_back(d, n); });
    std::vector<std::pair<const double*, const char*>> gspans;
    std::vector<Eigen::Index> gsizes;
    visit_params(grads, [&](const char* name, const double* d, Eigen::Index n) {
        gspans.emplace_back(d, name);
        gsizes.push_back(n);
    });
    for (std::size_t s = 0; s < spans.size(); ++s) {
        double* data = spans[s].first;
        for (Eigen::Index i = 0; i < spans[s].second; ++i) {
            const double keep = data[i];
            data[i] = keep + eps;
            const double up = scalar_loss(params);
            data[i] = keep - eps;
            const double dn = scalar_loss(params);
            data[i] = keep;
            const double fd = (up - dn) / (2.0 * eps);
            const double an = gspans[s].first[i];
            const double rel = std::abs(an - fd) / std::max(1e-6, std::abs(an) + std::abs(fd));
            if (rel > worst) {
                worst = rel;
                worst_name = gspans[s].second;
            }
        }
    }

    const double elapsed = seconds_since(t0);
    const bool ok = worst < 1e-3 && elapsed < 60.0;
    report(1, ok,
           "max rel grad error " + fmt("%.3e", worst) + " (" + worst_name + "), " +
               fmt("%.1f s", elapsed));
    CHECK(ok);
}

// ---------------------------------------------------------------------------
// 2. loss oracle
// ---------------------------------------------------------------------------
TEST_CASE("criterion 2: loss oracle") {
    Rng rng(99);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int vocab = 4 + static_cast<int>(rng.uniform_int(60));
        Vec<double> logits(vocab);
        for (int i = 0; i < vocab; ++i) logits[i] = rng.uniform(-10.0, 10.0);
        std::vector<int> targets;
        for (int i = 0; i < vocab; ++i)
            if (rng.uniform() < 0.3) targets.push_back(i);
        if (targets.empty()) targets.push_back(static_cast<int>(rng.uniform_int(vocab)));

        double z = 0.0;
        for (int i = 0; i < vocab; ++i) z += std::exp(logits[i]);
        double mass = 0.0;
        for (int y : targets) mass += std::exp(logits[y]) / z;
        const double direct = -std::log(mass);
        worst = std::max(worst, std::abs(direct - multi_target_loss<double>(logits, targets)));
    }

    // Eq. 6 closed form under uniform logits
    Vec<double> uniform = Vec<double>::Constant(22, 1.25);
    const double closed = multi_target_loss<double>(uniform, {0, 1, 2, 3});
    const double anchor_err = std::abs(closed - std::log(22.0 / 4.0));

    const bool ok = worst < 1e-10 && anchor_err < 1e-12;
    report(2, ok,
           "max oracle deviation " + fmt("%.2e", worst) + ", uniform anchor error " +
               fmt("%.2e", anchor_err));
    CHECK(ok);
}

// ---------------------------------------------------------------------------
// 3. walk-law fidelity
// ---------------------------------------------------------------------------
TEST_CASE("criterion 3: walk-law fidelity") {
    const auto t0 = std::chrono::steady_clock::now();
    const Graph& g = sim_graph();
    WalkConfig cfg;
    cfg.walk_length = 3;
    cfg.walks_per_node = 1;

    // independent Eq. 2 closed form
    auto closed_form = [&](int i, int r) {
        const auto& nbrs = g.neighbors(i);
        std::vector<double> probs;
        double z = 0.0;
        for (const auto& [j, w] : nbrs) {
            double b;
            if (r == kNoPrevious)
                b = 1.0;
            else if (j == r)
                b = cfg.p;
            else if (g.has_edge(j, r))
                b = 1.0;
            else
                b = cfg.q;
            const double e = std::exp(-cfg.beta * w * b);
            probs.push_back(e);
            z += e;
        }
        for (double& x : probs) x /= z;
        return probs;
    };

    // 6 adjacent (i, r) pairs plus 4 walk starts
    std::vector<std::pair<int, int>> states;
    for (int i : {0, 3, 7, 12, 15, 19}) states.emplace_back(i, g.neighbors(i).front().first);
    for (int i : {1, 5, 10, 17}) states.emplace_back(i, kNoPrevious);

    double worst_tv = 0.0;
    const int kSamples = 100000;
    for (std::size_t s = 0; s < states.size(); ++s) {
        auto [i, r] = states[s];
        const auto& nbrs = g.neighbors(i);
        std::map<int, int> counts;
        int collected = 0;
        std::uint64_t attempt = 0;
        while (collected < kSamples) {
            Rng rng(derive_seed(1000 + s, 0xacce, attempt++));
            if (r == kNoPrevious) {
                Walk w = sample_walk(g, i, cfg, rng);
                counts[w.nodes[1]]++;
                ++collected;
            } else {
                // condition a fresh walk from r on its first step landing at i
                Walk w = sample_walk(g, r, cfg, rng);
                if (w.nodes[1] != i) continue;
                counts[w.nodes[2]]++;
                ++collected;
            }
        }
        auto probs = closed_form(i, r);
        double tv = 0.0;
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            const double emp = static_cast<double>(counts[nbrs[k].first]) / kSamples;
            tv += std::abs(emp - probs[k]);
        }
        worst_tv = std::max(worst_tv, 0.5 * tv);
    }

    const double elapsed = seconds_since(t0);
    const bool ok = worst_tv < 0.01 && elapsed < 60.0;
    report(3, ok,
           "worst TV over 10 states " + fmt("%.4f", worst_tv) + ", " + fmt("%.1f s", elapsed));
    CHECK(ok);
}

// ---------------------------------------------------------------------------
// 4. curriculum conformance
// ---------------------------------------------------------------------------
TEST_CASE("criterion 4: curriculum conformance") {
    // level_count formula for T in 3..200
    bool formula_ok = true;
    CurriculumConfig ccfg;
    for (int t = 3; t <= 200; ++t) {
        const int expect = std::min(
            ccfg.l_max, std::max(ccfg.l_min, static_cast<int>(std::floor(std::log2(t)))));
        if (level_count(t, ccfg) != expect) formula_ok = false;
    }

    const Graph& g = sim_graph();
    WalkConfig wcfg;
    wcfg.walk_length = 10;
    wcfg.walks_per_node = 50; // 1000 walks
    wcfg.rng_seed = 13;
    auto corpus = generate_corpus(g, wcfg);

    bool invariants_ok = true;
    bool level1_ok = true;
    int samples_seen = 0;
    for (std::size_t wi = 0; wi < corpus.size(); ++wi) {
        const auto& walk = corpus[wi].nodes;
        Rng rng(derive_seed(99, 4, wi));
        auto samples = build_curriculum(corpus[wi], ccfg, rng);
        if (samples.empty()) invariants_ok = false;

        // Eq. 3: the first sample is [v1, MASK, vT] with the deduplicated
        // interior as its target set
        const auto& first = samples.front();
        std::vector<int> interior;
        for (std::size_t t = 1; t + 1 < walk.size(); ++t)
            if (std::find(interior.begin(), interior.end(), walk[t]) == interior.end())
                interior.push_back(walk[t]);
        std::vector<int> want_targets = interior;
        std::sort(want_targets.begin(), want_targets.end());
        std::vector<int> got_targets = first.targets;
        std::sort(got_targets.begin(), got_targets.end());
        if (first.level != 1 || first.query.size() != 3 || first.query[0] != walk.front() ||
            first.query[1] != kMaskNode || first.query[2] != walk.back() ||
            got_targets != want_targets)
            level1_ok = false;

        const int max_level = level_count(static_cast<int>(walk.size()), ccfg);
        for (const auto& s : samples) {
            ++samples_seen;
            if (s.level < 1 || s.level > max_level) invariants_ok = false;
            // exactly one mask
            if (std::count(s.query.begin(), s.query.end(), kMaskNode) != 1) invariants_ok = false;
            if (s.query.front() != walk.front() || s.query.back() != walk.back())
                invariants_ok = false;
            if (s.targets.empty()) invariants_ok = false;
            // targets are interior walk nodes, deduplicated
            std::vector<int> tg = s.targets;
            std::sort(tg.begin(), tg.end());
            if (std::adjacent_find(tg.begin(), tg.end()) != tg.end()) invariants_ok = false;
            for (int y : s.targets)
                if (std::find(walk.begin() + 1, walk.end() - 1, y) == walk.end() - 1)
                    invariants_ok = false;
            // revealed anchors appear in walk order
            std::size_t cursor = 0;
            for (int qv : s.query) {
                if (qv == kMaskNode) continue;
                while (cursor < walk.size() && walk[cursor] != qv) ++cursor;
                if (cursor == walk.size()) invariants_ok = false;
            }
        }
    }

    const bool ok = formula_ok && invariants_ok && level1_ok;
    report(4, ok,
           std::to_string(samples_seen) + " samples from 1000 walks; formula " +
               (formula_ok ? "ok" : "BAD") + ", invariants " + (invariants_ok ? "ok" : "BAD") +
               ", Eq.3 " + (level1_ok ? "ok" : "BAD"));
    CHECK(ok);
}

// ---------------------------------------------------------------------------
// 5. oracle ladder
// ---------------------------------------------------------------------------
TEST_CASE("criterion 5: oracle ladder") {
    bool ladder_ok = true;
    bool exact_ok = true;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Graph g = generate_proxy_graph(seed, 30);
        Rng rng(derive_seed(seed, 5, 0));
        std::vector<int> subset;
        while (subset.size() < 8) {
            int v = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(g.node_count())));
            if (std::find(subset.begin(), subset.end(), v) == subset.end()) subset.push_back(v);
        }
        std::sort(subset.begin(), subset.end());
        ClosureMatrix c = metric_closure(g, subset);

        TourOrder nn = nearest_neighbor(c, 0);
        TourOrder refined = two_opt(c, nn);
        TourOrder hk = held_karp(c, true);
        const double l_nn = order_length(c, nn);
        const double l_2opt = order_length(c, refined);
        const double l_hk = order_length(c, hk);
        if (!(l_hk <= l_2opt + 1e-9 && l_2opt <= l_nn + 1e-9)) ladder_ok = false;

        // brute-force enumeration oracle (n = 8)
        std::vector<int> perm(7);
        std::iota(perm.begin(), perm.end(), 1);
        double best = std::numeric_limits<double>::infinity();
        do {
            double len = c.dist(0, perm[0]);
            for (std::size_t i = 1; i < perm.size(); ++i) len += c.dist(perm[i - 1], perm[i]);
            len += c.dist(perm.back(), 0);
            best = std::min(best, len);
        } while (std::next_permutation(perm.begin(), perm.end()));
        if (std::abs(best - l_hk) > 1e-9) exact_ok = false;
    }
    const bool ok = ladder_ok && exact_ok;
    report(5, ok,
           std::string("50 closures; ladder ") + (ladder_ok ? "ok" : "BAD") +
               ", brute-force match " + (exact_ok ? "ok" : "BAD"));
    CHECK(ok);
}

// ---------------------------------------------------------------------------
// 6. trained-model quality
// ---------------------------------------------------------------------------
TEST_CASE("criterion 6: trained-model quality") {
    const Graph& g = sim_graph();
    auto [params, train_seconds] = toy_checkpoint();
    const bool time_ok = train_seconds < 0.0 || train_seconds < 1800.0;

    // (a) SP over 100 random pairs vs Dijkstra
    auto sp_instances = gen_instances(g, TaskKind::SP, 100, 21);
    int sp_success = 0;
    double sp_gap_sum = 0.0;
    for (const auto& spec : sp_instances) {
        Solution sol = decode_sp(params, g, spec);
        if (!sol.feasible) continue;
        ++sp_success;
        const double opt = dijkstra(g, spec.source).dist[spec.target];
        sp_gap_sum += opt > 0.0 ? (sol.objective_km - opt) / opt : 0.0;
    }
    const double sp_gap = sp_success > 0 ? sp_gap_sum / sp_success : 1e9;
    const bool sp_ok = sp_success >= 95 && sp_gap <= 0.10;

    // (b)/(c) tour kinds with |R| = 8 over 20 instances vs Held-Karp
    auto eval_tours = [&](TaskKind kind, double& gap_out, bool& feas_out) {
        auto instances = gen_instances(g, kind, 20, 22, 8, 8);
        int feasible = 0;
        double gap_sum = 0.0;
        for (const auto& spec : instances) {
            Solution sol = decode_tour(params, g, spec);
            auto [good, why] = feasibility_check(g, spec, sol.walk);
            if (sol.feasible && good) ++feasible;
            const double opt = tour_oracle(g, spec);
            gap_sum += (sol.objective_km - opt) / opt;
        }
        gap_out = gap_sum / static_cast<double>(instances.size());
        feas_out = feasible == static_cast<int>(instances.size());
    };
    double gtsp_gap, tpsod_gap, tpdod_gap;
    bool gtsp_feas, tpsod_feas, tpdod_feas;
    eval_tours(TaskKind::GTSP, gtsp_gap, gtsp_feas);
    eval_tours(TaskKind::TPSOD, tpsod_gap, tpsod_feas);
    eval_tours(TaskKind::TPDOD, tpdod_gap, tpdod_feas);
    const bool tours_ok = gtsp_feas && tpsod_feas && tpdod_feas && gtsp_gap <= 0.15 &&
                          tpsod_gap <= 0.15 && tpdod_gap <= 0.15;

    const bool ok = time_ok && sp_ok && tours_ok;
    std::string detail =
        (train_seconds < 0.0 ? std::string("cached checkpoint")
                             : fmt("trained in %.1f min", train_seconds / 60.0)) +
        "; SP succ " + std::to_string(sp_success) + "/100 gap " + fmt("%.1f%%", 100.0 * sp_gap) +
        "; gaps GTSP " + fmt("%.1f%%", 100.0 * gtsp_gap) + " TPSOD " +
        fmt("%.1f%%", 100.0 * tpsod_gap) + " TPDOD " + fmt("%.1f%%", 100.0 * tpdod_gap);
    report(6, ok, detail);
    CHECK(ok);
}

// ---------------------------------------------------------------------------
// 7. feasibility contract
// ---------------------------------------------------------------------------
TEST_CASE("criterion 7: feasibility contract") {
    const Graph& g = sim_graph();
    ModelConfig small;
    small.layers = 2;
    small.heads = 2;
    small.embed_dim = 32;
    small.max_seq_len = 12;
    small.vocab_size = 22;
    auto params = init_params<float>(small, 17);

    bool contract_ok = true;
    bool tour_succ_ok = true;
    int checked = 0;
    auto verify = [&](const TaskSpec& spec, const Solution& sol) {
        ++checked;
        if (!sol.feasible) return;
        auto [good, why] = feasibility_check(g, spec, sol.walk);
        if (!good) contract_ok = false;
    };

    auto sp_instances = gen_instances(g, TaskKind::SP, 250, 31);
    for (const auto& spec : sp_instances) {
        verify(spec, decode_sp(params, g, spec));
        auto d = dijkstra(g, spec.source);
        Solution dj;
        dj.walk = reconstruct_path(d, spec.source, spec.target);
        dj.feasible = true;
        verify(spec, dj);
    }
    for (TaskKind kind : {TaskKind::GTSP, TaskKind::TPSOD, TaskKind::TPDOD}) {
        auto instances = gen_instances(g, kind, 250, 32 + static_cast<int>(kind), 5, 10);
        for (const auto& spec : instances) {
            Solution model = decode_tour(params, g, spec);
            if (!model.feasible) tour_succ_ok = false;
            verify(spec, model);
            verify(spec, greedy_walk_tour(g, spec));
            verify(spec, closure_baseline(g, spec, true));
        }
    }

    const bool ok = contract_ok && tour_succ_ok;
    report(7, ok,
           std::to_string(checked) + " solutions over 1000 instances; feasible-implies-valid " +
               (contract_ok ? "ok" : "BAD") + ", tour Succ 100% " +
               (tour_succ_ok ? "ok" : "BAD"));
    CHECK(ok);
}

// ---------------------------------------------------------------------------
// 8. determinism (64-bit)
// ---------------------------------------------------------------------------
TEST_CASE("criterion 8: determinism") {
    auto pipeline = [&]() {
        Graph g = generate_simulation_graph(42, 20);
        WalkConfig wcfg;
        wcfg.walk_length = 8;
        wcfg.walks_per_node = 4;
        wcfg.rng_seed = 5;
        auto corpus = generate_corpus(g, wcfg);
        CurriculumConfig ccfg;
        auto dataset = build_dataset(corpus, ccfg, 6);
        Vocab vocab{20};
        ModelConfig mcfg;
        mcfg.layers = 2;
        mcfg.heads = 2;
        mcfg.embed_dim = 32;
        mcfg.max_seq_len = 10;
        mcfg.vocab_size = vocab.size();
        mcfg.dropout = 0.1;
        TrainConfig tcfg;
        tcfg.total_steps = 120;
        tcfg.batch_size = 8;
        tcfg.rng_seed = 9;
        auto result = train<double>(dataset, vocab, mcfg, tcfg);

        std::vector<double> objectives;
        std::vector<std::vector<int>> walks;
        for (const auto& spec : gen_instances(g, TaskKind::SP, 5, 41)) {
            Solution sol = decode_sp(result.state.params, g, spec);
            objectives.push_back(sol.objective_km);
            walks.push_back(sol.walk);
        }
        for (TaskKind kind : {TaskKind::GTSP, TaskKind::TPSOD, TaskKind::TPDOD}) {
            for (const auto& spec : gen_instances(g, kind, 2, 43, 4, 6)) {
                Solution sol = decode_tour(result.state.params, g, spec);
                objectives.push_back(sol.objective_km);
                walks.push_back(sol.walk);
            }
        }
        return std::tuple(std::move(result.state.params), std::move(objectives),
                          std::move(walks));
    };

    auto [p1, obj1, walks1] = pipeline();
    auto [p2, obj2, walks2] = pipeline();

    bool params_ok = true;
    {
        std::vector<std::pair<const double*, Eigen::Index>> a, b;
        visit_params(p1, [&](const char*, const double* d, Eigen::Index n) { a.emplace_back(d, n); });
        visit_params(p2, [&](const char*, const double* d, Eigen::Index n) { b.emplace_back(d, n); });
        for (std::size_t s = 0; s < a.size(); ++s)
            for (Eigen::Index i = 0; i < a[s].second; ++i)
                if (a[s].first[i] != b[s].first[i]) params_ok = false;
    }
    bool obj_ok = obj1.size() == obj2.size();
    for (std::size_t i = 0; obj_ok && i < obj1.size(); ++i)
        if (obj1[i] != obj2[i]) obj_ok = false; // bitwise
    const bool walks_ok = walks1 == walks2;

    const bool ok = params_ok && obj_ok && walks_ok;
    report(8, ok,
           std::string("params bitwise ") + (params_ok ? "ok" : "BAD") + ", " +
               std::to_string(obj1.size()) + " objectives bitwise " + (obj_ok ? "ok" : "BAD") +
               ", walks " + (walks_ok ? "ok" : "BAD"));
    CHECK(ok);
}

// ---------------------------------------------------------------------------
// 9. scale smoke test
// ---------------------------------------------------------------------------
TEST_CASE("criterion 9: scale smoke test") {
    Graph g = generate_proxy_graph(1, 893);
    ModelConfig cfg = toy_model_config();
    cfg.vocab_size = g.node_count() + 2;
    auto params = init_params<float>(cfg, 3);

    DecodeConfig dcfg;
    dcfg.max_walk_length = g.node_count(); // simple paths cannot be longer

    double worst_tour = 0.0, worst_sp = 0.0;
    auto tours = gen_instances(g, TaskKind::TPSOD, 3, 91, 10, 10);
    for (const auto& spec : tours) {
        const auto t0 = std::chrono::steady_clock::now();
        Solution sol = decode_tour(params, g, spec, dcfg);
        worst_tour = std::max(worst_tour, seconds_since(t0));
        auto [good, why] = feasibility_check(g, spec, sol.walk);
        if (!good) worst_tour = 1e9;
    }
    auto sps = gen_instances(g, TaskKind::SP, 3, 92);
    for (const auto& spec : sps) {
        const auto t0 = std::chrono::steady_clock::now();
        Solution sol = decode_sp(params, g, spec, dcfg);
        (void)sol;
        worst_sp = std::max(worst_sp, seconds_since(t0));
    }

    const bool ok = worst_tour < 10.0 && worst_sp < 30.0;
    report(9, ok,
           "893-node proxy: worst decode_tour " + fmt("%.2f s", worst_tour) +
               ", worst decode_sp " + fmt("%.2f s", worst_sp));
    CHECK(ok);
}
