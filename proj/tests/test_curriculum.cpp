#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "gfm/curriculum.hpp"

using namespace gfm;

TEST_CASE("level_count formula") {
    CurriculumConfig cfg;
    cfg.l_min = 2;
    cfg.l_max = 6;
    CHECK(level_count(16, cfg) == 4);
    CHECK(level_count(3, cfg) == 2); // floor(log2 3)=1 clamped up

    CurriculumConfig narrow;
    narrow.l_min = 1;
    narrow.l_max = 2;
    CHECK(level_count(10, narrow) == 2); // floor(log2 10)=3 clamped down

    CHECK_THROWS(level_count(2, cfg));
}

TEST_CASE("build_level1 structure") {
    Walk w{{3, 7, 1, 9, 4}};
    CurriculumSample s = build_level1(w);
    CHECK(s.query == std::vector<int>{3, kMaskNode, 4});
    CHECK(s.targets == std::vector<int>{1, 7, 9});
    CHECK(s.level == 1);
    CHECK(s.mask_index() == 1);

    Walk minimal{{0, 5, 0}};
    CurriculumSample m = build_level1(minimal);
    CHECK(m.query == std::vector<int>{0, kMaskNode, 0});
    CHECK(m.targets == std::vector<int>{5});

    // repeated interior nodes deduplicate
    Walk rep{{0, 2, 5, 2, 9}};
    CHECK(build_level1(rep).targets == std::vector<int>{2, 5});

    CHECK_THROWS(build_level1(Walk{{0, 1}}));
}

TEST_CASE("between slices by position") {
    Walk w{{0, 5, 2, 8, 6, 1}};
    CHECK(between(w, 0, 3) == std::vector<int>{2, 5});
    CHECK(between(w, 2, 3).empty());
    CHECK(between(w, 0, 5) == std::vector<int>{2, 5, 6, 8});
    CHECK_THROWS(between(w, 3, 3));
    CHECK_THROWS(between(w, 0, 6));
}

TEST_CASE("build_curriculum hand trace on a length-5 walk") {
    // anchors {0,4}; level 2 inserts position 2; gaps (0,2) and (2,4) both
    // nonempty -> level-1 sample plus two level-2 samples
    Walk w{{10, 11, 12, 13, 14}};
    CurriculumConfig cfg;
    Rng rng(1);
    auto samples = build_curriculum(w, cfg, rng);
    REQUIRE(samples.size() == 3);
    CHECK(samples[0].level == 1);
    CHECK(samples[1].level == 2);
    CHECK(samples[1].query == std::vector<int>{10, kMaskNode, 12, 14});
    CHECK(samples[1].targets == std::vector<int>{11});
    CHECK(samples[2].query == std::vector<int>{10, 12, kMaskNode, 14});
    CHECK(samples[2].targets == std::vector<int>{13});
}

TEST_CASE("build_curriculum invariants over random walks") {
    Graph g = generate_simulation_graph(42, 20);
    WalkConfig wcfg;
    wcfg.walk_length = 10;
    wcfg.walks_per_node = 10;
    auto corpus = generate_corpus(g, wcfg);

    CurriculumConfig cfg;
    for (std::size_t wi = 0; wi < corpus.size(); ++wi) {
        const Walk& w = corpus[wi];
        Rng rng(derive_seed(99, wi));
        auto samples = build_curriculum(w, cfg, rng);
        std::set<int> interior(w.nodes.begin() + 1, w.nodes.end() - 1);
        REQUIRE(!samples.empty());
        CHECK(samples[0].level == 1);
        for (const auto& s : samples) {
            CHECK(!s.targets.empty());
            // exactly one mask
            CHECK(std::count(s.query.begin(), s.query.end(), kMaskNode) == 1);
            // endpoints present
            CHECK(s.query.front() == w.nodes.front());
            CHECK(s.query.back() == w.nodes.back());
            // targets within interior nodes
            for (int y : s.targets) CHECK(interior.count(y) == 1);
        }

        // per-level cover: gap targets + anchors + endpoints contain all walk nodes
        int max_level = samples.back().level;
        std::set<int> cover;
        for (const auto& s : samples)
            if (s.level == max_level || s.level == 1)
                for (int y : s.targets) cover.insert(y);
        for (const auto& s : samples)
            if (s.level == max_level)
                for (int id : s.query)
                    if (id != kMaskNode) cover.insert(id);
        for (int v : w.nodes) CHECK(cover.count(v) == 1);
    }
}

TEST_CASE("build_curriculum is deterministic given rng state") {
    Walk w{{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
    CurriculumConfig cfg;
    cfg.random_anchor = true;
    cfg.extra_mask_prob = 0.5;
    Rng r1(5), r2(5);
    auto a = build_curriculum(w, cfg, r1);
    auto b = build_curriculum(w, cfg, r2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].query == b[i].query);
        CHECK(a[i].targets == b[i].targets);
        CHECK(a[i].level == b[i].level);
    }
}

TEST_CASE("tokenize maps to the vocab and pads") {
    Vocab vocab{20};
    CurriculumSample s;
    s.query = {3, kMaskNode, 4};
    s.targets = {7, 9};
    s.level = 1;
    TokenizedSample ts = tokenize(s, vocab, 5);
    CHECK(ts.tokens == std::vector<int>{3, 20, 4, 21, 21});
    CHECK(ts.mask_pos == 1);
    CHECK(ts.valid_len == 3);

    // no padding when already at max length
    TokenizedSample exact = tokenize(s, vocab, 3);
    CHECK(exact.tokens == std::vector<int>{3, 20, 4});

    // out-of-vocab
    CurriculumSample bad = s;
    bad.query[0] = 25;
    CHECK_THROWS(tokenize(bad, vocab, 5));

    // round trip
    CurriculumSample back = detokenize(ts, vocab);
    CHECK(back.query == s.query);
    CHECK(back.targets == s.targets);
}

TEST_CASE("dataset text round-trips") {
    Graph g = generate_simulation_graph(42, 20);
    WalkConfig wcfg;
    wcfg.walk_length = 10;
    wcfg.walks_per_node = 3;
    auto corpus = generate_corpus(g, wcfg);
    CurriculumConfig cfg;
    auto samples = build_dataset(corpus, cfg, 7);
    Vocab vocab{20};
    std::string text = dataset_to_text(samples, vocab, cfg, 123);
    auto parsed = dataset_from_text(text, vocab);
    REQUIRE(parsed.size() == samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(parsed[i].query == samples[i].query);
        CHECK(parsed[i].targets == samples[i].targets);
        CHECK(parsed[i].level == samples[i].level);
    }
}
