#include "gfm/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gfm {

int CurriculumSample::mask_index() const {
    for (std::size_t i = 0; i < query.size(); ++i)
        if (query[i] == kMaskNode) return static_cast<int>(i);
    throw std::logic_error("CurriculumSample has no mask");
}

void CurriculumConfig::validate() const {
    if (l_min < 1 || l_max < l_min)
        throw std::invalid_argument("CurriculumConfig: need 1 <= L_min <= L_max");
    if (extra_mask_prob < 0.0 || extra_mask_prob > 1.0)
        throw std::invalid_argument("CurriculumConfig: extra_mask_prob out of [0,1]");
}

int level_count(int walk_length, const CurriculumConfig& cfg) {
    if (walk_length < 3) throw std::invalid_argument("level_count: walk too short");
    int log2t = static_cast<int>(std::floor(std::log2(static_cast<double>(walk_length))));
    return std::min(cfg.l_max, std::max(cfg.l_min, log2t));
}

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace

CurriculumSample build_level1(const Walk& walk) {
    const int t = static_cast<int>(walk.nodes.size());
    if (t < 3) throw std::invalid_argument("build_level1: walk too short");
    CurriculumSample s;
    s.query = {walk.nodes.front(), kMaskNode, walk.nodes.back()};
    s.targets = sorted_unique({walk.nodes.begin() + 1, walk.nodes.end() - 1});
    s.level = 1;
    return s;
}

std::vector<int> between(const Walk& walk, int pos_a, int pos_b) {
    const int t = static_cast<int>(walk.nodes.size());
    if (pos_a < 0 || pos_b <= pos_a || pos_b >= t)
        throw std::invalid_argument("between: bad positions");
    if (pos_b - pos_a <= 1) return {};
    return sorted_unique({walk.nodes.begin() + pos_a + 1, walk.nodes.begin() + pos_b});
}

std::vector<CurriculumSample> build_curriculum(const Walk& walk, const CurriculumConfig& cfg,
                                               Rng& rng) {
    cfg.validate();
    const int t = static_cast<int>(walk.nodes.size());
    if (t < 3) throw std::invalid_argument("build_curriculum: walk too short");

    std::vector<CurriculumSample> out;
    out.push_back(build_level1(walk));

    const int levels = level_count(t, cfg);
    std::vector<int> anchors = {0, t - 1}; // walk positions, always sorted

    auto make_gap_sample = [&](const std::vector<int>& c, std::size_t gap, int level)
        -> CurriculumSample {
        CurriculumSample s;
        s.level = level;
        for (std::size_t i = 0; i < c.size(); ++i) {
            s.query.push_back(walk.nodes[c[i]]);
            if (i == gap) s.query.push_back(kMaskNode);
        }
        s.targets = between(walk, c[gap], c[gap + 1]);
        return s;
    };

    for (int level = 2; level <= levels; ++level) {
        // pick the widest gap (leftmost on ties) and insert one anchor
        std::size_t best_gap = anchors.size();
        int best_width = 0;
        for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
            int width = anchors[i + 1] - anchors[i] - 1;
            if (width > best_width) {
                best_width = width;
                best_gap = i;
            }
        }
        if (best_gap == anchors.size()) break; // fully refined, nothing left to reveal

        int lo = anchors[best_gap], hi = anchors[best_gap + 1];
        int anchor_pos;
        if (cfg.random_anchor) {
            anchor_pos = lo + 1 + static_cast<int>(rng.uniform_int(hi - lo - 1));
        } else {
            anchor_pos = (lo + hi) / 2;
        }
        anchors.insert(anchors.begin() + best_gap + 1, anchor_pos);

        for (std::size_t gap = 0; gap + 1 < anchors.size(); ++gap) {
            if (anchors[gap + 1] - anchors[gap] <= 1) continue; // empty gap, skip
            out.push_back(make_gap_sample(anchors, gap, level));
        }

        // optional extra masking of one revealed interior anchor
        if (cfg.extra_mask_prob > 0.0 && rng.uniform() < cfg.extra_mask_prob &&
            anchors.size() > 2) {
            std::size_t pick = 1 + rng.uniform_int(anchors.size() - 2);
            CurriculumSample s;
            s.level = level;
            for (std::size_t i = 0; i < anchors.size(); ++i)
                s.query.push_back(i == pick ? kMaskNode : walk.nodes[anchors[i]]);
            s.targets = {walk.nodes[anchors[pick]]};
            out.push_back(std::move(s));
        }
    }
    return out;
}

TokenizedSample tokenize(const CurriculumSample& sample, const Vocab& vocab, int max_len) {
    TokenizedSample ts;
    ts.level = sample.level;
    ts.valid_len = static_cast<int>(sample.query.size());
    if (ts.valid_len > max_len)
        throw std::invalid_argument("tokenize: query longer than max_len");
    for (int id : sample.query) {
        if (id == kMaskNode) {
            ts.mask_pos = static_cast<int>(ts.tokens.size());
            ts.tokens.push_back(vocab.mask_token());
        } else {
            if (id < 0 || id >= vocab.node_count)
                throw std::invalid_argument("tokenize: node id out of vocab");
            ts.tokens.push_back(id);
        }
    }
    for (int id : sample.targets) {
        if (id < 0 || id >= vocab.node_count)
            throw std::invalid_argument("tokenize: target id out of vocab");
    }
    ts.targets = sample.targets;
    ts.tokens.resize(max_len, vocab.pad_token());
    return ts;
}

CurriculumSample detokenize(const TokenizedSample& ts, const Vocab& vocab) {
    CurriculumSample s;
    s.level = ts.level;
    s.targets = ts.targets;
    for (int tok : ts.tokens) {
        if (tok == vocab.pad_token()) break;
        s.query.push_back(tok == vocab.mask_token() ? kMaskNode : tok);
    }
    return s;
}

std::string dataset_to_text(const std::vector<CurriculumSample>& samples, const Vocab& vocab,
                            const CurriculumConfig& cfg, std::uint64_t corpus_hash) {
    std::ostringstream out;
    out << "# gfm curriculum dataset\n";
    out << "# corpus_hash " << corpus_hash << '\n';
    out << "# L_min " << cfg.l_min << " L_max " << cfg.l_max << " extra_mask_prob "
        << cfg.extra_mask_prob << " random_anchor " << (cfg.random_anchor ? 1 : 0) << '\n';
    for (const CurriculumSample& s : samples) {
        out << s.level << " |";
        for (int id : s.query) out << ' ' << (id == kMaskNode ? vocab.mask_token() : id);
        out << " | " << s.mask_index() << " |";
        for (int id : s.targets) out << ' ' << id;
        out << '\n';
    }
    return out.str();
}

std::vector<CurriculumSample> dataset_from_text(const std::string& text, const Vocab& vocab) {
    std::vector<CurriculumSample> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            auto bar = line.find('|', start);
            fields.push_back(line.substr(start, bar == std::string::npos ? bar : bar - start));
            if (bar == std::string::npos) break;
            start = bar + 1;
        }
        if (fields.size() != 4)
            throw ParseError("dataset parse error at line " + std::to_string(lineno));

        auto ints = [](const std::string& f) {
            std::vector<int> v;
            std::istringstream iss(f);
            int x;
            while (iss >> x) v.push_back(x);
            return v;
        };
        auto level_f = ints(fields[0]);
        auto query_f = ints(fields[1]);
        auto mask_f = ints(fields[2]);
        auto targets_f = ints(fields[3]);
        if (level_f.size() != 1 || mask_f.size() != 1 || query_f.empty() || targets_f.empty())
            throw ParseError("dataset parse error at line " + std::to_string(lineno));

        CurriculumSample s;
        s.level = level_f[0];
        for (int tok : query_f) s.query.push_back(tok == vocab.mask_token() ? kMaskNode : tok);
        s.targets = targets_f;
        if (s.mask_index() != mask_f[0])
            throw ParseError("dataset mask position mismatch at line " + std::to_string(lineno));
        out.push_back(std::move(s));
    }
    return out;
}

void save_dataset_file(const std::vector<CurriculumSample>& samples, const Vocab& vocab,
                       const CurriculumConfig& cfg, std::uint64_t corpus_hash,
                       const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write dataset file: " + path);
    out << dataset_to_text(samples, vocab, cfg, corpus_hash);
}

std::vector<CurriculumSample> load_dataset_file(const std::string& path, const Vocab& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open dataset file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return dataset_from_text(ss.str(), vocab);
}

std::vector<CurriculumSample> build_dataset(const std::vector<Walk>& corpus,
                                            const CurriculumConfig& cfg, std::uint64_t rng_seed) {
    std::vector<CurriculumSample> out;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        Rng rng(derive_seed(rng_seed, i));
        auto samples = build_curriculum(corpus[i], cfg, rng);
        out.insert(out.end(), std::make_move_iterator(samples.begin()),
                   std::make_move_iterator(samples.end()));
    }
    return out;
}

} // namespace gfm
