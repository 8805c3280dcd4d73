#ifndef GFM_CURRICULUM_HPP
#define GFM_CURRICULUM_HPP

#include <string>
#include <vector>

#include "gfm/common.hpp"
#include "gfm/walker.hpp"

namespace gfm {

// Placeholder for the MASK slot inside an untokenized query.
inline constexpr int kMaskNode = -1;

struct CurriculumSample {
    std::vector<int> query; // node ids with exactly one kMaskNode entry
    std::vector<int> targets; // admissible node ids at the mask, sorted unique
    int level = 1;

    int mask_index() const;
};

struct CurriculumConfig {
    int l_min = 2;
    int l_max = 6;
    double extra_mask_prob = 0.0;
    // anchors default to the gap midpoint; true samples uniformly in the gap
    bool random_anchor = false;

    void validate() const;
};

// min(L_max, max(L_min, floor(log2 T)))
int level_count(int walk_length, const CurriculumConfig& cfg);

CurriculumSample build_level1(const Walk& walk);

// Node ids at walk positions strictly between pos_a and pos_b, sorted unique.
std::vector<int> between(const Walk& walk, int pos_a, int pos_b);

// Progressive refinement: starts from the level-1 sample, then per level
// inserts one anchor into the widest gap (leftmost tie-break) and emits one
// sample per nonempty gap. Deterministic given the rng state.
std::vector<CurriculumSample> build_curriculum(const Walk& walk, const CurriculumConfig& cfg,
                                               Rng& rng);

// Token ids: node i -> i, MASK -> N, PAD -> N+1.
struct Vocab {
    int node_count = 0;
    int mask_token() const { return node_count; }
    int pad_token() const { return node_count + 1; }
    int size() const { return node_count + 2; }
};

struct TokenizedSample {
    std::vector<int> tokens; // right-padded to max_len
    int mask_pos = 0;
    std::vector<int> targets; // node ids (== token ids)
    int level = 1;
    int valid_len = 0; // tokens before padding
};

TokenizedSample tokenize(const CurriculumSample& sample, const Vocab& vocab, int max_len);
CurriculumSample detokenize(const TokenizedSample& ts, const Vocab& vocab);

// Shard file: '#' header (config + corpus hash), then one sample per line:
//   level | query tokens (node ids, MASK as N) | mask_pos | targets
std::string dataset_to_text(const std::vector<CurriculumSample>& samples, const Vocab& vocab,
                            const CurriculumConfig& cfg, std::uint64_t corpus_hash);
std::vector<CurriculumSample> dataset_from_text(const std::string& text, const Vocab& vocab);
void save_dataset_file(const std::vector<CurriculumSample>& samples, const Vocab& vocab,
                       const CurriculumConfig& cfg, std::uint64_t corpus_hash,
                       const std::string& path);
std::vector<CurriculumSample> load_dataset_file(const std::string& path, const Vocab& vocab);

// Dataset for a whole corpus; per-walk rng streams derived from rng_seed.
std::vector<CurriculumSample> build_dataset(const std::vector<Walk>& corpus,
                                            const CurriculumConfig& cfg, std::uint64_t rng_seed);

} // namespace gfm

#endif // GFM_CURRICULUM_HPP
