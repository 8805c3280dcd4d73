#ifndef GFM_TRAINER_HPP
#define GFM_TRAINER_HPP

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "gfm/curriculum.hpp"
#include "gfm/model.hpp"

namespace gfm {

struct NonFiniteGradientError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 32;
    int total_steps = 1000;
    std::map<int, double> level_weights; // level -> alpha; missing level => alpha = level
    int checkpoint_every = 0;            // 0 disables periodic checkpoints
    std::uint64_t rng_seed = 0;
    bool staged = false; // level-1-only warmup for the first third of steps

    double alpha(int level) const {
        auto it = level_weights.find(level);
        return it != level_weights.end() ? it->second : static_cast<double>(level);
    }

    void validate() const {
        if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: bad learning_rate");
        if (batch_size < 1 || total_steps < 0)
            throw std::invalid_argument("TrainConfig: bad batch/steps");
        double prev = 0.0;
        for (auto [lvl, a] : level_weights) {
            (void)lvl;
            if (!(a > 0.0) || a < prev)
                throw std::invalid_argument(
                    "TrainConfig: level weights must be positive and nondecreasing");
            prev = a;
        }
    }
};

// -log sum_{y in targets} softmax(logits)_y, in log-space.
template <typename S>
S multi_target_loss(const Eigen::Ref<const Vec<S>>& logits, const std::vector<int>& targets) {
    if (targets.empty()) throw std::invalid_argument("multi_target_loss: empty target set");
    const S mx = logits.maxCoeff();
    S z_all = 0;
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        z_all += std::exp(logits[i] - mx);
    S z_tgt = 0;
    for (int y : targets) {
        if (y < 0 || y >= logits.size())
            throw std::invalid_argument("multi_target_loss: target id out of range");
        z_tgt += std::exp(logits[y] - mx);
    }
    return std::log(z_all) - std::log(z_tgt);
}

// d(multi_target_loss)/d(logits)
template <typename S>
Vec<S> multi_target_loss_grad(const Eigen::Ref<const Vec<S>>& logits,
                              const std::vector<int>& targets) {
    const S mx = logits.maxCoeff();
    Vec<S> p = (logits.array() - mx).exp();
    const S z_all = p.sum();
    S z_tgt = 0;
    for (int y : targets) z_tgt += p[y];
    Vec<S> grad = p / z_all;
    for (int y : targets) grad[y] -= p[y] / z_tgt;
    return grad;
}

// One training example ready for the model.
struct TrainSample {
    TokenizedSample tok;
};

// (1/|B|) sum alpha_level(x) * multi_target_loss(x)
template <typename S>
S batch_loss(const std::vector<TokenizedSample>& samples, const Mat<S>& logits, int seq,
             const TrainConfig& cfg) {
    if (logits.rows() != static_cast<Eigen::Index>(samples.size()) * seq)
        throw std::invalid_argument("batch_loss: samples and logits misaligned");
    S total = 0;
    for (std::size_t b = 0; b < samples.size(); ++b) {
        Vec<S> row = logits.row(static_cast<Eigen::Index>(b) * seq + samples[b].mask_pos);
        total += static_cast<S>(cfg.alpha(samples[b].level)) *
                 multi_target_loss<S>(row, samples[b].targets);
    }
    return total / static_cast<S>(samples.size());
}

template <typename S>
struct TrainState {
    Parameters<S> params;
    Parameters<S> m; // Adam first moments
    Parameters<S> v; // Adam second moments
    std::int64_t step = 0;
};

template <typename S>
TrainState<S> make_train_state(const ModelConfig& cfg, std::uint64_t seed) {
    TrainState<S> st;
    st.params = init_params<S>(cfg, seed);
    st.m = zero_params<S>(cfg);
    st.v = zero_params<S>(cfg);
    return st;
}

// Standard Adam with bias correction. Aborts (throws) on non-finite
// gradients without touching the state.
template <typename S>
void adam_step(TrainState<S>& st, const Parameters<S>& grads, const TrainConfig& cfg) {
    visit_params(grads, [&](const char* name, const S* gdata, Eigen::Index n) {
        (void)name;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!std::isfinite(static_cast<double>(gdata[i])))
                throw NonFiniteGradientError(std::string("non-finite gradient in ") + name);
        (void)n;
    });

    const S b1 = static_cast<S>(cfg.beta1), b2 = static_cast<S>(cfg.beta2);
    const S lr = static_cast<S>(cfg.learning_rate), eps = static_cast<S>(cfg.eps);
    const std::int64_t step = st.step + 1;
    const S corr1 = S(1) - std::pow(b1, static_cast<S>(step));
    const S corr2 = S(1) - std::pow(b2, static_cast<S>(step));

    // walk the three structures in lockstep via raw pointers collected once
    std::vector<std::pair<S*, Eigen::Index>> pspans, mspans, vspans;
    std::vector<std::pair<const S*, Eigen::Index>> gspans;
    visit_params(st.params, [&](const char*, S* d, Eigen::Index n) { pspans.emplace_back(d, n); });
    visit_params(st.m, [&](const char*, S* d, Eigen::Index n) { mspans.emplace_back(d, n); });
    visit_params(st.v, [&](const char*, S* d, Eigen::Index n) { vspans.emplace_back(d, n); });
    visit_params(grads,
                 [&](const char*, const S* d, Eigen::Index n) { gspans.emplace_back(d, n); });
    for (std::size_t k = 0; k < pspans.size(); ++k) {
        S* w = pspans[k].first;
        S* mo = mspans[k].first;
        S* vo = vspans[k].first;
        const S* gr = gspans[k].first;
        const Eigen::Index n = pspans[k].second;
        for (Eigen::Index i = 0; i < n; ++i) {
            mo[i] = b1 * mo[i] + (S(1) - b1) * gr[i];
            vo[i] = b2 * vo[i] + (S(1) - b2) * gr[i] * gr[i];
            const S mhat = mo[i] / corr1;
            const S vhat = vo[i] / corr2;
            w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
    st.step = step;
}

struct TraceRow {
    std::int64_t step = 0;
    double loss = 0.0;
    std::string level_histogram; // "1:32;2:16"
};

inline std::string trace_to_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream out;
    out << "step,loss,level_histogram\n";
    for (const TraceRow& r : trace)
        out << r.step << ',' << r.loss << ',' << r.level_histogram << '\n';
    return out.str();
}

namespace detail {

// Assembles a padded batch, trimming the sequence to the batch's longest
// sample to keep the attention cost proportional to real content.
inline std::pair<TokenBatch, std::vector<TokenizedSample>> assemble_batch(
    const std::vector<CurriculumSample>& dataset, const std::vector<std::size_t>& indices,
    const Vocab& vocab, int max_seq_len) {
    int seq = 0;
    for (std::size_t idx : indices)
        seq = std::max(seq, static_cast<int>(dataset[idx].query.size()));
    seq = std::min(seq, max_seq_len);

    TokenBatch batch;
    batch.batch = static_cast<int>(indices.size());
    batch.seq = seq;
    std::vector<TokenizedSample> toks;
    toks.reserve(indices.size());
    for (std::size_t idx : indices) {
        TokenizedSample ts = tokenize(dataset[idx], vocab, seq);
        batch.tokens.insert(batch.tokens.end(), ts.tokens.begin(), ts.tokens.end());
        batch.valid_len.push_back(ts.valid_len);
        toks.push_back(std::move(ts));
    }
    return {std::move(batch), std::move(toks)};
}

} // namespace detail

template <typename S>
struct TrainResult {
    TrainState<S> state;
    std::vector<TraceRow> trace;
};

// Shuffled mini-batch optimization of the progressive objective. Fully
// deterministic given the config seeds. `checkpoint_dir` empty disables
// checkpoint emission.
template <typename S>
TrainResult<S> train(const std::vector<CurriculumSample>& dataset, const Vocab& vocab,
                     const ModelConfig& mcfg, const TrainConfig& tcfg,
                     const std::string& checkpoint_dir = "",
                     TrainState<S>* resume_from = nullptr) {
    mcfg.validate();
    tcfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");

    TrainResult<S> out;
    out.state = resume_from ? *resume_from : make_train_state<S>(mcfg, tcfg.rng_seed);

    std::vector<std::size_t> level1;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (dataset[i].level == 1) level1.push_back(i);
    const std::int64_t staged_until = tcfg.staged ? tcfg.total_steps / 3 : 0;

    for (std::int64_t step = out.state.step; step < tcfg.total_steps; ++step) {
        const bool stage1 = step < staged_until && !level1.empty();
        const std::size_t pool = stage1 ? level1.size() : dataset.size();

        // deterministic per-step sample draw (uniform with replacement)
        Rng rng(derive_seed(tcfg.rng_seed, 0x5a5a, static_cast<std::uint64_t>(step)));
        std::vector<std::size_t> indices(tcfg.batch_size);
        for (auto& idx : indices) {
            std::size_t k = rng.uniform_int(pool);
            idx = stage1 ? level1[k] : k;
        }

        auto [batch, toks] = detail::assemble_batch(dataset, indices, vocab, mcfg.max_seq_len);

        ForwardCache<S> cache;
        Rng drop_rng(derive_seed(tcfg.rng_seed, 0xd407, static_cast<std::uint64_t>(step)));
        Mat<S> logits = forward(out.state.params, batch,
                                &cache, mcfg.dropout > 0.0 ? &drop_rng : nullptr);

        const S loss = batch_loss(toks, logits, batch.seq, tcfg);
        if (!std::isfinite(static_cast<double>(loss)))
            throw NonFiniteGradientError("non-finite loss at step " + std::to_string(step));

        Mat<S> dlogits = Mat<S>::Zero(logits.rows(), logits.cols());
        for (std::size_t b = 0; b < toks.size(); ++b) {
            const Eigen::Index row = static_cast<Eigen::Index>(b) * batch.seq + toks[b].mask_pos;
            Vec<S> lrow = logits.row(row);
            dlogits.row(row) = multi_target_loss_grad<S>(lrow, toks[b].targets).transpose() *
                               static_cast<S>(tcfg.alpha(toks[b].level) / tcfg.batch_size);
        }

        Parameters<S> grads = backward(out.state.params, cache, dlogits);
        adam_step(out.state, grads, tcfg);

        std::map<int, int> hist;
        for (const auto& ts : toks) hist[ts.level]++;
        std::ostringstream hs;
        bool first = true;
        for (auto [lvl, cnt] : hist) {
            if (!first) hs << ';';
            hs << lvl << ':' << cnt;
            first = false;
        }
        out.trace.push_back({out.state.step, static_cast<double>(loss), hs.str()});

        if (tcfg.checkpoint_every > 0 && !checkpoint_dir.empty() &&
            out.state.step % tcfg.checkpoint_every == 0) {
            save_checkpoint(out.state.params,
                            checkpoint_dir + "/step_" + std::to_string(out.state.step) + ".gfm");
        }
    }
    return out;
}

// ============================================================================
// Resumable train-state file ("GFMT"): native scalar width so 64-bit runs
// resume bitwise; includes Adam moments and the step counter.
// ============================================================================

template <typename S>
void save_train_state(const TrainState<S>& st, const std::string& path) {
    std::string buf;
    buf.append("GFMT", 4);
    auto put_i64 = [&](std::int64_t v) {
        char b[8];
        std::memcpy(b, &v, 8);
        buf.append(b, 8);
    };
    put_i64(static_cast<std::int64_t>(sizeof(S)));
    put_i64(st.step);
    const ModelConfig& c = st.params.config;
    for (std::int32_t v : {c.layers, c.heads, c.embed_dim, c.ffn(), c.max_seq_len, c.vocab_size,
                           static_cast<std::int32_t>(std::lround(c.dropout * 1e6)), 0}) {
        char b[4];
        std::memcpy(b, &v, 4);
        buf.append(b, 4);
    }
    auto dump = [&](const Parameters<S>& p) {
        visit_params(p, [&](const char*, const S* data, Eigen::Index n) {
            buf.append(reinterpret_cast<const char*>(data), sizeof(S) * n);
        });
    };
    dump(st.params);
    dump(st.m);
    dump(st.v);
    std::uint64_t sum = fnv1a64(buf.data(), buf.size());
    char b8[8];
    std::memcpy(b8, &sum, 8);
    buf.append(b8, 8);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write train state: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

template <typename S>
TrainState<S> load_train_state(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open train state: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 + 16 + 32 + 8 || buf.compare(0, 4, "GFMT") != 0)
        throw ParseError("not a GFMT train state: " + path);
    std::uint64_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
    if (fnv1a64(buf.data(), buf.size() - 8) != stored)
        throw ParseError("train state checksum mismatch: " + path);

    std::size_t off = 4;
    auto get_i64 = [&]() {
        std::int64_t v;
        std::memcpy(&v, buf.data() + off, 8);
        off += 8;
        return v;
    };
    if (get_i64() != static_cast<std::int64_t>(sizeof(S)))
        throw ParseError("train state scalar width mismatch: " + path);
    std::int64_t step = get_i64();
    auto get_i32 = [&]() {
        std::int32_t v;
        std::memcpy(&v, buf.data() + off, 4);
        off += 4;
        return v;
    };
    ModelConfig cfg;
    cfg.layers = get_i32();
    cfg.heads = get_i32();
    cfg.embed_dim = get_i32();
    cfg.ffn_dim = get_i32();
    cfg.max_seq_len = get_i32();
    cfg.vocab_size = get_i32();
    cfg.dropout = get_i32() / 1e6;
    get_i32();

    TrainState<S> st;
    st.params = zero_params<S>(cfg);
    st.m = zero_params<S>(cfg);
    st.v = zero_params<S>(cfg);
    st.step = step;
    auto slurp = [&](Parameters<S>& p) {
        visit_params(p, [&](const char* name, S* data, Eigen::Index n) {
            if (off + sizeof(S) * n > buf.size() - 8)
                throw ParseError(std::string("train state truncated at ") + name);
            std::memcpy(data, buf.data() + off, sizeof(S) * n);
            off += sizeof(S) * n;
        });
    };
    slurp(st.params);
    slurp(st.m);
    slurp(st.v);
    if (off != buf.size() - 8) throw ParseError("train state has trailing bytes: " + path);
    return st;
}

} // namespace gfm

#endif // GFM_TRAINER_HPP
