#ifndef GFM_MODEL_HPP
#define GFM_MODEL_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gfm/common.hpp"

namespace gfm {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct ModelConfig {
    int layers = 6;
    int heads = 6;
    int embed_dim = 192;
    int ffn_dim = -1; // -1 means 4 * embed_dim
    int max_seq_len = 12;
    int vocab_size = 0; // nodes + MASK + PAD
    double dropout = 0.0;

    int ffn() const { return ffn_dim < 0 ? 4 * embed_dim : ffn_dim; }
    int head_dim() const { return embed_dim / heads; }

    void validate() const {
        if (layers < 0 || heads < 1 || embed_dim < 1 || max_seq_len < 1)
            throw std::invalid_argument("ModelConfig: bad dimensions");
        if (embed_dim % heads != 0)
            throw std::invalid_argument("ModelConfig: embed_dim must be divisible by heads");
        if (vocab_size < 3) throw std::invalid_argument("ModelConfig: vocab_size must be >= 3");
        if (dropout < 0.0 || dropout >= 1.0)
            throw std::invalid_argument("ModelConfig: dropout out of [0,1)");
    }
};

template <typename S>
struct LayerParams {
    Mat<S> wq, wk, wv, wo; // d x d, heads fused column-wise
    Vec<S> ln1_g, ln1_b, ln2_g, ln2_b;
    Mat<S> w1; // d x ffn
    Vec<S> b1;
    Mat<S> w2; // ffn x d
    Vec<S> b2;
};

template <typename S>
struct Parameters {
    ModelConfig config;
    Mat<S> tok_emb; // vocab x d
    Mat<S> pos_emb; // max_seq_len x d
    std::vector<LayerParams<S>> layers;
    Vec<S> lnf_g, lnf_b;
    Mat<S> head; // d x vocab, untied, no bias
};

// Visits every parameter tensor in checkpoint declaration order.
// f(name, data_ptr, element_count)
template <typename S, typename F>
void visit_params(Parameters<S>& p, F&& f) {
    f("tok_emb", p.tok_emb.data(), p.tok_emb.size());
    f("pos_emb", p.pos_emb.data(), p.pos_emb.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& lay = p.layers[l];
        std::string pre = "layer" + std::to_string(l) + ".";
        f((pre + "ln1_g").c_str(), lay.ln1_g.data(), lay.ln1_g.size());
        f((pre + "ln1_b").c_str(), lay.ln1_b.data(), lay.ln1_b.size());
        f((pre + "wq").c_str(), lay.wq.data(), lay.wq.size());
        f((pre + "wk").c_str(), lay.wk.data(), lay.wk.size());
        f((pre + "wv").c_str(), lay.wv.data(), lay.wv.size());
        f((pre + "wo").c_str(), lay.wo.data(), lay.wo.size());
        f((pre + "ln2_g").c_str(), lay.ln2_g.data(), lay.ln2_g.size());
        f((pre + "ln2_b").c_str(), lay.ln2_b.data(), lay.ln2_b.size());
        f((pre + "w1").c_str(), lay.w1.data(), lay.w1.size());
        f((pre + "b1").c_str(), lay.b1.data(), lay.b1.size());
        f((pre + "w2").c_str(), lay.w2.data(), lay.w2.size());
        f((pre + "b2").c_str(), lay.b2.data(), lay.b2.size());
    }
    f("lnf_g", p.lnf_g.data(), p.lnf_g.size());
    f("lnf_b", p.lnf_b.data(), p.lnf_b.size());
    f("head", p.head.data(), p.head.size());
}

template <typename S, typename F>
void visit_params(const Parameters<S>& p, F&& f) {
    visit_params(const_cast<Parameters<S>&>(p),
                 [&](const char* name, S* data, Eigen::Index n) {
                     f(name, static_cast<const S*>(data), n);
                 });
}

template <typename S>
Parameters<S> zero_params(const ModelConfig& cfg) {
    cfg.validate();
    const int d = cfg.embed_dim, ff = cfg.ffn();
    Parameters<S> p;
    p.config = cfg;
    p.tok_emb = Mat<S>::Zero(cfg.vocab_size, d);
    p.pos_emb = Mat<S>::Zero(cfg.max_seq_len, d);
    p.layers.resize(cfg.layers);
    for (auto& lay : p.layers) {
        lay.wq = Mat<S>::Zero(d, d);
        lay.wk = Mat<S>::Zero(d, d);
        lay.wv = Mat<S>::Zero(d, d);
        lay.wo = Mat<S>::Zero(d, d);
        lay.ln1_g = Vec<S>::Zero(d);
        lay.ln1_b = Vec<S>::Zero(d);
        lay.ln2_g = Vec<S>::Zero(d);
        lay.ln2_b = Vec<S>::Zero(d);
        lay.w1 = Mat<S>::Zero(d, ff);
        lay.b1 = Vec<S>::Zero(ff);
        lay.w2 = Mat<S>::Zero(ff, d);
        lay.b2 = Vec<S>::Zero(d);
    }
    p.lnf_g = Vec<S>::Zero(d);
    p.lnf_b = Vec<S>::Zero(d);
    p.head = Mat<S>::Zero(d, cfg.vocab_size);
    return p;
}

template <typename S>
Parameters<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    Parameters<S> p = zero_params<S>(cfg);
    Rng rng(seed);
    auto fill_normal = [&](Mat<S>& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = static_cast<S>(0.02 * rng.normal());
    };
    fill_normal(p.tok_emb);
    fill_normal(p.pos_emb);
    for (auto& lay : p.layers) {
        fill_normal(lay.wq);
        fill_normal(lay.wk);
        fill_normal(lay.wv);
        fill_normal(lay.wo);
        lay.ln1_g.setOnes();
        lay.ln2_g.setOnes();
        fill_normal(lay.w1);
        fill_normal(lay.w2);
    }
    p.lnf_g.setOnes();
    fill_normal(p.head);
    return p;
}

inline std::int64_t count_params(const ModelConfig& cfg) {
    cfg.validate();
    const std::int64_t d = cfg.embed_dim, ff = cfg.ffn(), v = cfg.vocab_size;
    std::int64_t per_layer = 4 * d * d         // attention projections
                             + 4 * d           // two layer norms
                             + d * ff + ff     // ffn in
                             + ff * d + d;     // ffn out
    return v * d + cfg.max_seq_len * d + cfg.layers * per_layer + 2 * d + d * v;
}

// ============================================================================
// Forward / backward
// ============================================================================

struct TokenBatch {
    int batch = 0;
    int seq = 0;
    std::vector<int> tokens;    // batch * seq, row-major
    std::vector<int> valid_len; // per sample
};

namespace detail {

template <typename S>
S gelu(S x) {
    return S(0.5) * x * (S(1) + std::erf(x * S(M_SQRT1_2)));
}

template <typename S>
S gelu_grad(S x) {
    const S cdf = S(0.5) * (S(1) + std::erf(x * S(M_SQRT1_2)));
    const S pdf = std::exp(S(-0.5) * x * x) * S(0.3989422804014327);
    return cdf + x * pdf;
}

// row-wise layer norm; stores mean and reciprocal std per row
template <typename S>
void layer_norm(const Mat<S>& x, const Vec<S>& g, const Vec<S>& b, Mat<S>& out, Vec<S>& mean,
                Vec<S>& rstd) {
    const S eps = S(1e-5);
    const Eigen::Index rows = x.rows(), cols = x.cols();
    out.resize(rows, cols);
    mean.resize(rows);
    rstd.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        S mu = x.row(r).mean();
        S var = (x.row(r).array() - mu).square().mean();
        S rs = S(1) / std::sqrt(var + eps);
        mean[r] = mu;
        rstd[r] = rs;
        out.row(r) = (((x.row(r).array() - mu) * rs) * g.transpose().array()).matrix() +
                     b.transpose();
    }
}

template <typename S>
void layer_norm_backward(const Mat<S>& x, const Vec<S>& g, const Vec<S>& mean, const Vec<S>& rstd,
                         const Mat<S>& dout, Mat<S>& dx, Vec<S>& dg, Vec<S>& db) {
    const Eigen::Index rows = x.rows(), cols = x.cols();
    dx.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        Eigen::Array<S, 1, Eigen::Dynamic> xhat =
            (x.row(r).array() - mean[r]) * rstd[r];
        Eigen::Array<S, 1, Eigen::Dynamic> dy = dout.row(r).array() * g.transpose().array();
        S m1 = dy.mean();
        S m2 = (dy * xhat).mean();
        dx.row(r) = (rstd[r] * (dy - m1 - xhat * m2)).matrix();
        dg.array() += (dout.row(r).array() * xhat).transpose();
        db.array() += dout.row(r).array().transpose();
    }
    (void)cols;
}

// softmax over a row that may be entirely masked (-inf): yields zeros
template <typename S>
void safe_softmax_rows(Mat<S>& scores) {
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        S mx = scores.row(r).maxCoeff();
        if (!std::isfinite(static_cast<double>(mx))) {
            scores.row(r).setZero();
            continue;
        }
        scores.row(r) = (scores.row(r).array() - mx).exp();
        S z = scores.row(r).sum();
        scores.row(r) /= z;
    }
}

} // namespace detail

template <typename S>
struct LayerCache {
    Mat<S> x_in;      // block input
    Mat<S> xn1;       // LN1 output
    Vec<S> mu1, rs1;
    Mat<S> q, k, v;   // projections
    std::vector<Mat<S>> attn; // per (sample, head): T x T weights
    Mat<S> ctx;       // concatenated head outputs
    Mat<S> attn_drop; // dropout mask (scaled), empty when dropout off
    Mat<S> x_mid;     // after attention residual
    Mat<S> xn2;
    Vec<S> mu2, rs2;
    Mat<S> h_pre;     // ffn pre-activation
    Mat<S> h_act;     // ffn post-gelu
    Mat<S> ffn_drop;
};

template <typename S>
struct ForwardCache {
    TokenBatch batch;
    Mat<S> x0; // embeddings sum
    std::vector<LayerCache<S>> layers;
    Mat<S> x_final; // pre final-LN
    Mat<S> xnf;     // final LN output
    Vec<S> muf, rsf;
};

// Returns logits as a (batch*seq) x vocab matrix. Pass `cache` to enable a
// later backward() call and `dropout_rng` to enable dropout (training mode);
// with dropout_rng null the forward is deterministic eval.
template <typename S>
Mat<S> forward(const Parameters<S>& p, const TokenBatch& batch, ForwardCache<S>* cache = nullptr,
               Rng* dropout_rng = nullptr) {
    const ModelConfig& cfg = p.config;
    const int bsz = batch.batch, t = batch.seq, d = cfg.embed_dim;
    const int heads = cfg.heads, dh = cfg.head_dim();
    if (t > cfg.max_seq_len) throw std::invalid_argument("forward: sequence exceeds max_seq_len");
    if (static_cast<int>(batch.tokens.size()) != bsz * t ||
        static_cast<int>(batch.valid_len.size()) != bsz)
        throw std::invalid_argument("forward: batch shape mismatch");
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));
    const bool use_dropout = dropout_rng != nullptr && cfg.dropout > 0.0;
    const S keep = S(1.0 - cfg.dropout);

    Mat<S> x(bsz * t, d);
    for (int b = 0; b < bsz; ++b) {
        for (int i = 0; i < t; ++i) {
            int tok = batch.tokens[b * t + i];
            if (tok < 0 || tok >= cfg.vocab_size)
                throw std::invalid_argument("forward: token id out of range");
            x.row(b * t + i) = p.tok_emb.row(tok) + p.pos_emb.row(i);
        }
    }

    if (cache) {
        cache->batch = batch;
        cache->x0 = x;
        cache->layers.assign(cfg.layers, {});
    }

    auto dropout_mask = [&](Eigen::Index rows, Eigen::Index cols) {
        Mat<S> m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = dropout_rng->uniform() < cfg.dropout ? S(0) : S(1) / keep;
        return m;
    };

    Mat<S> xn, q, k, v, ctx, h_pre, h_act;
    Vec<S> mu, rs;
    for (int l = 0; l < cfg.layers; ++l) {
        const LayerParams<S>& lay = p.layers[l];
        LayerCache<S>* lc = cache ? &cache->layers[l] : nullptr;
        if (lc) lc->x_in = x;

        detail::layer_norm(x, lay.ln1_g, lay.ln1_b, xn, mu, rs);
        if (lc) {
            lc->xn1 = xn;
            lc->mu1 = mu;
            lc->rs1 = rs;
        }

        q.noalias() = xn * lay.wq;
        k.noalias() = xn * lay.wk;
        v.noalias() = xn * lay.wv;
        ctx.resize(bsz * t, d);
        if (lc) {
            lc->q = q;
            lc->k = k;
            lc->v = v;
            lc->attn.assign(static_cast<std::size_t>(bsz) * heads, {});
        }
        for (int b = 0; b < bsz; ++b) {
            const int vl = batch.valid_len[b];
            for (int m = 0; m < heads; ++m) {
                auto qb = q.block(b * t, m * dh, t, dh);
                auto kb = k.block(b * t, m * dh, t, dh);
                auto vb = v.block(b * t, m * dh, t, dh);
                Mat<S> scores = qb * kb.transpose() * inv_sqrt_dh;
                if (vl < t)
                    scores.rightCols(t - vl).setConstant(-std::numeric_limits<S>::infinity());
                detail::safe_softmax_rows(scores);
                ctx.block(b * t, m * dh, t, dh).noalias() = scores * vb;
                if (lc) lc->attn[static_cast<std::size_t>(b) * heads + m] = std::move(scores);
            }
        }
        if (lc) lc->ctx = ctx;

        Mat<S> attn_out = ctx * lay.wo;
        if (use_dropout) {
            Mat<S> mask = dropout_mask(attn_out.rows(), attn_out.cols());
            attn_out.array() *= mask.array();
            if (lc) lc->attn_drop = std::move(mask);
        }
        x += attn_out;
        if (lc) lc->x_mid = x;

        detail::layer_norm(x, lay.ln2_g, lay.ln2_b, xn, mu, rs);
        if (lc) {
            lc->xn2 = xn;
            lc->mu2 = mu;
            lc->rs2 = rs;
        }
        h_pre.noalias() = xn * lay.w1;
        h_pre.rowwise() += lay.b1.transpose();
        h_act = h_pre.unaryExpr([](S xv) { return detail::gelu(xv); });
        if (lc) {
            lc->h_pre = h_pre;
            lc->h_act = h_act;
        }
        Mat<S> ffn_out = h_act * lay.w2;
        ffn_out.rowwise() += lay.b2.transpose();
        if (use_dropout) {
            Mat<S> mask = dropout_mask(ffn_out.rows(), ffn_out.cols());
            ffn_out.array() *= mask.array();
            if (lc) lc->ffn_drop = std::move(mask);
        }
        x += ffn_out;
    }

    if (cache) cache->x_final = x;
    detail::layer_norm(x, p.lnf_g, p.lnf_b, xn, mu, rs);
    if (cache) {
        cache->xnf = xn;
        cache->muf = mu;
        cache->rsf = rs;
    }
    Mat<S> logits;
    logits.noalias() = xn * p.head;
    return logits;
}

// Analytic gradients of a scalar loss with adjoint `dlogits` with respect to
// every parameter. Requires the cache produced by forward().
template <typename S>
Parameters<S> backward(const Parameters<S>& p, const ForwardCache<S>& cache,
                       const Mat<S>& dlogits) {
    const ModelConfig& cfg = p.config;
    const TokenBatch& batch = cache.batch;
    const int bsz = batch.batch, t = batch.seq, d = cfg.embed_dim;
    const int heads = cfg.heads, dh = cfg.head_dim();
    if (cache.layers.size() != static_cast<std::size_t>(cfg.layers) || cache.x0.rows() != bsz * t)
        throw std::invalid_argument("backward: missing or mismatched forward activations");
    if (dlogits.rows() != bsz * t || dlogits.cols() != cfg.vocab_size)
        throw std::invalid_argument("backward: dlogits shape mismatch");
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));

    Parameters<S> g = zero_params<S>(cfg);

    // head and final LN
    g.head.noalias() = cache.xnf.transpose() * dlogits;
    Mat<S> dxn = dlogits * p.head.transpose();
    Mat<S> dx;
    detail::layer_norm_backward(cache.x_final, p.lnf_g, cache.muf, cache.rsf, dxn, dx, g.lnf_g,
                                g.lnf_b);

    Mat<S> dxn2, dh_act, dh_pre, dctx, dq, dk, dv, dxn1;
    for (int l = cfg.layers - 1; l >= 0; --l) {
        const LayerParams<S>& lay = p.layers[l];
        const LayerCache<S>& lc = cache.layers[l];
        LayerParams<S>& gl = g.layers[l];

        // FFN branch
        Mat<S> dffn_out = dx;
        if (lc.ffn_drop.size()) dffn_out.array() *= lc.ffn_drop.array();
        gl.b2 = dffn_out.colwise().sum().transpose();
        gl.w2.noalias() = lc.h_act.transpose() * dffn_out;
        dh_act.noalias() = dffn_out * lay.w2.transpose();
        dh_pre = dh_act.array() *
                 lc.h_pre.unaryExpr([](S xv) { return detail::gelu_grad(xv); }).array();
        gl.b1 = dh_pre.colwise().sum().transpose();
        gl.w1.noalias() = lc.xn2.transpose() * dh_pre;
        dxn2.noalias() = dh_pre * lay.w1.transpose();
        Mat<S> dx_mid;
        detail::layer_norm_backward(lc.x_mid, lay.ln2_g, lc.mu2, lc.rs2, dxn2, dx_mid, gl.ln2_g,
                                    gl.ln2_b);
        dx += dx_mid; // residual

        // attention branch
        Mat<S> dattn_out = dx;
        if (lc.attn_drop.size()) dattn_out.array() *= lc.attn_drop.array();
        gl.wo.noalias() = lc.ctx.transpose() * dattn_out;
        dctx.noalias() = dattn_out * lay.wo.transpose();

        dq = Mat<S>::Zero(bsz * t, d);
        dk = Mat<S>::Zero(bsz * t, d);
        dv = Mat<S>::Zero(bsz * t, d);
        for (int b = 0; b < bsz; ++b) {
            for (int m = 0; m < heads; ++m) {
                const Mat<S>& a = lc.attn[static_cast<std::size_t>(b) * heads + m];
                auto qb = lc.q.block(b * t, m * dh, t, dh);
                auto kb = lc.k.block(b * t, m * dh, t, dh);
                auto vb = lc.v.block(b * t, m * dh, t, dh);
                auto dcb = dctx.block(b * t, m * dh, t, dh);
                Mat<S> da = dcb * vb.transpose();
                dv.block(b * t, m * dh, t, dh).noalias() = a.transpose() * dcb;
                // softmax backward per row
                Mat<S> ds(t, t);
                for (int r = 0; r < t; ++r) {
                    S dot = a.row(r).dot(da.row(r));
                    ds.row(r) = a.row(r).array() * (da.row(r).array() - dot);
                }
                dq.block(b * t, m * dh, t, dh).noalias() = ds * kb * inv_sqrt_dh;
                dk.block(b * t, m * dh, t, dh).noalias() = ds.transpose() * qb * inv_sqrt_dh;
            }
        }
        gl.wq.noalias() = lc.xn1.transpose() * dq;
        gl.wk.noalias() = lc.xn1.transpose() * dk;
        gl.wv.noalias() = lc.xn1.transpose() * dv;
        dxn1.noalias() = dq * lay.wq.transpose();
        dxn1.noalias() += dk * lay.wk.transpose();
        dxn1.noalias() += dv * lay.wv.transpose();
        Mat<S> dx_in;
        detail::layer_norm_backward(lc.x_in, lay.ln1_g, lc.mu1, lc.rs1, dxn1, dx_in, gl.ln1_g,
                                    gl.ln1_b);
        dx += dx_in;
    }

    // embeddings
    for (int b = 0; b < bsz; ++b) {
        for (int i = 0; i < t; ++i) {
            int tok = batch.tokens[b * t + i];
            g.tok_emb.row(tok) += dx.row(b * t + i);
            g.pos_emb.row(i) += dx.row(b * t + i);
        }
    }
    return g;
}

// ============================================================================
// Checkpoint format: magic "GFM1", config as little-endian int32s, parameter
// arrays in declaration order as little-endian float32, trailing FNV-1a64
// checksum over everything before it.
// ============================================================================

template <typename S>
void save_checkpoint(const Parameters<S>& p, const std::string& path) {
    std::string buf;
    buf.append("GFM1", 4);
    auto put_i32 = [&](std::int32_t v) {
        char b[4];
        std::memcpy(b, &v, 4);
        buf.append(b, 4);
    };
    const ModelConfig& c = p.config;
    put_i32(c.layers);
    put_i32(c.heads);
    put_i32(c.embed_dim);
    put_i32(c.ffn());
    put_i32(c.max_seq_len);
    put_i32(c.vocab_size);
    put_i32(static_cast<std::int32_t>(std::lround(c.dropout * 1e6)));
    put_i32(0); // reserved
    visit_params(p, [&](const char*, const S* data, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) {
            float f = static_cast<float>(data[i]);
            char b[4];
            std::memcpy(b, &f, 4);
            buf.append(b, 4);
        }
    });
    std::uint64_t sum = fnv1a64(buf.data(), buf.size());
    char b8[8];
    std::memcpy(b8, &sum, 8);
    buf.append(b8, 8);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write checkpoint: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

template <typename S>
Parameters<S> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 + 8 * 4 + 8 || buf.compare(0, 4, "GFM1") != 0)
        throw ParseError("not a GFM1 checkpoint: " + path);

    std::uint64_t stored;
    std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
    if (fnv1a64(buf.data(), buf.size() - 8) != stored)
        throw ParseError("checkpoint checksum mismatch: " + path);

    std::size_t off = 4;
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
    get_i32(); // reserved

    Parameters<S> p = zero_params<S>(cfg);
    const std::size_t payload_end = buf.size() - 8;
    visit_params(p, [&](const char* name, S* data, Eigen::Index n) {
        if (off + 4 * static_cast<std::size_t>(n) > payload_end)
            throw ParseError(std::string("checkpoint truncated at ") + name);
        for (Eigen::Index i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, buf.data() + off, 4);
            off += 4;
            data[i] = static_cast<S>(f);
        }
    });
    if (off != payload_end) throw ParseError("checkpoint has trailing bytes: " + path);
    return p;
}

} // namespace gfm

#endif // GFM_MODEL_HPP
