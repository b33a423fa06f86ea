#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hfl/common.hpp"
#include "hfl/io.hpp"
#include "hfl/rng.hpp"

// Compact pre-LN decoder-only transformer, templated on the scalar so the
// same code runs in f32 (training) and f64 (gradient checking).
//
// Two forward paths on purpose:
//   forward()        position-by-position with a KV cache. Reduction order at
//                    position t never depends on later tokens, so prefix
//                    consistency is bitwise exact. Generation uses this path.
//   forward_train()  whole-sequence gemm path, several times faster, used by
//                    the trainer and bulk metrics. Deterministic per build but
//                    not bitwise prefix-stable (blocked gemm reassociates).
// A test pins both paths together within float tolerance.

namespace hfl {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Row = Eigen::Matrix<S, 1, Eigen::Dynamic>;

inline constexpr double ln_eps = 1e-5;

struct ModelConfig {
    int n_layers = 6;
    int n_heads = 6;
    int d_model = 384;
    int d_ff = 1536;
    int vocab_size = 256;
    int max_ctx = 256;
    double dropout = 0.0;

    int head_dim() const { return d_model / n_heads; }

    void validate() const {
        require(n_layers >= 1 && n_heads >= 1 && d_model >= 1 && d_ff >= 1 &&
                    vocab_size >= 2,
                "ModelConfig: all dimensions must be positive");
        require(d_model % n_heads == 0,
                "ModelConfig: d_model " + std::to_string(d_model) +
                    " not divisible by n_heads " + std::to_string(n_heads));
        require(max_ctx >= 256, "ModelConfig: max_ctx must be >= 256");
        require(dropout == 0.0, "ModelConfig: dropout unsupported (keep 0)");
    }

    nlohmann::ordered_json to_json() const {
        return {{"n_layers", n_layers}, {"n_heads", n_heads}, {"d_model", d_model},
                {"d_ff", d_ff},         {"vocab_size", vocab_size},
                {"max_ctx", max_ctx},   {"dropout", dropout}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.n_layers = j.at("n_layers");
        c.n_heads = j.at("n_heads");
        c.d_model = j.at("d_model");
        c.d_ff = j.at("d_ff");
        c.vocab_size = j.at("vocab_size");
        c.max_ctx = j.at("max_ctx");
        c.dropout = j.value("dropout", 0.0);
        c.validate();
        return c;
    }

    bool operator==(const ModelConfig&) const = default;
};

template <class S>
struct LayerParamsT {
    Vec<S> ln1_g, ln1_b;
    Mat<S> wq, wk, wv, wo;
    Vec<S> bq, bk, bv, bo;
    Vec<S> ln2_g, ln2_b;
    Mat<S> w1, w2;
    Vec<S> b1, b2;
};

template <class S>
struct ParamsT {
    ModelConfig cfg;
    Mat<S> tok_emb;  // vocab x d
    Mat<S> pos_emb;  // max_ctx x d
    std::vector<LayerParamsT<S>> layers;
    Vec<S> lnf_g, lnf_b;
    Mat<S> head;  // d x vocab
};

using Params = ParamsT<float>;

// visits every tensor in serialization order; fn(name, eigen_object)
template <class S, class Fn>
void for_each_tensor(ParamsT<S>& p, Fn&& fn) {
    fn("tok_emb", p.tok_emb);
    fn("pos_emb", p.pos_emb);
    for (auto& l : p.layers) {
        fn("ln1_g", l.ln1_g);
        fn("ln1_b", l.ln1_b);
        fn("wq", l.wq);
        fn("bq", l.bq);
        fn("wk", l.wk);
        fn("bk", l.bk);
        fn("wv", l.wv);
        fn("bv", l.bv);
        fn("wo", l.wo);
        fn("bo", l.bo);
        fn("ln2_g", l.ln2_g);
        fn("ln2_b", l.ln2_b);
        fn("w1", l.w1);
        fn("b1", l.b1);
        fn("w2", l.w2);
        fn("b2", l.b2);
    }
    fn("lnf_g", p.lnf_g);
    fn("lnf_b", p.lnf_b);
    fn("head", p.head);
}

template <class S, class Fn>
void for_each_tensor(const ParamsT<S>& p, Fn&& fn) {
    for_each_tensor(const_cast<ParamsT<S>&>(p),
                    [&](const char* name, auto& t) { fn(name, std::as_const(t)); });
}

template <class S>
void allocate_tensors(ParamsT<S>& p) {
    const auto& c = p.cfg;
    p.tok_emb.resize(c.vocab_size, c.d_model);
    p.pos_emb.resize(c.max_ctx, c.d_model);
    p.layers.resize(size_t(c.n_layers));
    for (auto& l : p.layers) {
        l.ln1_g.resize(c.d_model);
        l.ln1_b.resize(c.d_model);
        l.wq.resize(c.d_model, c.d_model);
        l.wk.resize(c.d_model, c.d_model);
        l.wv.resize(c.d_model, c.d_model);
        l.wo.resize(c.d_model, c.d_model);
        l.bq.resize(c.d_model);
        l.bk.resize(c.d_model);
        l.bv.resize(c.d_model);
        l.bo.resize(c.d_model);
        l.ln2_g.resize(c.d_model);
        l.ln2_b.resize(c.d_model);
        l.w1.resize(c.d_model, c.d_ff);
        l.b1.resize(c.d_ff);
        l.w2.resize(c.d_ff, c.d_model);
        l.b2.resize(c.d_model);
    }
    p.lnf_g.resize(c.d_model);
    p.lnf_b.resize(c.d_model);
    p.head.resize(c.d_model, c.vocab_size);
}

template <class S>
ParamsT<S> zeros_like(const ParamsT<S>& ref) {
    ParamsT<S> g;
    g.cfg = ref.cfg;
    allocate_tensors(g);
    for_each_tensor(g, [](const char*, auto& t) { t.setZero(); });
    return g;
}

// normal(0, 0.02) weights, zero biases, unit norm gains; residual-feeding
// projections scaled down by sqrt(2 * n_layers)
template <class S>
ParamsT<S> init(const ModelConfig& cfg, int64_t seed) {
    cfg.validate();
    ParamsT<S> p;
    p.cfg = cfg;
    allocate_tensors(p);
    Rng rng(derive_seed(uint64_t(seed), "init"));
    const double base_std = 0.02;
    const double resid_std = base_std / std::sqrt(2.0 * cfg.n_layers);
    for_each_tensor(p, [&](const std::string& name, auto& t) {
        if (name == "ln1_g" || name == "ln2_g" || name == "lnf_g") {
            t.setOnes();
        } else if (name[0] == 'b' || name == "ln1_b" || name == "ln2_b" || name == "lnf_b") {
            t.setZero();
        } else {
            double std_dev = (name == "wo" || name == "w2") ? resid_std : base_std;
            for (Eigen::Index i = 0; i < t.size(); ++i)
                t.data()[i] = S(rng.gaussian() * std_dev);
        }
    });
    return p;
}

template <class S>
bool params_finite(const ParamsT<S>& p) {
    bool ok = true;
    for_each_tensor(p, [&](const char*, const auto& t) {
        if (!t.allFinite()) ok = false;
    });
    return ok;
}

namespace detail {

template <class S>
inline S gelu(S x) {
    const S k = S(0.7978845608028654);  // sqrt(2/pi)
    S u = k * (x + S(0.044715) * x * x * x);
    return S(0.5) * x * (S(1) + std::tanh(u));
}

template <class S>
inline S gelu_grad(S x) {
    const S k = S(0.7978845608028654);
    S u = k * (x + S(0.044715) * x * x * x);
    S t = std::tanh(u);
    S du = k * (S(1) + S(0.134145) * x * x);  // 3 * 0.044715
    return S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t * t) * du;
}

// row-wise layer norm; returns normalized xhat and fills rstd
template <class S>
void layer_norm_rows(const Mat<S>& x, Mat<S>& xhat, Vec<S>& rstd) {
    const Eigen::Index T = x.rows(), d = x.cols();
    xhat.resize(T, d);
    rstd.resize(T);
    for (Eigen::Index i = 0; i < T; ++i) {
        S mean = x.row(i).mean();
        S var = (x.row(i).array() - mean).square().sum() / S(d);
        S r = S(1) / std::sqrt(var + S(ln_eps));
        rstd[i] = r;
        xhat.row(i) = (x.row(i).array() - mean) * r;
    }
}

template <class S>
Row<S> layer_norm_row(const Row<S>& x, const Vec<S>& g, const Vec<S>& b) {
    const Eigen::Index d = x.cols();
    S mean = x.mean();
    S var = (x.array() - mean).square().sum() / S(d);
    S r = S(1) / std::sqrt(var + S(ln_eps));
    return (((x.array() - mean) * r) * g.transpose().array() + b.transpose().array()).matrix();
}

} // namespace detail

// ---- incremental path ----

template <class S>
class InferenceSession {
public:
    explicit InferenceSession(const ParamsT<S>& params) : p_(&params) {
        const auto& c = params.cfg;
        k_cache_.assign(size_t(c.n_layers), Mat<S>(c.max_ctx, c.d_model));
        v_cache_.assign(size_t(c.n_layers), Mat<S>(c.max_ctx, c.d_model));
    }

    int position() const { return pos_; }
    const ParamsT<S>& params() const { return *p_; }

    void reset() { pos_ = 0; }

    // feeds one token, returns the logits row for this position
    Row<S> step(TokenId id) {
        const auto& c = p_->cfg;
        require(pos_ < c.max_ctx, "context length exceeded: max_ctx " +
                                      std::to_string(c.max_ctx));
        require(id >= 0 && id < c.vocab_size, "token id out of range");
        const int hd = c.head_dim();
        const S scale = S(1) / std::sqrt(S(hd));

        Row<S> x = p_->tok_emb.row(id) + p_->pos_emb.row(pos_);
        for (size_t li = 0; li < p_->layers.size(); ++li) {
            const auto& L = p_->layers[li];
            Row<S> h = detail::layer_norm_row(x, L.ln1_g, L.ln1_b);
            Row<S> q = h * L.wq + L.bq.transpose();
            k_cache_[li].row(pos_) = h * L.wk + L.bk.transpose();
            v_cache_[li].row(pos_) = h * L.wv + L.bv.transpose();

            Row<S> att(c.d_model);
            for (int hh = 0; hh < c.n_heads; ++hh) {
                const int off = hh * hd;
                // scores over cached positions, ascending order throughout
                scores_.resize(size_t(pos_) + 1);
                S max_s = std::numeric_limits<S>::lowest();
                for (int j = 0; j <= pos_; ++j) {
                    S s = q.segment(off, hd).dot(k_cache_[li].row(j).segment(off, hd)) * scale;
                    scores_[size_t(j)] = s;
                    max_s = std::max(max_s, s);
                }
                S denom = 0;
                for (int j = 0; j <= pos_; ++j) {
                    S e = std::exp(scores_[size_t(j)] - max_s);
                    scores_[size_t(j)] = e;
                    denom += e;
                }
                auto out = att.segment(off, hd);
                out.setZero();
                for (int j = 0; j <= pos_; ++j)
                    out += (scores_[size_t(j)] / denom) * v_cache_[li].row(j).segment(off, hd);
            }
            x += att * L.wo + L.bo.transpose();

            Row<S> h2 = detail::layer_norm_row(x, L.ln2_g, L.ln2_b);
            Row<S> ff = h2 * L.w1 + L.b1.transpose();
            for (Eigen::Index i = 0; i < ff.size(); ++i) ff[i] = detail::gelu(ff[i]);
            x += ff * L.w2 + L.b2.transpose();
        }
        Row<S> hf = detail::layer_norm_row(x, p_->lnf_g, p_->lnf_b);
        ++pos_;
        return hf * p_->head;
    }

private:
    const ParamsT<S>* p_;
    std::vector<Mat<S>> k_cache_, v_cache_;
    std::vector<S> scores_;
    int pos_ = 0;
};

// causal logits, prefix-consistent bitwise (see header comment)
template <class S>
Mat<S> forward(const ParamsT<S>& params, std::span<const TokenId> input) {
    require(!input.empty(), "forward: empty input");
    require(int(input.size()) <= params.cfg.max_ctx,
            "forward: input of " + std::to_string(input.size()) +
                " tokens exceeds max_ctx " + std::to_string(params.cfg.max_ctx));
    InferenceSession<S> session(params);
    Mat<S> logits(input.size(), params.cfg.vocab_size);
    for (size_t t = 0; t < input.size(); ++t) logits.row(Eigen::Index(t)) = session.step(input[t]);
    return logits;
}

// ---- gemm path ----

template <class S>
struct TrainCache {
    Eigen::Index T = 0;
    std::vector<TokenId> input;
    struct Layer {
        Mat<S> x_in;             // block input
        Mat<S> ln1_hat;          // normalized pre-gain
        Vec<S> ln1_rstd;
        Mat<S> q, k, v;          // projections
        std::vector<Mat<S>> probs;  // per-head softmax rows
        Mat<S> att_concat;       // heads concatenated, pre-wo
        Mat<S> x_mid;            // after attention residual
        Mat<S> ln2_hat;
        Vec<S> ln2_rstd;
        Mat<S> ff_pre;           // pre-gelu
        Mat<S> ff_act;           // post-gelu
    };
    std::vector<Layer> layers;
    Mat<S> x_final;  // input to final norm
    Mat<S> lnf_hat;
    Vec<S> lnf_rstd;
    Mat<S> lnf_out;  // head input
};

// whole-sequence forward; fills cache when given (needed by backward)
template <class S>
Mat<S> forward_train(const ParamsT<S>& params, std::span<const TokenId> input,
                     TrainCache<S>* cache = nullptr) {
    require(!input.empty(), "forward: empty input");
    const auto& c = params.cfg;
    require(int(input.size()) <= c.max_ctx,
            "forward: input of " + std::to_string(input.size()) +
                " tokens exceeds max_ctx " + std::to_string(c.max_ctx));
    const Eigen::Index T = Eigen::Index(input.size());
    const int hd = c.head_dim();
    const S scale = S(1) / std::sqrt(S(hd));

    if (cache) {
        cache->T = T;
        cache->input.assign(input.begin(), input.end());
        cache->layers.resize(size_t(c.n_layers));
    }

    Mat<S> x(T, c.d_model);
    for (Eigen::Index t = 0; t < T; ++t) {
        require(input[size_t(t)] >= 0 && input[size_t(t)] < c.vocab_size,
                "token id out of range");
        x.row(t) = params.tok_emb.row(input[size_t(t)]) + params.pos_emb.row(t);
    }

    Mat<S> xhat;
    Vec<S> rstd;
    for (size_t li = 0; li < params.layers.size(); ++li) {
        const auto& L = params.layers[li];
        auto* cl = cache ? &cache->layers[li] : nullptr;
        if (cl) cl->x_in = x;

        detail::layer_norm_rows(x, xhat, rstd);
        Mat<S> h = xhat * L.ln1_g.asDiagonal();
        h.rowwise() += L.ln1_b.transpose();
        if (cl) {
            cl->ln1_hat = xhat;
            cl->ln1_rstd = rstd;
        }

        Mat<S> q = h * L.wq;
        q.rowwise() += L.bq.transpose();
        Mat<S> k = h * L.wk;
        k.rowwise() += L.bk.transpose();
        Mat<S> v = h * L.wv;
        v.rowwise() += L.bv.transpose();
        if (cl) {
            cl->q = q;
            cl->k = k;
            cl->v = v;
            cl->probs.resize(size_t(c.n_heads));
        }

        Mat<S> att(T, c.d_model);
        for (int hh = 0; hh < c.n_heads; ++hh) {
            const int off = hh * hd;
            Mat<S> scores = q.middleCols(off, hd) * k.middleCols(off, hd).transpose() * scale;
            Mat<S> probs(T, T);
            for (Eigen::Index i = 0; i < T; ++i) {
                S max_s = scores.row(i).head(i + 1).maxCoeff();
                S denom = 0;
                for (Eigen::Index j = 0; j <= i; ++j) {
                    S e = std::exp(scores(i, j) - max_s);
                    probs(i, j) = e;
                    denom += e;
                }
                probs.row(i).head(i + 1) /= denom;
                probs.row(i).tail(T - i - 1).setZero();
            }
            att.middleCols(off, hd) = probs * v.middleCols(off, hd);
            if (cl) cl->probs[size_t(hh)] = std::move(probs);
        }
        Mat<S> att_proj = att * L.wo;
        att_proj.rowwise() += L.bo.transpose();
        if (cl) cl->att_concat = std::move(att);
        x += att_proj;
        if (cl) cl->x_mid = x;

        detail::layer_norm_rows(x, xhat, rstd);
        Mat<S> h2 = xhat * L.ln2_g.asDiagonal();
        h2.rowwise() += L.ln2_b.transpose();
        if (cl) {
            cl->ln2_hat = xhat;
            cl->ln2_rstd = rstd;
        }

        Mat<S> ff = h2 * L.w1;
        ff.rowwise() += L.b1.transpose();
        if (cl) cl->ff_pre = ff;
        for (Eigen::Index i = 0; i < ff.size(); ++i)
            ff.data()[i] = detail::gelu(ff.data()[i]);
        if (cl) cl->ff_act = ff;
        Mat<S> ff_proj = ff * L.w2;
        ff_proj.rowwise() += L.b2.transpose();
        x += ff_proj;
    }

    if (cache) cache->x_final = x;
    detail::layer_norm_rows(x, xhat, rstd);
    Mat<S> hf = xhat * params.lnf_g.asDiagonal();
    hf.rowwise() += params.lnf_b.transpose();
    if (cache) {
        cache->lnf_hat = xhat;
        cache->lnf_rstd = rstd;
        cache->lnf_out = hf;
    }
    return hf * params.head;
}

// mean nats per position; reductions in double regardless of scalar
template <class S>
double nll_loss(const Mat<S>& logits, std::span<const TokenId> targets) {
    require(size_t(logits.rows()) == targets.size(),
            "nll_loss: logits rows " + std::to_string(logits.rows()) +
                " != targets " + std::to_string(targets.size()));
    require(!targets.empty(), "nll_loss: empty targets");
    double total = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        TokenId tgt = targets[size_t(i)];
        require(tgt >= 0 && tgt < logits.cols(), "nll_loss: target id out of range");
        double max_l = double(logits.row(i).maxCoeff());
        double denom = 0;
        for (Eigen::Index j = 0; j < logits.cols(); ++j)
            denom += std::exp(double(logits(i, j)) - max_l);
        total += max_l + std::log(denom) - double(logits(i, tgt));
    }
    return total / double(logits.rows());
}

namespace detail {

// d(loss)/dx for y = xhat * g + b given d(loss)/dy, per row
template <class S>
void layer_norm_backward(const Mat<S>& dy, const Mat<S>& xhat, const Vec<S>& rstd,
                         const Vec<S>& g, Mat<S>& dx, Vec<S>& dg, Vec<S>& db) {
    const Eigen::Index T = dy.rows(), d = dy.cols();
    dx.resize(T, d);
    for (Eigen::Index i = 0; i < T; ++i) {
        dg += (dy.row(i).array() * xhat.row(i).array()).matrix().transpose();
        db += dy.row(i).transpose();
        Row<S> dxhat = (dy.row(i).array() * g.transpose().array()).matrix();
        S m1 = dxhat.mean();
        S m2 = (dxhat.array() * xhat.row(i).array()).mean();
        dx.row(i) = ((dxhat.array() - m1 - xhat.row(i).array() * m2) * rstd[i]).matrix();
    }
}

} // namespace detail

// exact gradient of nll_loss(forward_train(params, input), targets)
template <class S>
ParamsT<S> backward(const ParamsT<S>& params, std::span<const TokenId> input,
                    std::span<const TokenId> targets, double* loss_out = nullptr) {
    require(input.size() == targets.size(), "backward: input/target length mismatch");
    const auto& c = params.cfg;
    const Eigen::Index T = Eigen::Index(input.size());
    const int hd = c.head_dim();
    const S scale = S(1) / std::sqrt(S(hd));

    TrainCache<S> cache;
    Mat<S> logits = forward_train(params, input, &cache);
    if (loss_out) *loss_out = nll_loss(logits, targets);

    ParamsT<S> g = zeros_like(params);

    // dlogits = (softmax - onehot) / T
    Mat<S> dlogits(T, c.vocab_size);
    for (Eigen::Index i = 0; i < T; ++i) {
        S max_l = logits.row(i).maxCoeff();
        Row<S> e = (logits.row(i).array() - max_l).exp().matrix();
        dlogits.row(i) = e / e.sum();
        dlogits(i, targets[size_t(i)]) -= S(1);
    }
    dlogits /= S(T);

    g.head = cache.lnf_out.transpose() * dlogits;
    Mat<S> dhf = dlogits * params.head.transpose();

    Mat<S> dx;
    detail::layer_norm_backward(dhf, cache.lnf_hat, cache.lnf_rstd, params.lnf_g, dx,
                                g.lnf_g, g.lnf_b);

    for (int li = c.n_layers - 1; li >= 0; --li) {
        const auto& L = params.layers[size_t(li)];
        auto& gl = g.layers[size_t(li)];
        auto& cl = cache.layers[size_t(li)];

        // mlp half
        Mat<S> dff_proj = dx;  // residual: dx flows to both branch and skip
        gl.b2 += dff_proj.colwise().sum().transpose();
        gl.w2 += cl.ff_act.transpose() * dff_proj;
        Mat<S> dff_act = dff_proj * L.w2.transpose();
        Mat<S> dff_pre(T, c.d_ff);
        for (Eigen::Index i = 0; i < dff_pre.size(); ++i)
            dff_pre.data()[i] = dff_act.data()[i] * detail::gelu_grad(cl.ff_pre.data()[i]);
        gl.b1 += dff_pre.colwise().sum().transpose();
        Mat<S> h2 = cl.ln2_hat * L.ln2_g.asDiagonal();
        h2.rowwise() += L.ln2_b.transpose();
        gl.w1 += h2.transpose() * dff_pre;
        Mat<S> dh2 = dff_pre * L.w1.transpose();

        Mat<S> dx_mid;
        detail::layer_norm_backward(dh2, cl.ln2_hat, cl.ln2_rstd, L.ln2_g, dx_mid, gl.ln2_g,
                                    gl.ln2_b);
        dx_mid += dx;  // skip connection

        // attention half
        gl.bo += dx_mid.colwise().sum().transpose();
        gl.wo += cl.att_concat.transpose() * dx_mid;
        Mat<S> datt = dx_mid * L.wo.transpose();

        Mat<S> dq(T, c.d_model), dk(T, c.d_model), dv(T, c.d_model);
        for (int hh = 0; hh < c.n_heads; ++hh) {
            const int off = hh * hd;
            const Mat<S>& P = cl.probs[size_t(hh)];
            auto dO = datt.middleCols(off, hd);
            dv.middleCols(off, hd) = P.transpose() * dO;
            Mat<S> dP = dO * cl.v.middleCols(off, hd).transpose();
            // softmax backward per row; causal zeros stay zero
            Mat<S> dS(T, T);
            for (Eigen::Index i = 0; i < T; ++i) {
                S dot = 0;
                for (Eigen::Index j = 0; j <= i; ++j) dot += dP(i, j) * P(i, j);
                for (Eigen::Index j = 0; j <= i; ++j) dS(i, j) = P(i, j) * (dP(i, j) - dot);
                dS.row(i).tail(T - i - 1).setZero();
            }
            dq.middleCols(off, hd) = dS * cl.k.middleCols(off, hd) * scale;
            dk.middleCols(off, hd) = dS.transpose() * cl.q.middleCols(off, hd) * scale;
        }

        Mat<S> h1 = cl.ln1_hat * L.ln1_g.asDiagonal();
        h1.rowwise() += L.ln1_b.transpose();
        gl.bq += dq.colwise().sum().transpose();
        gl.bk += dk.colwise().sum().transpose();
        gl.bv += dv.colwise().sum().transpose();
        gl.wq += h1.transpose() * dq;
        gl.wk += h1.transpose() * dk;
        gl.wv += h1.transpose() * dv;
        Mat<S> dh1 = dq * L.wq.transpose() + dk * L.wk.transpose() + dv * L.wv.transpose();

        Mat<S> dx_in;
        detail::layer_norm_backward(dh1, cl.ln1_hat, cl.ln1_rstd, L.ln1_g, dx_in, gl.ln1_g,
                                    gl.ln1_b);
        dx = dx_in + dx_mid;  // skip connection
    }

    for (Eigen::Index t = 0; t < T; ++t) {
        g.tok_emb.row(cache.input[size_t(t)]) += dx.row(t);
        g.pos_emb.row(t) += dx.row(t);
    }
    return g;
}

// ---- checkpoint io ----

template <class S>
constexpr const char* dtype_name() {
    if constexpr (std::is_same_v<S, float>) return "f32";
    else return "f64";
}

template <class S>
void save_checkpoint(const ParamsT<S>& params, const std::filesystem::path& path,
                     int64_t step = 0, std::vector<std::string> seed_lineage = {}) {
    auto f = open_output(path);
    write_magic(f, "HFCKPT1");
    nlohmann::ordered_json header;
    header["dtype"] = dtype_name<S>();
    header["config"] = params.cfg.to_json();
    header["step"] = step;
    header["seed_lineage"] = seed_lineage;
    write_string(f, header.dump());
    for_each_tensor(params, [&](const char*, const auto& t) {
        write_le_array(f, t.data(), size_t(t.size()));
    });
    require(bool(f), "write failed: " + path.string());
}

struct CheckpointInfo {
    ModelConfig config;
    std::string dtype;
    int64_t step = 0;
    std::vector<std::string> seed_lineage;
};

inline CheckpointInfo peek_checkpoint(const std::filesystem::path& path) {
    auto f = open_input(path);
    expect_magic(f, "HFCKPT1", path.string());
    auto header = nlohmann::json::parse(read_string(f));
    CheckpointInfo info;
    info.config = ModelConfig::from_json(header.at("config"));
    info.dtype = header.at("dtype");
    info.step = header.value("step", int64_t(0));
    for (const auto& s : header.value("seed_lineage", nlohmann::json::array()))
        info.seed_lineage.push_back(s.get<std::string>());
    return info;
}

template <class S>
ParamsT<S> load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info_out = nullptr) {
    auto f = open_input(path);
    expect_magic(f, "HFCKPT1", path.string());
    auto header = nlohmann::json::parse(read_string(f));
    require(header.at("dtype") == dtype_name<S>(),
            path.string() + ": checkpoint dtype " + header.at("dtype").get<std::string>() +
                " does not match requested " + dtype_name<S>());
    ParamsT<S> p;
    p.cfg = ModelConfig::from_json(header.at("config"));
    allocate_tensors(p);
    for_each_tensor(p, [&](const char*, auto& t) {
        read_le_array(f, t.data(), size_t(t.size()));
    });
    require(params_finite(p), path.string() + ": checkpoint contains non-finite values");
    if (info_out) {
        info_out->config = p.cfg;
        info_out->dtype = header.at("dtype");
        info_out->step = header.value("step", int64_t(0));
        info_out->seed_lineage.clear();
        for (const auto& s : header.value("seed_lineage", nlohmann::json::array()))
            info_out->seed_lineage.push_back(s.get<std::string>());
    }
    return p;
}

template <class To, class From>
ParamsT<To> cast_params(const ParamsT<From>& p) {
    ParamsT<To> out;
    out.cfg = p.cfg;
    allocate_tensors(out);
    out.tok_emb = p.tok_emb.template cast<To>();
    out.pos_emb = p.pos_emb.template cast<To>();
    for (size_t i = 0; i < p.layers.size(); ++i) {
        const auto& a = p.layers[i];
        auto& b = out.layers[i];
        b.ln1_g = a.ln1_g.template cast<To>();
        b.ln1_b = a.ln1_b.template cast<To>();
        b.wq = a.wq.template cast<To>();
        b.wk = a.wk.template cast<To>();
        b.wv = a.wv.template cast<To>();
        b.wo = a.wo.template cast<To>();
        b.bq = a.bq.template cast<To>();
        b.bk = a.bk.template cast<To>();
        b.bv = a.bv.template cast<To>();
        b.bo = a.bo.template cast<To>();
        b.ln2_g = a.ln2_g.template cast<To>();
        b.ln2_b = a.ln2_b.template cast<To>();
        b.w1 = a.w1.template cast<To>();
        b.b1 = a.b1.template cast<To>();
        b.w2 = a.w2.template cast<To>();
        b.b2 = a.b2.template cast<To>();
    }
    out.lnf_g = p.lnf_g.template cast<To>();
    out.lnf_b = p.lnf_b.template cast<To>();
    out.head = p.head.template cast<To>();
    return out;
}

} // namespace hfl
