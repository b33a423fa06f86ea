#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hfl/adam.hpp"
#include "hfl/corpus.hpp"
#include "hfl/model.hpp"
#include "hfl/parallel.hpp"
#include "hfl/rng.hpp"

// Pre-training and the hyperfitting loop: few samples, many epochs, no weight
// decay, run until train loss is near zero.

namespace hfl {

struct TrainConfig {
    int epochs = 20;
    double lr = 3e-5;
    int batch_size = 8;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int64_t seed = 0;
    std::optional<int64_t> constant_updates;
    double stop_threshold = 0.01;  // nats/token; "near-zero"
    int n_threads = 1;

    // reference recipe: tuned for billion-parameter models
    static TrainConfig paper_preset() {
        TrainConfig c;
        c.epochs = 20;
        c.lr = 1e-6;
        c.batch_size = 8;
        return c;
    }

    // desk-scale recipe: compact models need a larger step to reach
    // near-zero loss in a comparable number of epochs
    static TrainConfig desk_preset() {
        TrainConfig c;
        c.epochs = 20;
        c.lr = 3e-5;
        c.batch_size = 8;
        return c;
    }

    AdamConfig adam() const {
        return {lr, beta1, beta2, adam_eps, weight_decay};
    }
};

struct CurveRow {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    std::optional<double> ttr;      // mean greedy tail TTR probe, raw ratio
    std::optional<double> entropy;  // mean prediction entropy probe, nats
};

struct LossCurve {
    std::vector<CurveRow> rows;

    std::string to_csv() const {
        std::ostringstream os;
        os << "epoch,train_loss,val_loss,ttr,entropy\n";
        char buf[64];
        auto num = [&](double v) {
            snprintf(buf, sizeof buf, "%.17g", v);
            return std::string(buf);
        };
        for (const auto& r : rows) {
            os << r.epoch << ',' << num(r.train_loss) << ',' << num(r.val_loss) << ',';
            if (r.ttr) os << num(*r.ttr);
            os << ',';
            if (r.entropy) os << num(*r.entropy);
            os << '\n';
        }
        return os.str();
    }

    static LossCurve from_csv(const std::string& csv) {
        LossCurve c;
        std::istringstream is(csv);
        std::string line;
        require(bool(std::getline(is, line)), "loss curve csv: empty");
        require(line == "epoch,train_loss,val_loss,ttr,entropy", "loss curve csv: bad header");
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string field;
            CurveRow r;
            auto next = [&] {
                require(bool(std::getline(ls, field, ',')) || ls.eof(),
                        "loss curve csv: short row");
                return field;
            };
            r.epoch = std::stoi(next());
            r.train_loss = std::stod(next());
            r.val_loss = std::stod(next());
            std::getline(ls, field, ',');
            if (!field.empty()) r.ttr = std::stod(field);
            field.clear();
            std::getline(ls, field, ',');
            if (!field.empty()) r.entropy = std::stod(field);
            c.rows.push_back(r);
        }
        return c;
    }
};

// optional evaluation probes, wired in by experiments so the trainer does not
// depend on the decoder or metrics
template <class S>
struct EvalHooks {
    std::function<double(const ParamsT<S>&)> val_loss;
    std::function<double(const ParamsT<S>&)> mean_ttr;
    std::function<double(const ParamsT<S>&)> mean_entropy;
};

template <class S>
struct TrainResult {
    ParamsT<S> params;
    LossCurve curve;
    bool diverged = false;
    int64_t updates = 0;
};

namespace detail {

// mean-of-sample gradients; deterministic regardless of thread count because
// per-sample grads are reduced in ascending sample order
template <class S>
double batch_gradients(const ParamsT<S>& params,
                       const std::vector<const TokenSequence*>& batch, ParamsT<S>& acc,
                       int n_threads) {
    const size_t B = batch.size();
    std::vector<double> losses(B, 0.0);
    auto sample_io = [&](size_t s) {
        std::span<const TokenId> toks = batch[s]->tokens;
        return std::pair{toks.subspan(0, toks.size() - 1), toks.subspan(1)};
    };

    for_each_tensor(acc, [](const char*, auto& t) { t.setZero(); });
    if (n_threads <= 1 || B == 1) {
        for (size_t s = 0; s < B; ++s) {
            auto [in, tgt] = sample_io(s);
            ParamsT<S> g = backward(params, in, tgt, &losses[s]);
            auto av = tensor_views(acc);
            auto gv = tensor_views(std::as_const(g));
            for (size_t k = 0; k < av.size(); ++k)
                for (size_t i = 0; i < av[k].size; ++i) av[k].data[i] += gv[k].data[i];
        }
    } else {
        std::vector<ParamsT<S>> per_sample(B);
        parallel_for(B, n_threads, [&](size_t s) {
            auto [in, tgt] = sample_io(s);
            per_sample[s] = backward(params, in, tgt, &losses[s]);
        });
        auto av = tensor_views(acc);
        for (size_t s = 0; s < B; ++s) {
            auto gv = tensor_views(std::as_const(per_sample[s]));
            for (size_t k = 0; k < av.size(); ++k)
                for (size_t i = 0; i < av[k].size; ++i) av[k].data[i] += gv[k].data[i];
        }
    }

    const S inv = S(1) / S(B);
    for_each_tensor(acc, [&](const char*, auto& t) { t *= inv; });
    double loss = 0;
    for (double l : losses) loss += l;
    return loss / double(B);
}

template <class S>
double mean_nll(const ParamsT<S>& params, const std::vector<TokenSequence>& seqs,
                int n_threads) {
    if (seqs.empty()) return 0.0;
    std::vector<double> sums(seqs.size(), 0.0);
    std::vector<int64_t> counts(seqs.size(), 0);
    parallel_for(seqs.size(), n_threads, [&](size_t i) {
        std::span<const TokenId> toks = seqs[i].tokens;
        auto in = toks.subspan(0, toks.size() - 1);
        auto tgt = toks.subspan(1);
        Mat<S> logits = forward_train(params, in);
        sums[i] = nll_loss(logits, tgt) * double(in.size());
        counts[i] = int64_t(in.size());
    });
    double total = 0;
    int64_t n = 0;
    for (size_t i = 0; i < seqs.size(); ++i) {
        total += sums[i];
        n += counts[i];
    }
    return total / double(n);
}

template <class S>
CurveRow eval_row(const ParamsT<S>& params, int epoch, double train_loss,
                  const EvalHooks<S>& hooks) {
    CurveRow r;
    r.epoch = epoch;
    r.train_loss = train_loss;
    r.val_loss = hooks.val_loss ? hooks.val_loss(params) : 0.0;
    if (hooks.mean_ttr) r.ttr = hooks.mean_ttr(params);
    if (hooks.mean_entropy) r.entropy = hooks.mean_entropy(params);
    return r;
}

} // namespace detail

// next-token pre-training on a raw token stream; returns the best-val
// checkpoint and the full curve
template <class S>
TrainResult<S> pretrain(ParamsT<S> params, const TokenSequence& corpus,
                        const TrainConfig& cfg, int sample_len = 256,
                        const EvalHooks<S>& hooks = {}) {
    require(sample_len >= 2, "pretrain: sample_len must be >= 2");
    require(corpus.size() >= size_t(sample_len) + 1, "pretrain: corpus too short");
    const int64_t stride = sample_len + 1;  // +1 so targets need no cross-window peek
    const int64_t n_windows = int64_t(corpus.size()) / stride;
    require(n_windows >= 2, "pretrain: corpus yields fewer than 2 windows");

    // every 20th window held out for validation
    std::vector<TokenSequence> train_w, val_w;
    for (int64_t w = 0; w < n_windows; ++w) {
        TokenSequence s;
        s.tokens.assign(corpus.tokens.begin() + w * stride,
                        corpus.tokens.begin() + w * stride + stride);
        s.source_tag = corpus.source_tag;
        (w % 20 == 19 ? val_w : train_w).push_back(std::move(s));
    }

    TrainResult<S> out;
    {
        CurveRow r;
        r.epoch = 0;
        r.train_loss = detail::mean_nll(params, train_w, cfg.n_threads);
        r.val_loss = hooks.val_loss ? hooks.val_loss(params)
                                    : detail::mean_nll(params, val_w, cfg.n_threads);
        if (hooks.mean_ttr) r.ttr = hooks.mean_ttr(params);
        if (hooks.mean_entropy) r.entropy = hooks.mean_entropy(params);
        out.curve.rows.push_back(r);
    }

    AdamState<S> adam(params);
    ParamsT<S> grads = zeros_like(params);
    ParamsT<S> best = params;
    double best_val = out.curve.rows.front().val_loss;
    ParamsT<S> snapshot = params;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        snapshot = params;
        std::vector<const TokenSequence*> order;
        order.reserve(train_w.size());
        for (const auto& w : train_w) order.push_back(&w);
        Rng rng(derive_seed(uint64_t(cfg.seed),
                            "pretrain-epoch-" + std::to_string(epoch)));
        rng.shuffle(order);

        double epoch_loss = 0;
        int64_t updates = 0;
        bool finite = true;
        for (size_t b = 0; b < order.size(); b += size_t(cfg.batch_size)) {
            std::vector<const TokenSequence*> batch(
                order.begin() + int64_t(b),
                order.begin() + int64_t(std::min(b + size_t(cfg.batch_size), order.size())));
            double loss = detail::batch_gradients(params, batch, grads, cfg.n_threads);
            if (!std::isfinite(loss)) {
                finite = false;
                break;
            }
            adam.step(params, grads, cfg.adam());
            epoch_loss += loss;
            ++updates;
            ++out.updates;
        }
        if (!finite) {
            params = snapshot;  // last finite checkpoint
            out.diverged = true;
            break;
        }
        epoch_loss /= double(std::max<int64_t>(updates, 1));

        double val = hooks.val_loss ? hooks.val_loss(params)
                                    : detail::mean_nll(params, val_w, cfg.n_threads);
        CurveRow r;
        r.epoch = epoch;
        r.train_loss = epoch_loss;
        r.val_loss = val;
        if (hooks.mean_ttr) r.ttr = hooks.mean_ttr(params);
        if (hooks.mean_entropy) r.entropy = hooks.mean_entropy(params);
        out.curve.rows.push_back(r);
        if (val < best_val) {
            best_val = val;
            best = params;
        }
    }

    // divergence keeps the last finite state; otherwise best-val wins
    if (out.diverged || cfg.epochs == 0)
        out.params = std::move(params);
    else
        out.params = std::move(best);
    return out;
}

namespace detail {

// shared loop for hyperfit and hyperfit_constant_updates. Each epoch visits
// the samples in a freshly shuffled order drawn from a seed-derived stream,
// then batches sequential slices of that order with no within-epoch
// reshuffle. The visit order is a pure function of (set order, seed), so
// identical runs are bitwise equal while any reorder of the set, even a
// single swap, shifts batch composition within a few epochs. The determinacy
// experiment depends on both halves of that.
template <class S>
TrainResult<S> hyperfit_loop(ParamsT<S> params, const HyperfitSet& set,
                             const TrainConfig& cfg, const EvalHooks<S>& hooks,
                             std::optional<int64_t> total_updates) {
    require(cfg.weight_decay == 0.0, "hyperfit: weight decay must stay 0");
    set.validate();
    require(set.sample_len >= 2, "hyperfit: samples too short to train on");
    require(set.sample_len <= params.cfg.max_ctx, "hyperfit: sample_len exceeds max_ctx");

    std::vector<size_t> order(set.size());
    std::iota(order.begin(), order.end(), size_t(0));
    Rng order_rng(derive_seed(uint64_t(cfg.seed), "hyperfit-order"));

    TrainResult<S> out;
    {
        std::vector<TokenSequence> all(set.samples.begin(), set.samples.end());
        double train0 = mean_nll(params, all, cfg.n_threads);
        out.curve.rows.push_back(eval_row(params, 0, train0, hooks));
    }

    AdamState<S> adam(params);
    ParamsT<S> grads = zeros_like(params);
    ParamsT<S> snapshot = params;
    int64_t done = 0;
    const int64_t max_epochs =
        total_updates ? std::numeric_limits<int64_t>::max() : int64_t(cfg.epochs);

    for (int64_t epoch = 1; epoch <= max_epochs; ++epoch) {
        if (total_updates && done >= *total_updates) break;
        snapshot = params;
        order_rng.shuffle(order);
        double epoch_loss = 0;
        int64_t updates = 0;
        bool finite = true;
        for (size_t b = 0; b < order.size(); b += size_t(cfg.batch_size)) {
            if (total_updates && done >= *total_updates) break;
            std::vector<const TokenSequence*> batch;
            for (size_t i = b; i < std::min(b + size_t(cfg.batch_size), order.size()); ++i)
                batch.push_back(&set.samples[order[i]]);
            double loss = batch_gradients(params, batch, grads, cfg.n_threads);
            if (!std::isfinite(loss)) {
                finite = false;
                break;
            }
            adam.step(params, grads, cfg.adam());
            epoch_loss += loss;
            ++updates;
            ++done;
        }
        if (!finite) {
            params = snapshot;
            out.diverged = true;
            break;
        }
        if (updates == 0) break;
        epoch_loss /= double(updates);
        out.curve.rows.push_back(eval_row(params, int(epoch), epoch_loss, hooks));
        if (!total_updates && epoch_loss < cfg.stop_threshold) break;
    }

    out.updates = done;
    out.params = std::move(params);
    return out;
}

} // namespace detail

// the core recipe: train on a tiny set until loss is near zero
template <class S>
TrainResult<S> hyperfit(ParamsT<S> params, const HyperfitSet& set, const TrainConfig& cfg,
                        const EvalHooks<S>& hooks = {}) {
    return detail::hyperfit_loop(std::move(params), set, cfg, hooks, std::nullopt);
}

// quantity-sweep mode: exactly total_updates optimizer steps however small
// the set is (more epochs as the sample count shrinks)
template <class S>
TrainResult<S> hyperfit_constant_updates(ParamsT<S> params, const HyperfitSet& set,
                                         int64_t total_updates, const TrainConfig& cfg,
                                         const EvalHooks<S>& hooks = {}) {
    require(total_updates >= 0, "hyperfit_constant_updates: negative update count");
    return detail::hyperfit_loop(std::move(params), set, cfg, hooks, total_updates);
}

} // namespace hfl
