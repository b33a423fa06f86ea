#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hfl/common.hpp"
#include "hfl/corpus.hpp"
#include "hfl/model.hpp"
#include "hfl/ngram_index.hpp"
#include "hfl/rng.hpp"
#include "hfl/tokenizer.hpp"

// Generation: greedy and nucleus decoding plus the decode-time citation
// blocker, with full per-step tracing. Distribution math runs in double no
// matter what scalar the model uses.

namespace hfl {

struct VocabDistribution {
    Eigen::VectorXd probs;

    int vocab() const { return int(probs.size()); }

    double entropy() const {
        double e = 0;
        for (Eigen::Index i = 0; i < probs.size(); ++i)
            if (probs[i] > 0) e -= probs[i] * std::log(probs[i]);
        return e;
    }

    // cumulative mass of the k most probable tokens
    double top_mass(int k) const {
        if (k >= vocab()) return probs.sum();
        std::vector<double> v(probs.data(), probs.data() + probs.size());
        std::nth_element(v.begin(), v.begin() + k, v.end(), std::greater<>());
        return std::accumulate(v.begin(), v.begin() + k, 0.0);
    }

    // ties broken toward the lowest token id
    TokenId argmax() const {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[best]) best = i;
        return TokenId(best);
    }

    // 1-based rank of a token under (probability desc, id asc) ordering
    int rank_of(TokenId id) const {
        int r = 1;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            if (probs[i] > probs[id]) ++r;
            else if (probs[i] == probs[id] && i < id) ++r;
        }
        return r;
    }

    void validate() const {
        require(probs.size() >= 2, "VocabDistribution: vocab too small");
        double sum = 0;
        for (Eigen::Index i = 0; i < probs.size(); ++i) {
            require(std::isfinite(probs[i]) && probs[i] >= 0,
                    "VocabDistribution: negative or non-finite entry");
            sum += probs[i];
        }
        require(std::abs(sum - 1.0) <= 1e-6, "VocabDistribution: mass not 1");
        double e = entropy();
        require(e >= 0 && e <= std::log(double(vocab())) + 1e-12,
                "VocabDistribution: entropy out of range");
    }
};

template <class Derived>
VocabDistribution logits_to_distribution(const Eigen::MatrixBase<Derived>& row,
                                         double temperature) {
    require(temperature > 0, "temperature must be positive");
    VocabDistribution d;
    d.probs.resize(row.size());
    double max_l = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        double v = double(row(i));
        require(std::isfinite(v), "logits_to_distribution: non-finite logit");
        d.probs[i] = v / temperature;
        max_l = std::max(max_l, d.probs[i]);
    }
    double denom = 0;
    for (Eigen::Index i = 0; i < d.probs.size(); ++i) {
        d.probs[i] = std::exp(d.probs[i] - max_l);
        denom += d.probs[i];
    }
    d.probs /= denom;
    return d;
}

// smallest probability-sorted prefix with cumulative mass >= top_p,
// intersected with the top_k most probable; ties broken by token id
inline VocabDistribution nucleus_filter(const VocabDistribution& dist, double top_p,
                                        int top_k) {
    require(top_p > 0 && top_p <= 1.0, "nucleus_filter: top_p must be in (0, 1]");
    require(top_k >= 1, "nucleus_filter: top_k must be >= 1");
    const int V = dist.vocab();
    std::vector<int> order(size_t(V), 0);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (dist.probs[a] != dist.probs[b]) return dist.probs[a] > dist.probs[b];
        return a < b;
    });
    int keep = 0;
    double cum = 0;
    while (keep < V) {
        cum += dist.probs[order[size_t(keep)]];
        ++keep;
        if (cum >= top_p) break;
    }
    keep = std::min(keep, std::min(top_k, V));
    VocabDistribution out;
    out.probs = Eigen::VectorXd::Zero(V);
    double mass = 0;
    for (int i = 0; i < keep; ++i) mass += dist.probs[order[size_t(i)]];
    for (int i = 0; i < keep; ++i)
        out.probs[order[size_t(i)]] = dist.probs[order[size_t(i)]] / mass;
    return out;
}

struct CitationBlockConfig {
    const NGramIndex* index = nullptr;
    int n = 5;
    bool defer_to_word_end = true;

    void validate() const {
        require(index != nullptr, "CitationBlockConfig: missing index");
        require(n >= 1, "CitationBlockConfig: n must be >= 1");
        require(index->n() == n, "CitationBlockConfig: index built with different n");
    }
};

struct BlockEvent {
    bool matched = false;
    bool deferred = false;
    bool blocked = false;
    int n_zeroed = 0;
    std::vector<TokenId> gram;
};

// zero every token that continues the matched gram anywhere in the dataset,
// unless mid-word with deferral on; uniform fallback if all mass would vanish
inline VocabDistribution apply_citation_block(const VocabDistribution& dist,
                                              std::span<const TokenId> recent,
                                              const CitationBlockConfig& cfg,
                                              bool at_word_boundary,
                                              BlockEvent* event = nullptr) {
    cfg.validate();
    require(int(recent.size()) == cfg.n, "apply_citation_block: need exactly n recent tokens");
    BlockEvent ev;
    ev.gram.assign(recent.begin(), recent.end());
    auto continuations = cfg.index->continuations(recent);
    if (continuations.empty()) {
        if (event) *event = std::move(ev);
        return dist;
    }
    ev.matched = true;
    if (cfg.defer_to_word_end && !at_word_boundary) {
        ev.deferred = true;
        if (event) *event = std::move(ev);
        return dist;
    }
    ev.blocked = true;
    ev.n_zeroed = int(continuations.size());
    VocabDistribution out = dist;
    for (TokenId t : continuations)
        if (t >= 0 && t < out.vocab()) out.probs[t] = 0;
    double mass = out.probs.sum();
    if (mass <= 0) {
        // model had every bit of mass on dataset continuations; spread
        // uniformly over the non-blocked rest
        int allowed = out.vocab() - ev.n_zeroed;
        if (allowed <= 0) {
            if (event) *event = std::move(ev);
            return dist;  // every token blocked; give up rather than deadlock
        }
        double u = 1.0 / double(allowed);
        for (Eigen::Index i = 0; i < out.probs.size(); ++i) out.probs[i] = u;
        for (TokenId t : continuations)
            if (t >= 0 && t < out.vocab()) out.probs[t] = 0;
    } else {
        out.probs /= mass;
    }
    if (event) *event = std::move(ev);
    return out;
}

enum class Strategy { greedy, sample };

inline const char* to_string(Strategy s) {
    return s == Strategy::greedy ? "greedy" : "sample";
}

struct GenerationConfig {
    Strategy strategy = Strategy::greedy;
    double temperature = 0.7;
    double top_p = 0.9;
    int top_k = 50;
    int max_new_tokens = 224;
    std::optional<CitationBlockConfig> block;
    int64_t seed = 0;

    void validate() const {
        require(max_new_tokens >= 1, "GenerationConfig: max_new_tokens must be >= 1");
        if (strategy == Strategy::greedy) {
            // greedy ignores these; insist they are left at baseline values
            require(temperature == 0.7 && top_p == 0.9 && top_k == 50,
                    "GenerationConfig: greedy ignores temperature/top_p/top_k; "
                    "leave them at defaults");
        } else {
            require(temperature > 0, "GenerationConfig: temperature must be positive");
            require(top_p > 0 && top_p <= 1, "GenerationConfig: top_p must be in (0, 1]");
            require(top_k >= 1, "GenerationConfig: top_k must be >= 1");
        }
        if (block) block->validate();
    }
};

struct TraceStep {
    TokenId token = 0;
    double entropy = 0;  // pre-filter distribution statistics
    double at1 = 0, at3 = 0, at5 = 0;
    int rank = 0;        // pre-filter rank of the chosen token
    bool block_matched = false;
    bool block_deferred = false;
    bool blocked = false;
    int n_zeroed = 0;
    std::vector<TokenId> gram;
};

struct GenerationTrace {
    std::vector<TraceStep> steps;

    std::string to_jsonl() const {
        std::string out;
        for (const auto& s : steps) {
            nlohmann::ordered_json j;
            j["token"] = s.token;
            j["entropy"] = s.entropy;
            j["at1"] = s.at1;
            j["at3"] = s.at3;
            j["at5"] = s.at5;
            j["rank"] = s.rank;
            j["block_matched"] = s.block_matched;
            j["block_deferred"] = s.block_deferred;
            j["blocked"] = s.blocked;
            j["n_zeroed"] = s.n_zeroed;
            if (!s.gram.empty()) j["gram"] = s.gram;
            out += j.dump();
            out += '\n';
        }
        return out;
    }

    static GenerationTrace from_jsonl(const std::string& text) {
        GenerationTrace t;
        size_t pos = 0;
        while (pos < text.size()) {
            size_t nl = text.find('\n', pos);
            if (nl == std::string::npos) nl = text.size();
            std::string line = text.substr(pos, nl - pos);
            pos = nl + 1;
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            TraceStep s;
            s.token = j.at("token");
            s.entropy = j.at("entropy");
            s.at1 = j.at("at1");
            s.at3 = j.at("at3");
            s.at5 = j.at("at5");
            s.rank = j.at("rank");
            s.block_matched = j.value("block_matched", false);
            s.block_deferred = j.value("block_deferred", false);
            s.blocked = j.value("blocked", false);
            s.n_zeroed = j.value("n_zeroed", 0);
            if (j.contains("gram"))
                s.gram = j.at("gram").get<std::vector<TokenId>>();
            t.steps.push_back(std::move(s));
        }
        return t;
    }
};

struct GenerationResult {
    TokenSequence output;  // newly generated tokens only
    GenerationTrace trace;
};

// greedy picks argmax (ties: lowest id); sampling draws from the filtered
// distribution with a seeded RNG. Trace records pre-filter statistics.
template <class S>
GenerationResult generate(const ParamsT<S>& params, const TokenSequence& context,
                          const GenerationConfig& cfg, const Tokenizer& tok) {
    cfg.validate();
    require(!context.tokens.empty(), "generate: empty context");
    require(int(context.size()) + cfg.max_new_tokens <= params.cfg.max_ctx,
            "generate: context plus max_new_tokens exceeds max_ctx " +
                std::to_string(params.cfg.max_ctx));

    InferenceSession<S> session(params);
    Row<S> logits;
    for (TokenId t : context.tokens) logits = session.step(t);

    Rng rng(derive_seed(uint64_t(cfg.seed), "generate"));
    GenerationResult res;
    res.output.source_tag = "generated";
    auto& gen = res.output.tokens;

    for (int stepno = 0; stepno < cfg.max_new_tokens; ++stepno) {
        VocabDistribution stats = logits_to_distribution(logits, 1.0);
        TraceStep st;
        st.entropy = stats.entropy();
        st.at1 = stats.top_mass(1);
        st.at3 = stats.top_mass(3);
        st.at5 = stats.top_mass(5);

        VocabDistribution dist =
            cfg.strategy == Strategy::greedy
                ? stats
                : logits_to_distribution(logits, cfg.temperature);

        if (cfg.block && int(gen.size()) >= cfg.block->n) {
            std::span<const TokenId> recent(gen.data() + gen.size() - size_t(cfg.block->n),
                                            size_t(cfg.block->n));
            TokenId prev = gen.empty() ? context.tokens.back() : gen.back();
            bool at_boundary = tok.ends_word(prev);
            BlockEvent ev;
            dist = apply_citation_block(dist, recent, *cfg.block, at_boundary, &ev);
            st.block_matched = ev.matched;
            st.block_deferred = ev.deferred;
            st.blocked = ev.blocked;
            st.n_zeroed = ev.n_zeroed;
            if (ev.matched) st.gram = std::move(ev.gram);
        }

        TokenId chosen;
        if (cfg.strategy == Strategy::greedy) {
            chosen = dist.argmax();
        } else {
            dist = nucleus_filter(dist, cfg.top_p, cfg.top_k);
            double u = rng.next_double();
            double cum = 0;
            chosen = TokenId(dist.vocab() - 1);
            for (Eigen::Index i = 0; i < dist.probs.size(); ++i) {
                cum += dist.probs[i];
                if (u < cum) {
                    chosen = TokenId(i);
                    break;
                }
            }
        }

        st.token = chosen;
        st.rank = stats.rank_of(chosen);
        res.trace.steps.push_back(std::move(st));
        gen.push_back(chosen);
        if (stepno + 1 < cfg.max_new_tokens) logits = session.step(chosen);
    }
    return res;
}

} // namespace hfl
