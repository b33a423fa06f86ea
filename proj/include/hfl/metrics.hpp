#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hfl/bleu.hpp"
#include "hfl/corpus.hpp"
#include "hfl/decoder.hpp"
#include "hfl/model.hpp"
#include "hfl/ngram_index.hpp"
#include "hfl/parallel.hpp"
#include "hfl/suffix_automaton.hpp"

// The quantitative instruments: TTR, Self-BLEU, Dataset BLEU, overlap scans,
// perplexity, entropy/top-mass, top-1 agreement. Raw ratios everywhere;
// human-facing reports scale by 100 at emission time.

namespace hfl {

// unique/total over the trailing window
inline double ttr(const TokenSequence& seq, int window = 96) {
    require(!seq.tokens.empty(), "ttr: empty sequence");
    require(window >= 1, "ttr: window must be >= 1");
    size_t w = std::min(size_t(window), seq.size());
    std::set<TokenId> uniq(seq.tokens.end() - int64_t(w), seq.tokens.end());
    return double(uniq.size()) / double(w);
}

// mean trailing-window TTR at each generation position, over equal progress
// prefixes of every sequence
inline std::vector<std::pair<int, double>> ttr_vs_position(
    const std::vector<TokenSequence>& gens, int window = 96) {
    require(!gens.empty(), "ttr_vs_position: no sequences");
    size_t min_len = gens.front().size();
    for (const auto& g : gens) min_len = std::min(min_len, g.size());
    require(min_len >= size_t(window),
            "ttr_vs_position: sequences shorter than the window");
    std::vector<std::pair<int, double>> curve;
    for (size_t pos = size_t(window); pos <= min_len; ++pos) {
        double total = 0;
        for (const auto& g : gens) {
            std::set<TokenId> uniq(g.tokens.begin() + int64_t(pos) - window,
                                   g.tokens.begin() + int64_t(pos));
            total += double(uniq.size()) / double(window);
        }
        curve.emplace_back(int(pos), total / double(gens.size()));
    }
    return curve;
}

inline std::vector<std::pair<int, double>> ttr_vs_position(
    const std::vector<GenerationTrace>& traces, int window = 96) {
    std::vector<TokenSequence> gens;
    for (const auto& t : traces) {
        TokenSequence s;
        s.source_tag = "generated";
        for (const auto& st : t.steps) s.tokens.push_back(st.token);
        gens.push_back(std::move(s));
    }
    return ttr_vs_position(gens, window);
}

// ---- overlap ----

struct OverlapRecord {
    int overlap = 0;
    double dataset_bleu_score = -1;  // filled by callers that also run BLEU
    int sample = -1;
    int sample_offset = -1;
    int seq_end = -1;

    nlohmann::ordered_json to_json() const {
        return {{"overlap", overlap},
                {"dataset_bleu", dataset_bleu_score},
                {"sample", sample},
                {"sample_offset", sample_offset},
                {"seq_end", seq_end}};
    }
};

// reusable scanner: the automaton is built once per set
class OverlapScanner {
public:
    explicit OverlapScanner(const HyperfitSet& set) : sam_(set) {}

    OverlapRecord scan(const TokenSequence& seq) const {
        require(!seq.tokens.empty(), "longest_overlap: empty sequence");
        auto m = sam_.longest_match(seq.tokens);
        OverlapRecord r;
        r.overlap = m.length;
        r.sample = m.sample;
        r.sample_offset = m.sample_offset;
        r.seq_end = m.seq_end;
        return r;
    }

private:
    SuffixAutomaton sam_;
};

inline OverlapRecord longest_overlap(const TokenSequence& seq, const HyperfitSet& set) {
    return OverlapScanner(set).scan(seq);
}

// fraction of sequences whose longest overlap exceeds k tokens
inline double overlap_exceeds_ratio(const std::vector<TokenSequence>& seqs,
                                    const HyperfitSet& set, int k = 5) {
    require(!seqs.empty(), "overlap_exceeds_ratio: no sequences");
    OverlapScanner scanner(set);
    int64_t over = 0;
    for (const auto& s : seqs)
        if (scanner.scan(s).overlap > k) ++over;
    return double(over) / double(seqs.size());
}

// ---- dataset BLEU ----

namespace detail {

// max BLEU over every window of one sample, via incremental clipped counts.
// Only grams present in the candidate are tracked; others cannot contribute.
class WindowBleu {
public:
    WindowBleu(const NgramCounts& cand, int window)
        : cand_(&cand), window_(window) {}

    // best score over window starts [s_begin, s_end] within the sample
    double scan_range(std::span<const TokenId> sample, int s_begin, int s_end) {
        double best = -1;
        if (s_begin > s_end) return best;
        reset(sample, s_begin);
        for (int s = s_begin;; ++s) {
            best = std::max(best, score());
            if (s == s_end) break;
            // slide: n-grams starting at s leave, those ending at s+window_ enter
            for (int n = 1; n <= bleu_max_order; ++n) {
                remove_gram(sample, s, n);
                add_gram(sample, s + window_ - n + 1, n);
            }
        }
        return best;
    }

private:
    const NgramCounts* cand_;
    int window_;
    std::array<std::unordered_map<std::string, int>, bleu_max_order> ref_;
    std::array<int64_t, bleu_max_order> clipped_{};

    void reset(std::span<const TokenId> sample, int start) {
        for (auto& m : ref_) m.clear();
        clipped_.fill(0);
        for (int n = 1; n <= bleu_max_order; ++n)
            for (int i = start; i + n <= start + window_; ++i) add_gram(sample, i, n);
    }

    void add_gram(std::span<const TokenId> sample, int pos, int n) {
        auto key = gram_key(sample, size_t(pos), n);
        auto cit = cand_->orders[size_t(n - 1)].find(key);
        if (cit == cand_->orders[size_t(n - 1)].end()) return;
        int& rc = ref_[size_t(n - 1)][key];
        ++rc;
        if (rc <= cit->second) ++clipped_[size_t(n - 1)];
    }

    void remove_gram(std::span<const TokenId> sample, int pos, int n) {
        auto key = gram_key(sample, size_t(pos), n);
        auto cit = cand_->orders[size_t(n - 1)].find(key);
        if (cit == cand_->orders[size_t(n - 1)].end()) return;
        int& rc = ref_[size_t(n - 1)][key];
        if (rc <= cit->second) --clipped_[size_t(n - 1)];
        --rc;
    }

    double score() const {
        double log_sum = 0;
        int used = 0;
        for (int n = 1; n <= bleu_max_order; ++n) {
            int total = cand_->total(n);
            if (total == 0) continue;
            double p = clipped_[size_t(n - 1)] > 0
                           ? double(clipped_[size_t(n - 1)]) / double(total)
                           : bleu_epsilon;
            log_sum += std::log(p);
            ++used;
        }
        double geo = std::exp(log_sum / used);
        double bp = cand_->length >= window_
                        ? 1.0
                        : std::exp(1.0 - double(window_) / double(cand_->length));
        return 100.0 * bp * geo;
    }
};

} // namespace detail

// max BLEU between seq and any fixed-length sample window. The 4-gram index
// prunes windows that share no 4-gram with the candidate; that is lossless
// for the top-score search because such windows are capped by the epsilon
// fourth-order precision, and the full scan runs whenever the seeded best
// does not clear that cap.
inline double dataset_bleu(const TokenSequence& seq, const HyperfitSet& set,
                           int window = 96, const NGramIndex* four_grams = nullptr) {
    require(!seq.tokens.empty(), "dataset_bleu: empty sequence");
    NgramCounts cand = count_ngrams(seq.tokens);
    detail::WindowBleu wb(cand, window);

    double best = -1;
    bool any_window = false;
    for (const auto& s : set.samples)
        if (int(s.size()) >= window) any_window = true;
    if (!any_window) return 0.0;

    if (four_grams && four_grams->n() == 4) {
        // seed candidate 4-grams into window-start intervals per sample
        std::map<int, std::vector<std::pair<int, int>>> intervals;
        for (int i = 0; i + 4 <= int(seq.size()); ++i) {
            std::span<const TokenId> g(seq.tokens.data() + i, 4);
            for (const auto& occ : four_grams->occurrences(g)) {
                int len = int(set.samples[size_t(occ.sample)].size());
                if (len < window) continue;
                int lo = std::max(0, occ.offset - (window - 4));
                int hi = std::min(occ.offset, len - window);
                if (lo <= hi) intervals[occ.sample].emplace_back(lo, hi);
            }
        }
        for (auto& [sample, ivs] : intervals) {
            std::sort(ivs.begin(), ivs.end());
            int run_lo = ivs.front().first, run_hi = ivs.front().second;
            std::span<const TokenId> toks = set.samples[size_t(sample)].tokens;
            for (size_t i = 1; i <= ivs.size(); ++i) {
                if (i < ivs.size() && ivs[i].first <= run_hi + 1) {
                    run_hi = std::max(run_hi, ivs[i].second);
                } else {
                    best = std::max(best, wb.scan_range(toks, run_lo, run_hi));
                    if (i < ivs.size()) {
                        run_lo = ivs[i].first;
                        run_hi = ivs[i].second;
                    }
                }
            }
        }
        // windows without any shared 4-gram cannot beat this cap
        double bp = cand.length >= window
                        ? 1.0
                        : std::exp(1.0 - double(window) / double(cand.length));
        double unseeded_cap = 100.0 * bp * std::pow(bleu_epsilon, 0.25);
        if (best >= unseeded_cap) return best;
    }

    // full scan: every window of every sample
    for (const auto& s : set.samples) {
        if (int(s.size()) < window) continue;
        best = std::max(best, wb.scan_range(s.tokens, 0, int(s.size()) - window));
    }
    return best;
}

// per-sequence max pairwise BLEU; returns (mean, max) of those maxima
inline std::pair<double, double> self_bleu(const std::vector<TokenSequence>& seqs) {
    require(seqs.size() >= 2, "self_bleu: need at least 2 sequences");
    std::vector<NgramCounts> counts;
    counts.reserve(seqs.size());
    for (const auto& s : seqs) {
        require(!s.tokens.empty(), "self_bleu: empty sequence");
        counts.push_back(count_ngrams(s.tokens));
    }
    double sum = 0, max_of_max = 0;
    for (size_t i = 0; i < seqs.size(); ++i) {
        double mx = 0;
        for (size_t j = 0; j < seqs.size(); ++j) {
            if (i == j) continue;
            mx = std::max(mx, bleu_from_counts(counts[i], counts[j]));
        }
        sum += mx;
        max_of_max = std::max(max_of_max, mx);
    }
    return {sum / double(seqs.size()), max_of_max};
}

// ---- model-based metrics ----

// exp of the pooled mean per-token nll over all positions of all sequences
template <class S>
double perplexity(const ParamsT<S>& params, const std::vector<TokenSequence>& seqs,
                  int n_threads = 1) {
    require(!seqs.empty(), "perplexity: no sequences");
    for (const auto& s : seqs)
        require(s.size() >= 2, "perplexity: sequence shorter than 2 tokens");
    std::vector<double> sums(seqs.size(), 0.0);
    std::vector<int64_t> counts(seqs.size(), 0);
    parallel_for(seqs.size(), n_threads, [&](size_t i) {
        std::span<const TokenId> t = seqs[i].tokens;
        auto in = t.subspan(0, t.size() - 1);
        auto tgt = t.subspan(1);
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
    return std::exp(total / double(n));
}

struct PredictionStats {
    double entropy = 0;
    double at1 = 0, at3 = 0, at5 = 0;
};

// means over every prediction position of the original texts
// (context + continuation)
template <class S>
PredictionStats prediction_stats(const ParamsT<S>& params,
                                 const std::vector<ContextPair>& pairs,
                                 int n_threads = 1) {
    require(!pairs.empty(), "prediction_stats: no sequences");
    struct Acc {
        double e = 0, a1 = 0, a3 = 0, a5 = 0;
        int64_t n = 0;
    };
    std::vector<Acc> acc(pairs.size());
    parallel_for(pairs.size(), n_threads, [&](size_t i) {
        std::vector<TokenId> full = pairs[i].context.tokens;
        full.insert(full.end(), pairs[i].continuation.tokens.begin(),
                    pairs[i].continuation.tokens.end());
        require(full.size() >= 2, "prediction_stats: sequence shorter than 2 tokens");
        std::span<const TokenId> in(full.data(), full.size() - 1);
        Mat<S> logits = forward_train(params, in);
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            VocabDistribution d = logits_to_distribution(logits.row(r), 1.0);
            acc[i].e += d.entropy();
            acc[i].a1 += d.top_mass(1);
            acc[i].a3 += d.top_mass(3);
            acc[i].a5 += d.top_mass(5);
            ++acc[i].n;
        }
    });
    PredictionStats out;
    int64_t n = 0;
    for (const auto& a : acc) {
        out.entropy += a.e;
        out.at1 += a.a1;
        out.at3 += a.a3;
        out.at5 += a.a5;
        n += a.n;
    }
    out.entropy /= double(n);
    out.at1 /= double(n);
    out.at3 /= double(n);
    out.at5 /= double(n);
    return out;
}

// fraction of positions where two models pick the same argmax token
template <class SA, class SB>
double top1_agreement(const ParamsT<SA>& a, const ParamsT<SB>& b,
                      const std::vector<TokenSequence>& seqs, int n_threads = 1) {
    require(a.cfg.vocab_size == b.cfg.vocab_size,
            "top1_agreement: vocabulary size mismatch");
    require(!seqs.empty(), "top1_agreement: no sequences");
    std::vector<int64_t> same(seqs.size(), 0), total(seqs.size(), 0);
    parallel_for(seqs.size(), n_threads, [&](size_t i) {
        std::span<const TokenId> t = seqs[i].tokens;
        require(t.size() >= 2, "top1_agreement: sequence shorter than 2 tokens");
        auto in = t.subspan(0, t.size() - 1);
        Mat<SA> la = forward_train(a, in);
        Mat<SB> lb = forward_train(b, in);
        for (Eigen::Index r = 0; r < la.rows(); ++r) {
            Eigen::Index ia = 0, ib = 0;
            for (Eigen::Index j = 1; j < la.cols(); ++j) {
                if (la(r, j) > la(r, ia)) ia = j;  // first max = lowest id
                if (lb(r, j) > lb(r, ib)) ib = j;
            }
            if (ia == ib) ++same[i];
            ++total[i];
        }
    });
    int64_t s = 0, n = 0;
    for (size_t i = 0; i < seqs.size(); ++i) {
        s += same[i];
        n += total[i];
    }
    return double(s) / double(n);
}

// ---- report containers ----

struct AgreementMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> values;

    void validate() const {
        size_t n = labels.size();
        require(n >= 1 && values.size() == n, "AgreementMatrix: shape mismatch");
        for (const auto& row : values)
            require(row.size() == n, "AgreementMatrix: not square");
        for (size_t i = 0; i < n; ++i) {
            require(values[i][i] == 1.0, "AgreementMatrix: diagonal must be 1");
            for (size_t j = 0; j < n; ++j) {
                require(values[i][j] >= 0 && values[i][j] <= 1,
                        "AgreementMatrix: entry out of [0,1]");
                require(values[i][j] == values[j][i], "AgreementMatrix: not symmetric");
            }
        }
    }

    std::string to_csv() const {
        std::string out = "model";
        for (const auto& l : labels) out += "," + l;
        out += '\n';
        char buf[64];
        for (size_t i = 0; i < labels.size(); ++i) {
            out += labels[i];
            for (size_t j = 0; j < labels.size(); ++j) {
                snprintf(buf, sizeof buf, ",%.17g", values[i][j]);
                out += buf;
            }
            out += '\n';
        }
        return out;
    }

    nlohmann::ordered_json to_json() const {
        return {{"labels", labels}, {"values", values}};
    }
};

// per-sequence values plus aggregates recomputable from them
struct MetricsReport {
    std::string model_id;
    std::string dataset_id;
    std::string config_hash;
    std::map<std::string, std::vector<double>> per_sequence;
    std::map<std::string, double> aggregates;

    void add_metric(const std::string& name, std::vector<double> values) {
        require(!values.empty(), "MetricsReport: empty metric vector");
        aggregates[name + ".mean"] = mean_of(values);
        aggregates[name + ".max"] = max_of(values);
        per_sequence[name] = std::move(values);
    }

    void add_scalar(const std::string& name, double v) { aggregates[name] = v; }

    // every derivable aggregate must equal recomputation from stored values
    bool aggregates_consistent() const {
        for (const auto& [name, values] : per_sequence) {
            auto m = aggregates.find(name + ".mean");
            auto x = aggregates.find(name + ".max");
            if (m == aggregates.end() || m->second != mean_of(values)) return false;
            if (x == aggregates.end() || x->second != max_of(values)) return false;
        }
        auto nll = per_sequence.find("nll");
        auto ppl = aggregates.find("perplexity");
        if (nll != per_sequence.end() && ppl != aggregates.end() &&
            ppl->second != std::exp(mean_of(nll->second)))
            return false;
        return true;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["model_id"] = model_id;
        j["dataset_id"] = dataset_id;
        j["config_hash"] = config_hash;
        j["aggregates"] = aggregates;
        j["per_sequence"] = per_sequence;
        return j;
    }

    static MetricsReport from_json(const nlohmann::json& j) {
        MetricsReport r;
        r.model_id = j.value("model_id", "");
        r.dataset_id = j.value("dataset_id", "");
        r.config_hash = j.value("config_hash", "");
        for (auto& [k, v] : j.at("aggregates").items()) r.aggregates[k] = v;
        for (auto& [k, v] : j.at("per_sequence").items())
            r.per_sequence[k] = v.get<std::vector<double>>();
        return r;
    }

    static double mean_of(const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return s / double(v.size());
    }

    static double max_of(const std::vector<double>& v) {
        double m = v.front();
        for (double x : v) m = std::max(m, x);
        return m;
    }
};

} // namespace hfl
