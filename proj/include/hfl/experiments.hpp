#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hfl/corpus.hpp"
#include "hfl/decoder.hpp"
#include "hfl/metrics.hpp"
#include "hfl/model.hpp"
#include "hfl/tokenizer.hpp"
#include "hfl/trainer.hpp"

// Scripted protocols: loss curves, seed determinacy, sample-quantity sweeps,
// overlap histograms, sharpness tables, TTR decay. Every run is a pure
// function of its spec; wall clock and timestamps live in a sidecar so
// report.json is byte-stable across reruns.

namespace hfl {

struct ExperimentSpec {
    std::string kind;  // curve | determinacy | quantity | overlap | sharpness | decay
    std::string base_checkpoint;
    std::string hyperfit_checkpoint;  // overlap / sharpness / decay
    std::string hyperfit_set;
    std::string eval_set;
    std::string tokenizer;
    std::string out_dir;

    TrainConfig train = TrainConfig::desk_preset();
    GenerationConfig gen;  // block wiring happens in-run, never serialized
    int context_len = 32;
    int n_eval = 100;
    int ttr_window = 96;
    std::vector<int> quantity_counts = {8, 16};
    int64_t constant_updates = 5000;
    int block_n = 5;
    bool block_defer = true;
    std::vector<std::string> variant_sets;  // determinacy: optional prebuilt permutations
    int64_t seed = 0;

    static const std::vector<std::string>& kinds() {
        static const std::vector<std::string> k = {"curve",   "determinacy", "quantity",
                                                   "overlap", "sharpness",   "decay"};
        return k;
    }

    void validate() const {
        const auto& ks = kinds();
        require(std::find(ks.begin(), ks.end(), kind) != ks.end(),
                "ExperimentSpec: unknown kind '" + kind + "'");
        require(!out_dir.empty(), "ExperimentSpec: out_dir required");
        require(n_eval >= 1, "ExperimentSpec: n_eval must be >= 1");
        require(context_len >= 1, "ExperimentSpec: context_len must be >= 1");
        require(ttr_window >= 1, "ExperimentSpec: ttr_window must be >= 1");
        auto must_exist = [](const std::string& p, const char* what) {
            require(!p.empty(), std::string("ExperimentSpec: ") + what + " required");
            require(std::filesystem::exists(p),
                    std::string("ExperimentSpec: missing ") + what + ": " + p);
        };
        must_exist(base_checkpoint, "base_checkpoint");
        must_exist(hyperfit_set, "hyperfit_set");
        must_exist(eval_set, "eval_set");
        must_exist(tokenizer, "tokenizer");
        if (kind == "overlap" || kind == "sharpness" || kind == "decay")
            must_exist(hyperfit_checkpoint, "hyperfit_checkpoint");
        for (const auto& v : variant_sets) must_exist(v, "variant set");
        if (kind == "quantity")
            require(!quantity_counts.empty(), "ExperimentSpec: quantity_counts empty");
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["kind"] = kind;
        j["base_checkpoint"] = base_checkpoint;
        j["hyperfit_checkpoint"] = hyperfit_checkpoint;
        j["hyperfit_set"] = hyperfit_set;
        j["eval_set"] = eval_set;
        j["tokenizer"] = tokenizer;
        j["out_dir"] = out_dir;
        j["train"] = {{"epochs", train.epochs},
                      {"lr", train.lr},
                      {"batch_size", train.batch_size},
                      {"weight_decay", train.weight_decay},
                      {"beta1", train.beta1},
                      {"beta2", train.beta2},
                      {"adam_eps", train.adam_eps},
                      {"seed", train.seed},
                      {"stop_threshold", train.stop_threshold},
                      {"n_threads", train.n_threads}};
        j["gen"] = {{"strategy", to_string(gen.strategy)},
                    {"temperature", gen.temperature},
                    {"top_p", gen.top_p},
                    {"top_k", gen.top_k},
                    {"max_new_tokens", gen.max_new_tokens},
                    {"seed", gen.seed}};
        j["context_len"] = context_len;
        j["n_eval"] = n_eval;
        j["ttr_window"] = ttr_window;
        j["quantity_counts"] = quantity_counts;
        j["constant_updates"] = constant_updates;
        j["block_n"] = block_n;
        j["block_defer"] = block_defer;
        j["variant_sets"] = variant_sets;
        j["seed"] = seed;
        return j;
    }

    static ExperimentSpec from_json(const nlohmann::json& j) {
        ExperimentSpec s;
        s.kind = j.at("kind");
        s.base_checkpoint = j.value("base_checkpoint", "");
        s.hyperfit_checkpoint = j.value("hyperfit_checkpoint", "");
        s.hyperfit_set = j.value("hyperfit_set", "");
        s.eval_set = j.value("eval_set", "");
        s.tokenizer = j.value("tokenizer", "");
        s.out_dir = j.value("out_dir", "");
        if (j.contains("train")) {
            const auto& t = j.at("train");
            s.train.epochs = t.value("epochs", s.train.epochs);
            s.train.lr = t.value("lr", s.train.lr);
            s.train.batch_size = t.value("batch_size", s.train.batch_size);
            s.train.weight_decay = t.value("weight_decay", s.train.weight_decay);
            s.train.beta1 = t.value("beta1", s.train.beta1);
            s.train.beta2 = t.value("beta2", s.train.beta2);
            s.train.adam_eps = t.value("adam_eps", s.train.adam_eps);
            s.train.seed = t.value("seed", s.train.seed);
            s.train.stop_threshold = t.value("stop_threshold", s.train.stop_threshold);
            s.train.n_threads = t.value("n_threads", s.train.n_threads);
        }
        if (j.contains("gen")) {
            const auto& g = j.at("gen");
            std::string strat = g.value("strategy", "greedy");
            require(strat == "greedy" || strat == "sample",
                    "ExperimentSpec: unknown strategy '" + strat + "'");
            s.gen.strategy = strat == "greedy" ? Strategy::greedy : Strategy::sample;
            s.gen.temperature = g.value("temperature", s.gen.temperature);
            s.gen.top_p = g.value("top_p", s.gen.top_p);
            s.gen.top_k = g.value("top_k", s.gen.top_k);
            s.gen.max_new_tokens = g.value("max_new_tokens", s.gen.max_new_tokens);
            s.gen.seed = g.value("seed", s.gen.seed);
        }
        s.context_len = j.value("context_len", s.context_len);
        s.n_eval = j.value("n_eval", s.n_eval);
        s.ttr_window = j.value("ttr_window", s.ttr_window);
        if (j.contains("quantity_counts"))
            s.quantity_counts = j.at("quantity_counts").get<std::vector<int>>();
        s.constant_updates = j.value("constant_updates", s.constant_updates);
        s.block_n = j.value("block_n", s.block_n);
        s.block_defer = j.value("block_defer", s.block_defer);
        if (j.contains("variant_sets"))
            s.variant_sets = j.at("variant_sets").get<std::vector<std::string>>();
        s.seed = j.value("seed", s.seed);
        return s;
    }

    // canonical hash: plain json sorts keys, so the dump is order-independent
    std::string hash() const {
        std::string canon = nlohmann::json(to_json()).dump();
        return to_hex(fnv1a64(canon));
    }
};

inline std::string environment_stamp() {
    return std::string("gcc ") + __VERSION__ + ", eigen " +
           std::to_string(EIGEN_WORLD_VERSION) + "." +
           std::to_string(EIGEN_MAJOR_VERSION) + "." +
           std::to_string(EIGEN_MINOR_VERSION) + ", " +
           std::to_string(sizeof(void*) * 8) + "-bit";
}

struct RunReport {
    std::string kind;
    std::string spec_hash;
    std::string environment;
    std::map<std::string, double> metrics;
    std::map<std::string, std::string> artifacts;  // name -> file under out_dir
    std::vector<std::string> warnings;
    double wall_clock_seconds = 0;  // sidecar only
    std::string created_at;         // sidecar only

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["kind"] = kind;
        j["spec_hash"] = spec_hash;
        j["environment"] = environment;
        j["metrics"] = metrics;
        j["artifacts"] = artifacts;
        j["warnings"] = warnings;
        return j;
    }

    static RunReport from_json(const nlohmann::json& j) {
        RunReport r;
        r.kind = j.at("kind");
        r.spec_hash = j.at("spec_hash");
        r.environment = j.at("environment");
        for (auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v;
        for (auto& [k, v] : j.at("artifacts").items()) r.artifacts[k] = v;
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        return r;
    }

    nlohmann::ordered_json sidecar_json() const {
        return {{"wall_clock_seconds", wall_clock_seconds}, {"created_at", created_at}};
    }
};

// report.json stays byte-stable; volatile fields go to report.meta.json
inline void write_run_report(const RunReport& rep, const std::filesystem::path& out_dir) {
    write_file(out_dir / "report.json", rep.to_json().dump(2) + "\n");
    write_file(out_dir / "report.meta.json", rep.sidecar_json().dump(2) + "\n");
}

namespace detail {

template <class S>
struct ExperimentInputs {
    ParamsT<S> base;
    HyperfitSet set;
    std::vector<TokenSequence> eval_seqs;
    std::vector<TokenSequence> contexts;
    Tokenizer tok;
};

template <class S>
ExperimentInputs<S> load_inputs(const ExperimentSpec& spec) {
    ExperimentInputs<S> in{load_checkpoint<S>(spec.base_checkpoint),
                           load_hyperfit_set(spec.hyperfit_set),
                           {},
                           {},
                           Tokenizer::from_json(nlohmann::json::parse(read_file(spec.tokenizer)))};
    HyperfitSet ev = load_hyperfit_set(spec.eval_set);
    require(int(ev.size()) >= spec.n_eval,
            "experiment: eval set has " + std::to_string(ev.size()) +
                " sequences, spec wants " + std::to_string(spec.n_eval));
    in.eval_seqs.assign(ev.samples.begin(), ev.samples.begin() + spec.n_eval);
    for (const auto& s : in.eval_seqs)
        in.contexts.push_back(split_context(s, spec.context_len).context);
    return in;
}

// greedy generations of n_new tokens from each context
template <class S>
std::vector<GenerationResult> generate_all(const ParamsT<S>& params,
                                           const std::vector<TokenSequence>& contexts,
                                           GenerationConfig cfg, const Tokenizer& tok) {
    std::vector<GenerationResult> out;
    out.reserve(contexts.size());
    for (const auto& c : contexts) out.push_back(generate(params, c, cfg, tok));
    return out;
}

inline std::vector<TokenSequence> outputs_of(const std::vector<GenerationResult>& gens) {
    std::vector<TokenSequence> out;
    out.reserve(gens.size());
    for (const auto& g : gens) out.push_back(g.output);
    return out;
}

// longest word observed in a token stream, in tokens (blocker bound term)
inline int max_word_token_length(const std::vector<TokenSequence>& seqs,
                                 const Tokenizer& tok) {
    int best = 0;
    for (const auto& s : seqs) {
        int run = 0;
        for (TokenId t : s.tokens) {
            ++run;
            best = std::max(best, run);
            if (tok.ends_word(t)) run = 0;
        }
    }
    return best;
}

inline std::string hist_csv(const std::map<int, int64_t>& hist) {
    std::string out = "bin,count\n";
    for (const auto& [bin, count] : hist)
        out += std::to_string(bin) + "," + std::to_string(count) + "\n";
    return out;
}

} // namespace detail

// hyperfit with per-epoch val loss, greedy-TTR and entropy probes
template <class S>
RunReport run_curve(const ExperimentSpec& spec) {
    spec.validate();
    require(spec.kind == "curve", "run_curve: spec kind is " + spec.kind);
    auto in = detail::load_inputs<S>(spec);

    GenerationConfig probe;  // greedy defaults
    probe.max_new_tokens = spec.ttr_window;
    auto entropy_stash = std::make_shared<double>(0.0);
    EvalHooks<S> hooks;
    hooks.val_loss = [&](const ParamsT<S>& p) {
        return detail::mean_nll(p, in.eval_seqs, spec.train.n_threads);
    };
    hooks.mean_ttr = [&, entropy_stash](const ParamsT<S>& p) {
        double ttr_sum = 0, ent_sum = 0;
        int64_t steps = 0;
        for (const auto& c : in.contexts) {
            auto g = generate(p, c, probe, in.tok);
            ttr_sum += ttr(g.output, spec.ttr_window);
            for (const auto& st : g.trace.steps) ent_sum += st.entropy;
            steps += int64_t(g.trace.steps.size());
        }
        *entropy_stash = ent_sum / double(steps);
        return ttr_sum / double(in.contexts.size());
    };
    // eval_row calls mean_ttr first, so the stash is fresh
    hooks.mean_entropy = [entropy_stash](const ParamsT<S>&) { return *entropy_stash; };

    TrainResult<S> res = hyperfit(std::move(in.base), in.set, spec.train, hooks);

    std::filesystem::path out(spec.out_dir);
    write_file(out / "curve.csv", res.curve.to_csv());
    save_checkpoint(res.params, out / "hyperfit.ckpt", res.updates,
                    {"spec:" + spec.hash()});

    RunReport rep;
    rep.kind = spec.kind;
    rep.spec_hash = spec.hash();
    rep.environment = environment_stamp();
    const auto& rows = res.curve.rows;
    rep.metrics["train_loss.first"] = rows.front().train_loss;
    rep.metrics["train_loss.final"] = rows.back().train_loss;
    rep.metrics["val_loss.first"] = rows.front().val_loss;
    rep.metrics["val_loss.final"] = rows.back().val_loss;
    rep.metrics["ttr.first"] = rows.front().ttr.value();
    rep.metrics["ttr.final"] = rows.back().ttr.value();
    rep.metrics["entropy.first"] = rows.front().entropy.value();
    rep.metrics["entropy.final"] = rows.back().entropy.value();
    rep.metrics["updates"] = double(res.updates);
    rep.metrics["diverged"] = res.diverged ? 1.0 : 0.0;
    rep.artifacts["curve"] = "curve.csv";
    rep.artifacts["checkpoint"] = "hyperfit.ckpt";
    return rep;
}

// same data, same seed, permuted order: how much do the hyperfit models agree
template <class S>
AgreementMatrix run_determinacy(const ExperimentSpec& spec, RunReport* rep = nullptr) {
    spec.validate();
    require(spec.kind == "determinacy", "run_determinacy: spec kind is " + spec.kind);
    auto in = detail::load_inputs<S>(spec);

    std::vector<HyperfitSet> sets;
    std::vector<std::string> labels;
    sets.push_back(in.set);
    labels.push_back(in.set.order_id);
    if (!spec.variant_sets.empty()) {
        for (const auto& path : spec.variant_sets) {
            HyperfitSet v = load_hyperfit_set(path);
            require(same_sample_multiset(in.set, v),
                    "run_determinacy: variant " + path +
                        " is not a permutation of the base set");
            labels.push_back(v.order_id);
            sets.push_back(std::move(v));
        }
    } else {
        sets.push_back(make_shuffle_variant(in.set, ShuffleMode::shuffle_one, spec.seed));
        sets.push_back(make_shuffle_variant(in.set, ShuffleMode::shuffle_all, spec.seed));
        labels.push_back(sets[1].order_id);
        labels.push_back(sets[2].order_id);
    }

    std::vector<ParamsT<S>> models;
    for (const auto& s : sets)
        models.push_back(hyperfit(in.base, s, spec.train).params);

    size_t n = models.size();
    AgreementMatrix m;
    m.labels = labels;
    m.values.assign(n, std::vector<double>(n, 1.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double a = top1_agreement(models[i], models[j], in.eval_seqs,
                                      spec.train.n_threads);
            m.values[i][j] = a;
            m.values[j][i] = a;
        }
    m.validate();

    write_file(std::filesystem::path(spec.out_dir) / "agreement.csv", m.to_csv());
    if (rep) {
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j)
                rep->metrics["agreement." + labels[i] + "." + labels[j]] = m.values[i][j];
        rep->artifacts["agreement"] = "agreement.csv";
    }
    return m;
}

// constant-update hyperfits on shrinking subsets; TTR of short greedy tails
template <class S>
std::vector<std::pair<int, double>> run_quantity_sweep(const ExperimentSpec& spec,
                                                       RunReport* rep = nullptr) {
    spec.validate();
    require(spec.kind == "quantity", "run_quantity_sweep: spec kind is " + spec.kind);
    auto in = detail::load_inputs<S>(spec);

    GenerationConfig probe;
    probe.max_new_tokens = spec.ttr_window;

    std::vector<std::pair<int, double>> curve;
    for (int count : spec.quantity_counts) {
        require(count >= 1 && count <= int(in.set.size()),
                "run_quantity_sweep: count " + std::to_string(count) +
                    " outside 1.." + std::to_string(in.set.size()));
        if (count < spec.train.batch_size && rep)
            rep->warnings.push_back("count " + std::to_string(count) +
                                    " below batch size " +
                                    std::to_string(spec.train.batch_size));
        HyperfitSet subset = in.set;
        subset.samples.resize(size_t(count));
        subset.order_id = in.set.order_id + "-first" + std::to_string(count);

        auto res = hyperfit_constant_updates(in.base, subset, spec.constant_updates,
                                             spec.train);
        double ttr_sum = 0;
        for (const auto& c : in.contexts)
            ttr_sum += ttr(generate(res.params, c, probe, in.tok).output, spec.ttr_window);
        curve.emplace_back(count, ttr_sum / double(in.contexts.size()));
    }

    std::string csv = "n_samples,mean_ttr\n";
    char buf[64];
    for (const auto& [n, t] : curve) {
        snprintf(buf, sizeof buf, "%d,%.17g\n", n, t);
        csv += buf;
    }
    write_file(std::filesystem::path(spec.out_dir) / "quantity.csv", csv);
    if (rep) {
        for (const auto& [n, t] : curve)
            rep->metrics["ttr.n" + std::to_string(n)] = t;
        rep->artifacts["quantity"] = "quantity.csv";
    }
    return curve;
}

struct VariantOverlap {
    std::string label;
    std::vector<OverlapRecord> records;
    std::map<int, int64_t> histogram;
    int max_overlap = 0;
    double over10_ratio = 0;
    double bleu_mean = 0;
    double bleu_max = 0;
};

struct OverlapStudyResult {
    std::vector<VariantOverlap> variants;
};

// base vs hyperfit vs hyperfit+blocker: longest-overlap histograms plus
// dataset BLEU, with the blocker bound enforced on the blocked variant
template <class S>
OverlapStudyResult run_overlap_study(const ExperimentSpec& spec,
                                     RunReport* rep = nullptr) {
    spec.validate();
    require(spec.kind == "overlap", "run_overlap_study: spec kind is " + spec.kind);
    auto in = detail::load_inputs<S>(spec);
    ParamsT<S> hyper = load_checkpoint<S>(spec.hyperfit_checkpoint);

    NGramIndex block_index(in.set, spec.block_n);
    NGramIndex four_grams(in.set, 4);
    OverlapScanner scanner(in.set);

    GenerationConfig plain = spec.gen;
    GenerationConfig blocked = spec.gen;
    blocked.block = CitationBlockConfig{&block_index, spec.block_n, spec.block_defer};

    struct Variant {
        std::string label;
        const ParamsT<S>* params;
        const GenerationConfig* cfg;
    };
    const Variant variants[] = {{"base", &in.base, &plain},
                                {"hyperfit", &hyper, &plain},
                                {"hyperfit-blocked", &hyper, &blocked}};

    OverlapStudyResult out;
    for (const auto& v : variants) {
        VariantOverlap vo;
        vo.label = v.label;
        auto gens = detail::generate_all(*v.params, in.contexts, *v.cfg, in.tok);
        auto seqs = detail::outputs_of(gens);
        int64_t over10 = 0;
        for (const auto& s : seqs) {
            OverlapRecord r = scanner.scan(s);
            r.dataset_bleu_score = dataset_bleu(s, in.set, spec.ttr_window, &four_grams);
            vo.histogram[r.overlap]++;
            vo.max_overlap = std::max(vo.max_overlap, r.overlap);
            if (r.overlap > 10) ++over10;
            vo.bleu_mean += r.dataset_bleu_score;
            vo.bleu_max = std::max(vo.bleu_max, r.dataset_bleu_score);
            vo.records.push_back(std::move(r));
        }
        vo.bleu_mean /= double(seqs.size());
        vo.over10_ratio = double(over10) / double(seqs.size());

        if (v.cfg->block) {
            int bound = spec.block_n;
            if (spec.block_defer) bound += detail::max_word_token_length(seqs, in.tok);
            require(vo.max_overlap <= bound,
                    "run_overlap_study: blocked variant overlap " +
                        std::to_string(vo.max_overlap) + " exceeds bound " +
                        std::to_string(bound));
        }

        std::filesystem::path dir(spec.out_dir);
        write_file(dir / ("overlap_hist_" + v.label + ".csv"),
                   detail::hist_csv(vo.histogram));
        std::string jsonl;
        for (const auto& r : vo.records) jsonl += r.to_json().dump() + "\n";
        write_file(dir / ("overlap_records_" + v.label + ".jsonl"), jsonl);
        if (rep) {
            rep->metrics["max_overlap." + v.label] = double(vo.max_overlap);
            rep->metrics["over10." + v.label] = vo.over10_ratio;
            rep->metrics["dataset_bleu.mean." + v.label] = vo.bleu_mean;
            rep->metrics["dataset_bleu.max." + v.label] = vo.bleu_max;
            rep->artifacts["overlap_hist_" + v.label] = "overlap_hist_" + v.label + ".csv";
            rep->artifacts["overlap_records_" + v.label] =
                "overlap_records_" + v.label + ".jsonl";
        }
        out.variants.push_back(std::move(vo));
    }
    return out;
}

struct SharpnessRow {
    std::string label;
    double perplexity = 0;
    PredictionStats stats;
};

struct SharpnessReport {
    std::vector<SharpnessRow> rows;

    std::string to_csv() const {
        std::string out = "model,perplexity,entropy,at1,at3,at5\n";
        char buf[160];
        for (const auto& r : rows) {
            snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                     r.label.c_str(), r.perplexity, r.stats.entropy, r.stats.at1,
                     r.stats.at3, r.stats.at5);
            out += buf;
        }
        return out;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json rows_json = nlohmann::ordered_json::array();
        for (const auto& r : rows)
            rows_json.push_back({{"model", r.label},
                                 {"perplexity", r.perplexity},
                                 {"entropy", r.stats.entropy},
                                 {"at1", r.stats.at1},
                                 {"at3", r.stats.at3},
                                 {"at5", r.stats.at5}});
        return {{"rows", rows_json}};
    }
};

// prediction sharpness on the held-out originals, base vs hyperfit
template <class S>
SharpnessReport run_sharpness_study(const ExperimentSpec& spec,
                                    RunReport* rep = nullptr) {
    spec.validate();
    require(spec.kind == "sharpness", "run_sharpness_study: spec kind is " + spec.kind);
    auto in = detail::load_inputs<S>(spec);
    ParamsT<S> hyper = load_checkpoint<S>(spec.hyperfit_checkpoint);

    std::vector<ContextPair> pairs;
    for (const auto& s : in.eval_seqs) pairs.push_back(split_context(s, spec.context_len));

    SharpnessReport out;
    struct Variant {
        std::string label;
        const ParamsT<S>* params;
    };
    for (const auto& v : {Variant{"base", &in.base}, Variant{"hyperfit", &hyper}}) {
        SharpnessRow row;
        row.label = v.label;
        row.perplexity = perplexity(*v.params, in.eval_seqs, spec.train.n_threads);
        row.stats = prediction_stats(*v.params, pairs, spec.train.n_threads);
        out.rows.push_back(row);
        if (rep) {
            rep->metrics["perplexity." + v.label] = row.perplexity;
            rep->metrics["entropy." + v.label] = row.stats.entropy;
            rep->metrics["at1." + v.label] = row.stats.at1;
            rep->metrics["at3." + v.label] = row.stats.at3;
            rep->metrics["at5." + v.label] = row.stats.at5;
        }
    }
    write_file(std::filesystem::path(spec.out_dir) / "sharpness.csv", out.to_csv());
    if (rep) rep->artifacts["sharpness"] = "sharpness.csv";
    return out;
}

// trailing-window TTR against generation position, base vs hyperfit
template <class S>
std::map<std::string, std::vector<std::pair<int, double>>> run_decay_study(
    const ExperimentSpec& spec, RunReport* rep = nullptr) {
    spec.validate();
    require(spec.kind == "decay", "run_decay_study: spec kind is " + spec.kind);
    require(spec.gen.max_new_tokens >= spec.ttr_window,
            "run_decay_study: generations shorter than the TTR window");
    auto in = detail::load_inputs<S>(spec);
    ParamsT<S> hyper = load_checkpoint<S>(spec.hyperfit_checkpoint);
    if (spec.gen.max_new_tokens < 224 && rep)
        rep->warnings.push_back("decay generations shorter than the reference "
                                "protocol's 224 tokens");

    std::map<std::string, std::vector<std::pair<int, double>>> out;
    struct Variant {
        std::string label;
        const ParamsT<S>* params;
    };
    for (const auto& v : {Variant{"base", &in.base}, Variant{"hyperfit", &hyper}}) {
        auto gens = detail::generate_all(*v.params, in.contexts, spec.gen, in.tok);
        auto curve = ttr_vs_position(detail::outputs_of(gens), spec.ttr_window);
        std::string csv = "position,ttr\n";
        char buf[64];
        for (const auto& [pos, t] : curve) {
            snprintf(buf, sizeof buf, "%d,%.17g\n", pos, t);
            csv += buf;
        }
        write_file(std::filesystem::path(spec.out_dir) / ("decay_" + v.label + ".csv"),
                   csv);
        if (rep) {
            rep->metrics["decay_start." + v.label] = curve.front().second;
            rep->metrics["decay_end." + v.label] = curve.back().second;
            rep->artifacts["decay_" + v.label] = "decay_" + v.label + ".csv";
        }
        out[v.label] = std::move(curve);
    }
    return out;
}

// one entry point: dispatch on kind, time the run, write report + sidecar
template <class S>
RunReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    auto t0 = std::chrono::steady_clock::now();
    RunReport rep;
    rep.kind = spec.kind;
    rep.spec_hash = spec.hash();
    rep.environment = environment_stamp();

    if (spec.kind == "curve") {
        rep = run_curve<S>(spec);
    } else if (spec.kind == "determinacy") {
        run_determinacy<S>(spec, &rep);
    } else if (spec.kind == "quantity") {
        run_quantity_sweep<S>(spec, &rep);
    } else if (spec.kind == "overlap") {
        run_overlap_study<S>(spec, &rep);
    } else if (spec.kind == "sharpness") {
        run_sharpness_study<S>(spec, &rep);
    } else {
        run_decay_study<S>(spec, &rep);
    }

    rep.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.created_at = utc_timestamp();
    std::filesystem::path out(spec.out_dir);
    write_file(out / "spec.json", spec.to_json().dump(2) + "\n");
    write_run_report(rep, out);
    return rep;
}

// machine-readable description of the spec format, printable from the CLI
inline nlohmann::ordered_json experiment_spec_schema() {
    nlohmann::ordered_json s;
    s["$schema"] = "http://json-schema.org/draft-07/schema#";
    s["title"] = "ExperimentSpec";
    s["type"] = "object";
    s["required"] = {"kind", "base_checkpoint", "hyperfit_set", "eval_set",
                     "tokenizer", "out_dir"};
    nlohmann::ordered_json p;
    p["kind"] = {{"type", "string"}, {"enum", ExperimentSpec::kinds()}};
    p["base_checkpoint"] = {{"type", "string"}, {"description", "path to a checkpoint"}};
    p["hyperfit_checkpoint"] = {
        {"type", "string"},
        {"description", "path to a hyperfitted checkpoint; required for overlap, "
                        "sharpness and decay"}};
    p["hyperfit_set"] = {{"type", "string"}, {"description", "path to a .hfs sample set"}};
    p["eval_set"] = {{"type", "string"},
                     {"description", "path to a .hfs set of held-out sequences"}};
    p["tokenizer"] = {{"type", "string"}, {"description", "path to a tokenizer json"}};
    p["out_dir"] = {{"type", "string"}};
    p["train"] = {{"type", "object"},
                  {"description", "epochs, lr, batch_size, weight_decay, beta1, beta2, "
                                  "adam_eps, seed, stop_threshold, n_threads"}};
    p["gen"] = {{"type", "object"},
                {"description", "strategy (greedy|sample), temperature, top_p, top_k, "
                                "max_new_tokens, seed"}};
    p["context_len"] = {{"type", "integer"}, {"minimum", 1}, {"default", 32}};
    p["n_eval"] = {{"type", "integer"}, {"minimum", 1}, {"default", 100}};
    p["ttr_window"] = {{"type", "integer"}, {"minimum", 1}, {"default", 96}};
    p["quantity_counts"] = {{"type", "array"},
                            {"items", {{"type", "integer"}}},
                            {"default", {8, 16}}};
    p["constant_updates"] = {{"type", "integer"}, {"default", 5000}};
    p["block_n"] = {{"type", "integer"}, {"default", 5}};
    p["block_defer"] = {{"type", "boolean"}, {"default", true}};
    p["variant_sets"] = {{"type", "array"},
                         {"items", {{"type", "string"}}},
                         {"description", "determinacy only: prebuilt permutation sets; "
                                         "built in-run when empty"}};
    p["seed"] = {{"type", "integer"}, {"default", 0}};
    s["properties"] = p;
    return s;
}

} // namespace hfl
