#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hfl/corpus.hpp"
#include "hfl/decoder.hpp"
#include "hfl/experiments.hpp"
#include "hfl/metrics.hpp"
#include "hfl/model.hpp"
#include "hfl/report.hpp"
#include "hfl/tokenizer.hpp"
#include "hfl/trainer.hpp"

// The hflab command line: ingest, train, hyperfit, generate, analyze,
// experiment, report. Exit 0 on success, 1 on runtime failure, 2 on usage
// errors. Every command writes a resolved config.json with its hash.

namespace hfl {

struct GlobalConfig {
    std::string out_root = "out";
    std::string numeric = "f32";  // f32 | f64
    int64_t seed = 0;
    int n_threads = 1;

    void validate() const {
        require(numeric == "f32" || numeric == "f64",
                "GlobalConfig: numeric must be f32 or f64");
        require(n_threads >= 1, "GlobalConfig: n_threads must be >= 1");
        require(!out_root.empty(), "GlobalConfig: out_root empty");
    }

    nlohmann::ordered_json to_json() const {
        return {{"out_root", out_root},
                {"numeric", numeric},
                {"seed", seed},
                {"n_threads", n_threads}};
    }

    static GlobalConfig from_json(const nlohmann::json& j) {
        GlobalConfig g;
        g.out_root = j.value("out_root", g.out_root);
        g.numeric = j.value("numeric", g.numeric);
        g.seed = j.value("seed", g.seed);
        g.n_threads = j.value("n_threads", g.n_threads);
        return g;
    }

    std::string hash() const { return to_hex(fnv1a64(nlohmann::json(to_json()).dump())); }
};

namespace detail {

inline std::filesystem::path resolve_out(const GlobalConfig& g, const std::string& out) {
    std::filesystem::path p(out);
    return p.is_absolute() ? p : std::filesystem::path(g.out_root) / p;
}

// resolved invocation record; hash covers global config plus command args
inline void write_config_sidecar(const GlobalConfig& g, const std::string& command,
                                 const nlohmann::ordered_json& args,
                                 const std::filesystem::path& dir) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["global"] = g.to_json();
    j["args"] = args;
    j["config_hash"] = to_hex(fnv1a64(nlohmann::json(j).dump()));
    write_file(dir / "config.json", j.dump(2) + "\n");
}

template <class F>
void with_scalar(const GlobalConfig& g, F&& f) {
    if (g.numeric == "f32")
        f(float{});
    else
        f(double{});
}

// generated bytes need not be valid UTF-8; json text fields get replacement
inline std::string json_safe_dump(const nlohmann::ordered_json& j) {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline Tokenizer load_tokenizer(const std::string& path) {
    return Tokenizer::from_json(nlohmann::json::parse(read_file(path)));
}

struct GenLine {
    std::vector<TokenId> tokens;
    std::vector<double> step_entropy;
    int64_t blocked_steps = 0;
};

inline std::vector<GenLine> read_gens_jsonl(const std::string& path) {
    std::string text = read_file(path);
    std::vector<GenLine> out;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        GenLine g;
        g.tokens = j.at("tokens").get<std::vector<TokenId>>();
        if (j.contains("steps"))
            for (const auto& s : j.at("steps")) {
                g.step_entropy.push_back(s.at("entropy").get<double>());
                if (s.value("blocked", false)) ++g.blocked_steps;
            }
        out.push_back(std::move(g));
    }
    require(!out.empty(), "no generations in " + path);
    return out;
}

} // namespace detail

// args without the program name; returns the process exit code
inline int dispatch(std::vector<std::string> args) {
    CLI::App app{"desk-scale hyperfitting laboratory"};
    app.require_subcommand(1);

    GlobalConfig g;
    std::string config_path;
    app.add_option("--config", config_path, "global config json");
    auto* opt_out_root =
        app.add_option("--out-root", g.out_root, "output root directory")
            ->envname("HFL_OUT");
    auto* opt_numeric = app.add_option("--numeric", g.numeric, "f32 or f64");
    auto* opt_seed = app.add_option("--seed", g.seed, "global seed");
    auto* opt_threads = app.add_option("--threads", g.n_threads, "worker threads");

    // ingest
    auto* c_ingest = app.add_subcommand("ingest", "tokenize a corpus and draw sample sets");
    std::string in_text, in_mode = "bytes", in_out = "ingest";
    int in_bpe_vocab = 512, in_n = 16, in_len = 256, in_eval_n = 0;
    double in_split = 0.5;
    c_ingest->add_option("--text", in_text, "input text file")->required();
    c_ingest->add_option("--mode", in_mode, "bytes, chars or bpe");
    c_ingest->add_option("--bpe-vocab", in_bpe_vocab, "bpe target vocabulary");
    c_ingest->add_option("--n", in_n, "hyperfit sample count");
    c_ingest->add_option("--len", in_len, "sample length in tokens");
    c_ingest->add_option("--eval-n", in_eval_n, "held-out sample count (0 = none)");
    c_ingest->add_option("--split", in_split, "fraction of stream for hyperfit sampling");
    c_ingest->add_option("--out", in_out, "output directory under out root");

    // train
    auto* c_train = app.add_subcommand("train", "pre-train a model on a token stream");
    std::string tr_text, tr_tok, tr_out = "train";
    int tr_layers = 2, tr_heads = 4, tr_dmodel = 128, tr_dff = 512, tr_ctx = 256;
    int tr_epochs = 4, tr_batch = 16, tr_sample_len = 256;
    double tr_lr = 6e-4;
    c_train->add_option("--text", tr_text, "training text file")->required();
    c_train->add_option("--tokenizer", tr_tok, "tokenizer json")->required();
    c_train->add_option("--layers", tr_layers, "transformer layers");
    c_train->add_option("--heads", tr_heads, "attention heads");
    c_train->add_option("--d-model", tr_dmodel, "model width");
    c_train->add_option("--d-ff", tr_dff, "mlp width");
    c_train->add_option("--ctx", tr_ctx, "context length");
    c_train->add_option("--epochs", tr_epochs, "training epochs");
    c_train->add_option("--lr", tr_lr, "learning rate");
    c_train->add_option("--batch", tr_batch, "batch size");
    c_train->add_option("--sample-len", tr_sample_len, "window length");
    c_train->add_option("--out", tr_out, "output directory under out root");

    // hyperfit
    auto* c_hyper = app.add_subcommand("hyperfit", "fit a tiny sample set to near-zero loss");
    std::string hf_ckpt, hf_set, hf_val, hf_preset = "desk", hf_out = "hyperfit";
    int hf_epochs = 0, hf_batch = 0;
    double hf_lr = 0, hf_stop = 0;
    c_hyper->add_option("--checkpoint", hf_ckpt, "base checkpoint")->required();
    c_hyper->add_option("--set", hf_set, "hyperfit set (.hfs)")->required();
    c_hyper->add_option("--val-set", hf_val, "held-out set for the loss curve");
    c_hyper->add_option("--preset", hf_preset, "desk or paper");
    auto* o_hf_epochs = c_hyper->add_option("--epochs", hf_epochs, "override epochs");
    auto* o_hf_lr = c_hyper->add_option("--lr", hf_lr, "override learning rate");
    auto* o_hf_batch = c_hyper->add_option("--batch", hf_batch, "override batch size");
    auto* o_hf_stop = c_hyper->add_option("--stop", hf_stop, "override stop threshold");
    c_hyper->add_option("--out", hf_out, "output directory under out root");

    // generate
    auto* c_gen = app.add_subcommand("generate", "decode continuations, optionally blocked");
    std::string ge_ckpt, ge_tok, ge_ctx_text, ge_ctx_file, ge_eval, ge_block_set,
        ge_strategy = "greedy", ge_out = "generate";
    int ge_n = 10, ge_ctx_len = 32, ge_max_new = 224, ge_top_k = 50, ge_block_n = 5;
    double ge_temp = 0.7, ge_top_p = 0.9;
    bool ge_no_defer = false;
    c_gen->add_option("--checkpoint", ge_ckpt, "model checkpoint")->required();
    c_gen->add_option("--tokenizer", ge_tok, "tokenizer json")->required();
    c_gen->add_option("--context-text", ge_ctx_text, "literal context text");
    c_gen->add_option("--context-file", ge_ctx_file, "context text file");
    c_gen->add_option("--eval-set", ge_eval, "draw contexts from this set");
    c_gen->add_option("--n", ge_n, "generations when using --eval-set");
    c_gen->add_option("--context-len", ge_ctx_len, "context tokens from each eval sample");
    c_gen->add_option("--strategy", ge_strategy, "greedy or sample");
    c_gen->add_option("--temperature", ge_temp, "sampling temperature");
    c_gen->add_option("--top-p", ge_top_p, "nucleus mass");
    c_gen->add_option("--top-k", ge_top_k, "top-k cutoff");
    c_gen->add_option("--max-new", ge_max_new, "tokens to generate");
    c_gen->add_option("--block-set", ge_block_set, "enable citation blocking against this set");
    c_gen->add_option("--block-n", ge_block_n, "blocker n-gram length");
    c_gen->add_flag("--no-defer", ge_no_defer, "block mid-word instead of at word ends");
    c_gen->add_option("--out", ge_out, "output directory under out root");

    // analyze
    auto* c_ana = app.add_subcommand("analyze", "metrics over generated sequences");
    std::string an_gens, an_set, an_out = "analyze", an_model_id, an_dataset_id;
    int an_window = 96;
    c_ana->add_option("--gens", an_gens, "generations jsonl")->required();
    c_ana->add_option("--set", an_set, "hyperfit set for overlap metrics")->required();
    c_ana->add_option("--window", an_window, "TTR / dataset-BLEU window");
    c_ana->add_option("--model-id", an_model_id, "label recorded in the report");
    c_ana->add_option("--dataset-id", an_dataset_id, "label recorded in the report");
    c_ana->add_option("--out", an_out, "output directory under out root");

    // experiment
    auto* c_exp = app.add_subcommand("experiment", "run a scripted protocol");
    auto* c_exp_run = c_exp->add_subcommand("run", "execute a spec");
    auto* c_exp_schema = c_exp->add_subcommand("schema", "print the spec schema");
    c_exp->require_subcommand(1);
    std::string ex_spec;
    c_exp_run->add_option("spec", ex_spec, "experiment spec json")->required();

    // report
    auto* c_rep = app.add_subcommand("report", "re-emit a report in another format");
    std::string rp_in, rp_format = "markdown", rp_out = "report";
    c_rep->add_option("--in", rp_in, "metrics.json or report.json")->required();
    c_rep->add_option("--format", rp_format, "json, csv or markdown");
    c_rep->add_option("--out", rp_out, "output directory under out root");

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (!config_path.empty()) {
            GlobalConfig from_file = GlobalConfig::from_json(
                nlohmann::json::parse(read_file(config_path)));
            if (opt_out_root->count() == 0 && !std::getenv("HFL_OUT"))
                g.out_root = from_file.out_root;
            if (opt_numeric->count() == 0) g.numeric = from_file.numeric;
            if (opt_seed->count() == 0) g.seed = from_file.seed;
            if (opt_threads->count() == 0) g.n_threads = from_file.n_threads;
        }
        g.validate();

        if (*c_ingest) {
            std::string raw = read_file(in_text);
            Tokenizer tok;
            if (in_mode == "bytes")
                tok = Tokenizer::byte_tokenizer();
            else if (in_mode == "chars")
                tok = Tokenizer::char_tokenizer(raw);
            else if (in_mode == "bpe")
                tok = Tokenizer::train_bpe(raw, in_bpe_vocab);
            else
                fail("unknown tokenizer mode '" + in_mode + "'");
            require(in_split > 0 && in_split <= 1, "--split must be in (0, 1]");

            TokenSequence stream =
                ingest(raw, tok, std::filesystem::path(in_text).filename().string());
            auto cut = size_t(double(stream.size()) * in_split);
            TokenSequence head, tail;
            head.source_tag = stream.source_tag + ":head";
            tail.source_tag = stream.source_tag + ":tail";
            head.tokens.assign(stream.tokens.begin(), stream.tokens.begin() + int64_t(cut));
            tail.tokens.assign(stream.tokens.begin() + int64_t(cut), stream.tokens.end());

            auto dir = detail::resolve_out(g, in_out);
            write_file(dir / "tokenizer.json", tok.to_json().dump(2) + "\n");
            HyperfitSet set = sample_sequences(head, in_n, in_len, g.seed);
            set.vocab_size = tok.vocab_size();
            save_hyperfit_set(set, dir / "hyperfit.hfs");
            if (in_eval_n > 0) {
                require(in_split < 1, "--eval-n needs --split < 1");
                HyperfitSet ev = sample_sequences(
                    tail, in_eval_n, in_len,
                    int64_t(derive_seed(uint64_t(g.seed), "ingest-eval")));
                ev.vocab_size = tok.vocab_size();
                save_hyperfit_set(ev, dir / "eval.hfs");
            }
            detail::write_config_sidecar(g, "ingest",
                                         {{"text", in_text},
                                          {"mode", in_mode},
                                          {"n", in_n},
                                          {"len", in_len},
                                          {"eval_n", in_eval_n},
                                          {"split", in_split}},
                                         dir);
            std::cout << "wrote " << dir.string() << "\n";
        } else if (*c_train) {
            Tokenizer tok = detail::load_tokenizer(tr_tok);
            TokenSequence stream = ingest(read_file(tr_text), tok);
            ModelConfig mc;
            mc.n_layers = tr_layers;
            mc.n_heads = tr_heads;
            mc.d_model = tr_dmodel;
            mc.d_ff = tr_dff;
            mc.max_ctx = tr_ctx;
            mc.vocab_size = tok.vocab_size();
            TrainConfig tc;
            tc.epochs = tr_epochs;
            tc.lr = tr_lr;
            tc.batch_size = tr_batch;
            tc.seed = g.seed;
            tc.n_threads = g.n_threads;
            auto dir = detail::resolve_out(g, tr_out);
            detail::with_scalar(g, [&](auto tag) {
                using S = decltype(tag);
                auto params = init<S>(mc, uint64_t(g.seed));
                auto res = pretrain(std::move(params), stream, tc, tr_sample_len);
                save_checkpoint(res.params, dir / "base.ckpt", res.updates,
                                {"init:" + std::to_string(g.seed)});
                write_file(dir / "pretrain_curve.csv", res.curve.to_csv());
                std::cout << "final val loss "
                          << res.curve.rows.back().val_loss << "\n";
            });
            detail::write_config_sidecar(g, "train",
                                         {{"text", tr_text},
                                          {"tokenizer", tr_tok},
                                          {"layers", tr_layers},
                                          {"heads", tr_heads},
                                          {"d_model", tr_dmodel},
                                          {"d_ff", tr_dff},
                                          {"ctx", tr_ctx},
                                          {"epochs", tr_epochs},
                                          {"lr", tr_lr},
                                          {"batch", tr_batch},
                                          {"sample_len", tr_sample_len}},
                                         dir);
            std::cout << "wrote " << dir.string() << "\n";
        } else if (*c_hyper) {
            TrainConfig tc = hf_preset == "paper"  ? TrainConfig::paper_preset()
                             : hf_preset == "desk" ? TrainConfig::desk_preset()
                                                   : (fail("unknown preset '" + hf_preset +
                                                           "'"),
                                                      TrainConfig{});
            if (o_hf_epochs->count()) tc.epochs = hf_epochs;
            if (o_hf_lr->count()) tc.lr = hf_lr;
            if (o_hf_batch->count()) tc.batch_size = hf_batch;
            if (o_hf_stop->count()) tc.stop_threshold = hf_stop;
            tc.seed = g.seed;
            tc.n_threads = g.n_threads;
            HyperfitSet set = load_hyperfit_set(hf_set);
            auto dir = detail::resolve_out(g, hf_out);
            detail::with_scalar(g, [&](auto tag) {
                using S = decltype(tag);
                auto params = load_checkpoint<S>(hf_ckpt);
                EvalHooks<S> hooks;
                std::vector<TokenSequence> val_seqs;
                if (!hf_val.empty()) {
                    val_seqs = load_hyperfit_set(hf_val).samples;
                    hooks.val_loss = [&](const ParamsT<S>& p) {
                        return detail::mean_nll(p, val_seqs, tc.n_threads);
                    };
                }
                auto res = hyperfit(std::move(params), set, tc, hooks);
                save_checkpoint(res.params, dir / "hyperfit.ckpt", res.updates,
                                {"base:" + hf_ckpt, "set:" + set.order_id});
                write_file(dir / "curve.csv", res.curve.to_csv());
                std::cout << "final train loss " << res.curve.rows.back().train_loss
                          << " after " << res.updates << " updates"
                          << (res.diverged ? " (diverged, reverted)" : "") << "\n";
            });
            detail::write_config_sidecar(g, "hyperfit",
                                         {{"checkpoint", hf_ckpt},
                                          {"set", hf_set},
                                          {"val_set", hf_val},
                                          {"preset", hf_preset},
                                          {"epochs", tc.epochs},
                                          {"lr", tc.lr},
                                          {"batch", tc.batch_size},
                                          {"stop", tc.stop_threshold}},
                                         dir);
            std::cout << "wrote " << dir.string() << "\n";
        } else if (*c_gen) {
            Tokenizer tok = detail::load_tokenizer(ge_tok);
            GenerationConfig gc;
            require(ge_strategy == "greedy" || ge_strategy == "sample",
                    "unknown strategy '" + ge_strategy + "'");
            gc.strategy = ge_strategy == "greedy" ? Strategy::greedy : Strategy::sample;
            if (gc.strategy == Strategy::sample) {
                gc.temperature = ge_temp;
                gc.top_p = ge_top_p;
                gc.top_k = ge_top_k;
            }
            gc.max_new_tokens = ge_max_new;
            gc.seed = g.seed;

            std::vector<TokenSequence> contexts;
            if (!ge_ctx_text.empty()) {
                contexts.push_back(ingest(ge_ctx_text, tok, "context"));
            } else if (!ge_ctx_file.empty()) {
                contexts.push_back(ingest(read_file(ge_ctx_file), tok, "context"));
            } else if (!ge_eval.empty()) {
                HyperfitSet ev = load_hyperfit_set(ge_eval);
                require(int(ev.size()) >= ge_n,
                        "eval set smaller than requested --n " + std::to_string(ge_n));
                for (int i = 0; i < ge_n; ++i)
                    contexts.push_back(split_context(ev.samples[size_t(i)], ge_ctx_len).context);
            } else {
                fail("need one of --context-text, --context-file, --eval-set");
            }

            std::optional<NGramIndex> block_index;
            std::optional<HyperfitSet> block_set;
            if (!ge_block_set.empty()) {
                block_set = load_hyperfit_set(ge_block_set);
                block_index.emplace(*block_set, ge_block_n);
                gc.block = CitationBlockConfig{&*block_index, ge_block_n, !ge_no_defer};
            }

            auto dir = detail::resolve_out(g, ge_out);
            detail::with_scalar(g, [&](auto tag) {
                using S = decltype(tag);
                auto params = load_checkpoint<S>(ge_ckpt);
                std::string jsonl;
                for (size_t i = 0; i < contexts.size(); ++i) {
                    GenerationConfig one = gc;
                    one.seed = int64_t(derive_seed(uint64_t(g.seed),
                                                   "gen-" + std::to_string(i)));
                    auto res = generate(params, contexts[i], one, tok);
                    nlohmann::ordered_json line;
                    line["context_text"] = tok.decode(contexts[i].tokens);
                    line["text"] = tok.decode(res.output.tokens);
                    line["tokens"] = res.output.tokens;
                    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
                    for (const auto& st : res.trace.steps)
                        steps.push_back({{"token", st.token},
                                         {"entropy", st.entropy},
                                         {"at1", st.at1},
                                         {"rank", st.rank},
                                         {"blocked", st.blocked},
                                         {"n_zeroed", st.n_zeroed}});
                    line["steps"] = steps;
                    jsonl += detail::json_safe_dump(line) + "\n";
                }
                write_file(dir / "gens.jsonl", jsonl);
            });
            detail::write_config_sidecar(g, "generate",
                                         {{"checkpoint", ge_ckpt},
                                          {"strategy", ge_strategy},
                                          {"n", int(contexts.size())},
                                          {"max_new", ge_max_new},
                                          {"block_set", ge_block_set},
                                          {"block_n", ge_block_n},
                                          {"defer", !ge_no_defer}},
                                         dir);
            std::cout << "wrote " << dir.string() << "\n";
        } else if (*c_ana) {
            auto gens = detail::read_gens_jsonl(an_gens);
            HyperfitSet set = load_hyperfit_set(an_set);
            NGramIndex four_grams(set, 4);
            OverlapScanner scanner(set);

            std::vector<TokenSequence> seqs;
            for (auto& gl : gens) {
                TokenSequence s;
                s.tokens = gl.tokens;
                s.source_tag = "generated";
                seqs.push_back(std::move(s));
            }

            MetricsReport rep;
            rep.model_id = an_model_id;
            rep.dataset_id = an_dataset_id;
            rep.config_hash = g.hash();
            std::vector<double> v_ttr, v_overlap, v_bleu, v_entropy;
            std::map<int, int64_t> hist;
            for (size_t i = 0; i < seqs.size(); ++i) {
                v_ttr.push_back(ttr(seqs[i], an_window));
                OverlapRecord r = scanner.scan(seqs[i]);
                v_overlap.push_back(double(r.overlap));
                hist[r.overlap]++;
                v_bleu.push_back(dataset_bleu(seqs[i], set, an_window, &four_grams));
                if (!gens[i].step_entropy.empty()) {
                    double e = 0;
                    for (double x : gens[i].step_entropy) e += x;
                    v_entropy.push_back(e / double(gens[i].step_entropy.size()));
                }
            }
            rep.add_metric("ttr", v_ttr);
            rep.add_metric("overlap", v_overlap);
            rep.add_metric("dataset_bleu", v_bleu);
            if (!v_entropy.empty()) rep.add_metric("entropy", v_entropy);
            if (seqs.size() >= 2) {
                auto [sb_mean, sb_max] = self_bleu(seqs);
                rep.add_scalar("self_bleu.mean", sb_mean);
                rep.add_scalar("self_bleu.max", sb_max);
            }
            require(rep.aggregates_consistent(), "metrics report failed self-check");

            auto dir = detail::resolve_out(g, an_out);
            emit_report(rep, ReportFormat::json, dir);
            emit_report(rep, ReportFormat::csv, dir);
            write_file(dir / "overlap_hist.csv", detail::hist_csv(hist));
            detail::write_config_sidecar(g, "analyze",
                                         {{"gens", an_gens},
                                          {"set", an_set},
                                          {"window", an_window}},
                                         dir);
            std::cout << "wrote " << dir.string() << "\n";
        } else if (*c_exp) {
            if (*c_exp_schema) {
                std::cout << experiment_spec_schema().dump(2) << "\n";
            } else {
                ExperimentSpec spec = ExperimentSpec::from_json(
                    nlohmann::json::parse(read_file(ex_spec)));
                if (!std::filesystem::path(spec.out_dir).is_absolute())
                    spec.out_dir = detail::resolve_out(g, spec.out_dir).string();
                detail::with_scalar(g, [&](auto tag) {
                    using S = decltype(tag);
                    RunReport rep = run_experiment<S>(spec);
                    std::cout << "wrote " << spec.out_dir << " ("
                              << rep.metrics.size() << " metrics)\n";
                });
            }
        } else if (*c_rep) {
            auto j = nlohmann::json::parse(read_file(rp_in));
            auto dir = detail::resolve_out(g, rp_out);
            ReportFormat fmt = parse_format(rp_format);
            if (j.contains("per_sequence") && j.contains("aggregates")) {
                emit_report(MetricsReport::from_json(j), fmt, dir);
            } else if (j.contains("spec_hash") && j.contains("metrics")) {
                emit_report(RunReport::from_json(j), fmt, dir);
            } else {
                fail(rp_in + " is neither a metrics report nor a run report");
            }
            std::cout << "wrote " << dir.string() << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

inline int dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(std::move(args));
}

} // namespace hfl
