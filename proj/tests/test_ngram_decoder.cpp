#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "hfl/decoder.hpp"
#include "hfl/ngram_index.hpp"
#include "hfl/rng.hpp"
#include "hfl/trainer.hpp"
#include "support/oracle_overlap.hpp"

namespace {

hfl::HyperfitSet random_set(size_t n, int len, int vocab, uint64_t seed) {
    hfl::HyperfitSet set;
    set.sample_len = len;
    set.seed = int64_t(seed);
    set.vocab_size = vocab;
    hfl::Rng rng(seed);
    for (size_t i = 0; i < n; ++i) {
        hfl::TokenSequence s;
        s.source_tag = "toy";
        for (int t = 0; t < len; ++t) s.tokens.push_back(hfl::TokenId(rng.below(uint64_t(vocab))));
        set.samples.push_back(std::move(s));
    }
    return set;
}

hfl::VocabDistribution dist_of(std::vector<double> p) {
    hfl::VocabDistribution d;
    d.probs = Eigen::Map<Eigen::VectorXd>(p.data(), Eigen::Index(p.size()));
    return d;
}

}  // namespace

TEST_CASE("ngram index agrees with a naive position scan") {
    for (uint64_t seed = 1; seed <= 25; ++seed) {
        auto set = random_set(3, 18, 5, seed);  // tiny vocab forces repeats
        for (int n : {1, 2, 3}) {
            hfl::NGramIndex idx(set, n);
            hfl::Rng rng(seed * 100 + uint64_t(n));
            for (int probe = 0; probe < 30; ++probe) {
                std::vector<hfl::TokenId> gram(size_t(n), 0);
                for (auto& g : gram) g = hfl::TokenId(rng.below(5));

                std::vector<std::pair<int, int>> naive;
                for (int s = 0; s < int(set.size()); ++s) {
                    const auto& toks = set.samples[size_t(s)].tokens;
                    for (int o = 0; o + n <= int(toks.size()); ++o)
                        if (std::equal(gram.begin(), gram.end(), toks.begin() + o))
                            naive.push_back({s, o});
                }
                auto got = idx.occurrences(gram);
                REQUIRE(got.size() == naive.size());
                for (size_t k = 0; k < got.size(); ++k) {
                    CHECK(got[k].sample == naive[k].first);
                    CHECK(got[k].offset == naive[k].second);
                }
                CHECK(idx.contains(gram) == !naive.empty());

                std::set<hfl::TokenId> expect;
                for (auto [s, o] : naive)
                    if (o + n < set.sample_len)
                        expect.insert(set.samples[size_t(s)].tokens[size_t(o + n)]);
                auto conts = idx.continuations(gram);
                CHECK(std::is_sorted(conts.begin(), conts.end()));
                CHECK(std::set<hfl::TokenId>(conts.begin(), conts.end()) == expect);
                CHECK(std::adjacent_find(conts.begin(), conts.end()) == conts.end());
            }
        }
    }
}

TEST_CASE("ngram index validates its inputs") {
    auto set = random_set(2, 8, 6, 3);
    CHECK_THROWS(hfl::NGramIndex(set, 0));
    hfl::NGramIndex idx(set, 2);
    std::vector<hfl::TokenId> wrong{1, 2, 3};
    CHECK_THROWS_WITH(idx.occurrences(wrong),
                      Catch::Matchers::ContainsSubstring("length"));
    CHECK(idx.n() == 2);
    CHECK(idx.sample_len() == 8);
    CHECK(idx.sample_count() == 2);
}

TEST_CASE("gram at the very end of a sample has no continuation") {
    hfl::HyperfitSet set;
    set.sample_len = 4;
    set.vocab_size = 10;
    set.samples.push_back({{1, 2, 3, 4}, "toy"});
    hfl::NGramIndex idx(set, 2);
    std::vector<hfl::TokenId> tail{3, 4};
    CHECK(idx.contains(tail));
    CHECK(idx.continuations(tail).empty());
    std::vector<hfl::TokenId> mid{2, 3};
    CHECK(idx.continuations(mid) == std::vector<hfl::TokenId>{4});
}

TEST_CASE("logits to distribution matches hand softmax") {
    Eigen::RowVector2d row(0.0, std::log(2.0));
    auto d = hfl::logits_to_distribution(row, 1.0);
    CHECK(std::abs(d.probs[0] - 1.0 / 3.0) < 1e-12);
    CHECK(std::abs(d.probs[1] - 2.0 / 3.0) < 1e-12);
    CHECK(std::abs(d.probs.sum() - 1.0) < 1e-12);

    auto sharp = hfl::logits_to_distribution(row, 0.25);
    CHECK(sharp.probs[1] > d.probs[1]);
    CHECK(sharp.argmax() == d.argmax());

    Eigen::RowVector2d bad(0.0, std::numeric_limits<double>::infinity());
    CHECK_THROWS(hfl::logits_to_distribution(bad, 1.0));
    CHECK_THROWS(hfl::logits_to_distribution(row, 0.0));
    CHECK_THROWS(hfl::logits_to_distribution(row, -1.0));
}

TEST_CASE("distribution statistics behave on hand cases") {
    auto uniform = dist_of({0.25, 0.25, 0.25, 0.25});
    CHECK(std::abs(uniform.entropy() - std::log(4.0)) < 1e-12);
    CHECK(uniform.argmax() == 0);  // tie goes to the lowest id
    CHECK(uniform.top_mass(10) == 1.0);
    CHECK(std::abs(uniform.top_mass(2) - 0.5) < 1e-12);
    CHECK(uniform.rank_of(0) == 1);
    CHECK(uniform.rank_of(3) == 4);  // ties ordered by id

    auto peaked = dist_of({0.1, 0.7, 0.2});
    CHECK(peaked.argmax() == 1);
    CHECK(peaked.rank_of(1) == 1);
    CHECK(peaked.rank_of(2) == 2);
    CHECK(peaked.rank_of(0) == 3);
    peaked.validate();

    CHECK_THROWS(dist_of({1.0}).validate());
    CHECK_THROWS(dist_of({0.5, 0.4}).validate());
    CHECK_THROWS(dist_of({1.5, -0.5}).validate());
}

TEST_CASE("nucleus filter keeps the smallest prefix reaching top_p") {
    auto d = dist_of({0.5, 0.3, 0.15, 0.05});

    auto kept = hfl::nucleus_filter(d, 0.9, 50);
    double mass = 0.5 + 0.3 + 0.15;
    CHECK(kept.probs[0] == 0.5 / mass);
    CHECK(kept.probs[1] == 0.3 / mass);
    CHECK(kept.probs[2] == 0.15 / mass);
    CHECK(kept.probs[3] == 0.0);

    auto topk = hfl::nucleus_filter(d, 0.9, 2);
    CHECK(topk.probs[0] == 0.5 / (0.5 + 0.3));
    CHECK(topk.probs[1] == 0.3 / (0.5 + 0.3));
    CHECK(topk.probs[2] == 0.0);

    auto all = hfl::nucleus_filter(d, 1.0, 50);
    for (int i = 0; i < 4; ++i) CHECK(all.probs[i] > 0);

    auto tight = hfl::nucleus_filter(d, 0.4, 50);
    CHECK(tight.probs[0] == 1.0);
    CHECK(tight.probs.sum() == 1.0);

    CHECK_THROWS(hfl::nucleus_filter(d, 0.0, 50));
    CHECK_THROWS(hfl::nucleus_filter(d, 1.5, 50));
    CHECK_THROWS(hfl::nucleus_filter(d, 0.5, 0));
}

TEST_CASE("nucleus filter support is always inside the original support") {
    hfl::Rng rng(91);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> raw(16);
        for (auto& v : raw) v = rng.next_double() + 1e-6;
        double s = 0;
        for (double v : raw) s += v;
        for (auto& v : raw) v /= s;
        auto d = dist_of(raw);
        double p = 0.1 + 0.9 * rng.next_double();
        int k = 1 + int(rng.below(16));
        auto out = hfl::nucleus_filter(d, p, k);
        out.validate();
        int support = 0;
        for (int i = 0; i < 16; ++i) {
            if (out.probs[i] > 0) {
                ++support;
                CHECK(d.probs[i] > 0);
            }
        }
        CHECK(support <= k);
    }
}

TEST_CASE("citation blocker zeroes dataset continuations and renormalizes") {
    hfl::HyperfitSet set;
    set.sample_len = 6;
    set.vocab_size = 6;
    set.samples.push_back({{0, 1, 2, 3, 4, 5}, "toy"});
    hfl::NGramIndex idx(set, 2);
    hfl::CitationBlockConfig cfg{&idx, 2, true};

    auto d = dist_of({0.1, 0.1, 0.4, 0.2, 0.1, 0.1});
    std::vector<hfl::TokenId> recent{0, 1};  // continuation in the set: 2

    hfl::BlockEvent ev;
    auto out = hfl::apply_citation_block(d, recent, cfg, true, &ev);
    CHECK(ev.matched);
    CHECK(ev.blocked);
    CHECK_FALSE(ev.deferred);
    CHECK(ev.n_zeroed == 1);
    CHECK(ev.gram == recent);
    CHECK(out.probs[2] == 0.0);
    CHECK(std::abs(out.probs.sum() - 1.0) < 1e-12);
    CHECK(std::abs(out.probs[3] - 0.2 / 0.6) < 1e-12);
    out.validate();
}

TEST_CASE("citation blocker leaves unmatched grams alone") {
    hfl::HyperfitSet set;
    set.sample_len = 6;
    set.vocab_size = 6;
    set.samples.push_back({{0, 1, 2, 3, 4, 5}, "toy"});
    hfl::NGramIndex idx(set, 2);
    hfl::CitationBlockConfig cfg{&idx, 2, true};

    auto d = dist_of({0.1, 0.1, 0.4, 0.2, 0.1, 0.1});
    std::vector<hfl::TokenId> recent{5, 0};  // not a set bigram
    hfl::BlockEvent ev;
    auto out = hfl::apply_citation_block(d, recent, cfg, true, &ev);
    CHECK_FALSE(ev.matched);
    CHECK(out.probs == d.probs);

    // gram at sample end matches but has nothing to block
    std::vector<hfl::TokenId> tail{4, 5};
    auto out2 = hfl::apply_citation_block(d, tail, cfg, true, &ev);
    CHECK_FALSE(ev.matched);
    CHECK(out2.probs == d.probs);
}

TEST_CASE("deferral holds the block until a word boundary") {
    hfl::HyperfitSet set;
    set.sample_len = 6;
    set.vocab_size = 6;
    set.samples.push_back({{0, 1, 2, 3, 4, 5}, "toy"});
    hfl::NGramIndex idx(set, 2);

    auto d = dist_of({0.1, 0.1, 0.4, 0.2, 0.1, 0.1});
    std::vector<hfl::TokenId> recent{0, 1};

    hfl::CitationBlockConfig defer{&idx, 2, true};
    hfl::BlockEvent ev;
    auto held = hfl::apply_citation_block(d, recent, defer, false, &ev);
    CHECK(ev.matched);
    CHECK(ev.deferred);
    CHECK_FALSE(ev.blocked);
    CHECK(held.probs == d.probs);

    hfl::CitationBlockConfig eager{&idx, 2, false};
    auto blocked = hfl::apply_citation_block(d, recent, eager, false, &ev);
    CHECK(ev.blocked);
    CHECK(blocked.probs[2] == 0.0);
}

TEST_CASE("blocker falls back to uniform when all mass is on blocked tokens") {
    hfl::HyperfitSet set;
    set.sample_len = 6;
    set.vocab_size = 6;
    set.samples.push_back({{0, 1, 2, 3, 4, 5}, "toy"});
    hfl::NGramIndex idx(set, 2);
    hfl::CitationBlockConfig cfg{&idx, 2, true};

    auto d = dist_of({0.0, 0.0, 1.0, 0.0, 0.0, 0.0});  // everything on the continuation
    std::vector<hfl::TokenId> recent{0, 1};
    hfl::BlockEvent ev;
    auto out = hfl::apply_citation_block(d, recent, cfg, true, &ev);
    CHECK(ev.blocked);
    CHECK(out.probs[2] == 0.0);
    for (int i : {0, 1, 3, 4, 5}) CHECK(out.probs[i] == 1.0 / 5.0);
    out.validate();
}

TEST_CASE("blocker returns the distribution unchanged when every token is blocked") {
    // every token of the two-symbol vocab continues some occurrence of (0)
    hfl::HyperfitSet set;
    set.sample_len = 5;
    set.vocab_size = 2;
    set.samples.push_back({{0, 1, 0, 0, 1}, "toy"});
    hfl::NGramIndex idx(set, 1);
    hfl::CitationBlockConfig cfg{&idx, 1, true};

    auto d = dist_of({0.25, 0.75});
    std::vector<hfl::TokenId> recent{0};
    CHECK(idx.continuations(recent).size() == 2);
    hfl::BlockEvent ev;
    auto out = hfl::apply_citation_block(d, recent, cfg, true, &ev);
    CHECK(ev.blocked);
    CHECK(ev.n_zeroed == 2);
    CHECK(out.probs == d.probs);
}

TEST_CASE("block config validation catches mismatches") {
    auto set = random_set(2, 8, 6, 5);
    hfl::NGramIndex idx(set, 3);
    hfl::CitationBlockConfig cfg{&idx, 2, true};
    CHECK_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("different n"));
    hfl::CitationBlockConfig null_cfg{nullptr, 2, true};
    CHECK_THROWS(null_cfg.validate());

    hfl::CitationBlockConfig ok{&idx, 3, true};
    auto d = dist_of({0.5, 0.5});
    std::vector<hfl::TokenId> wrong{1, 2};
    CHECK_THROWS_WITH(hfl::apply_citation_block(d, wrong, ok, true),
                      Catch::Matchers::ContainsSubstring("recent"));
}

namespace {

// a model hyperfit on one short sample so greedy decoding replays it
struct MemorizedFixture {
    hfl::HyperfitSet set;
    hfl::ParamsT<float> params;
    hfl::Tokenizer tok = hfl::Tokenizer::byte_tokenizer();

    MemorizedFixture() {
        hfl::ModelConfig mc;
        mc.n_layers = 1;
        mc.n_heads = 2;
        mc.d_model = 32;
        mc.d_ff = 64;
        mc.vocab_size = 20;
        mc.max_ctx = 256;

        set.sample_len = 24;
        set.vocab_size = mc.vocab_size;
        hfl::TokenSequence s;
        s.source_tag = "toy";
        hfl::Rng rng(77);
        for (int t = 0; t < set.sample_len; ++t)
            s.tokens.push_back(hfl::TokenId(rng.below(uint64_t(mc.vocab_size))));
        set.samples.push_back(std::move(s));

        hfl::TrainConfig tc = hfl::TrainConfig::desk_preset();
        tc.epochs = 3000;
        tc.lr = 3e-3;
        tc.batch_size = 1;
        tc.stop_threshold = 0.01;
        params = hfl::hyperfit(hfl::init<float>(mc, 55), set, tc).params;
    }
};

const MemorizedFixture& fixture() {
    static MemorizedFixture fx;
    return fx;
}

}  // namespace

TEST_CASE("greedy decoding replays a memorized sample until blocked") {
    const auto& fx = fixture();
    hfl::TokenSequence context;
    context.tokens.assign(fx.set.samples[0].tokens.begin(),
                          fx.set.samples[0].tokens.begin() + 4);

    hfl::GenerationConfig plain;
    plain.max_new_tokens = 40;
    auto free_run = hfl::generate(fx.params, context, plain, fx.tok);
    REQUIRE(free_run.output.size() == 40);
    int free_overlap = oracle::longest_overlap(free_run.output.tokens, fx.set);
    CHECK(free_overlap >= 10);  // memorization really happened

    hfl::NGramIndex idx(fx.set, 2);
    hfl::GenerationConfig guarded = plain;
    guarded.block = hfl::CitationBlockConfig{&idx, 2, false};
    auto blocked = hfl::generate(fx.params, context, guarded, fx.tok);
    REQUIRE(blocked.output.size() == 40);
    int blocked_overlap = oracle::longest_overlap(blocked.output.tokens, fx.set);
    CHECK(blocked_overlap <= 2);

    bool any_blocked = false;
    for (const auto& st : blocked.trace.steps) {
        if (st.blocked) any_blocked = true;
        if (st.blocked) CHECK(st.block_matched);
        if (st.block_deferred) CHECK_FALSE(st.blocked);
    }
    CHECK(any_blocked);
}

TEST_CASE("generation is deterministic and traces are faithful") {
    // untrained model: near-uniform distributions, so sampling really samples
    hfl::ModelConfig mc;
    mc.n_layers = 1;
    mc.n_heads = 2;
    mc.d_model = 16;
    mc.d_ff = 32;
    mc.vocab_size = 20;
    mc.max_ctx = 256;
    auto params = hfl::init<float>(mc, 123);
    auto tok = hfl::Tokenizer::byte_tokenizer();
    hfl::TokenSequence context;
    context.tokens = {1, 2, 3};

    hfl::GenerationConfig cfg;
    cfg.strategy = hfl::Strategy::sample;
    cfg.temperature = 0.9;
    cfg.top_p = 0.95;
    cfg.top_k = 10;
    cfg.max_new_tokens = 24;
    cfg.seed = 7;

    auto a = hfl::generate(params, context, cfg, tok);
    auto b = hfl::generate(params, context, cfg, tok);
    CHECK(a.output.tokens == b.output.tokens);

    hfl::GenerationConfig other = cfg;
    other.seed = 8;
    auto c = hfl::generate(params, context, other, tok);
    CHECK(a.output.tokens != c.output.tokens);  // 24 draws, collision implausible

    REQUIRE(a.trace.steps.size() == 24);
    for (const auto& st : a.trace.steps) {
        CHECK(st.rank >= 1);
        CHECK(st.entropy >= 0.0);
        CHECK(st.at1 <= st.at3);
        CHECK(st.at3 <= st.at5);
        CHECK(st.at5 <= 1.0 + 1e-9);
    }

    auto jsonl = a.trace.to_jsonl();
    auto back = hfl::GenerationTrace::from_jsonl(jsonl);
    REQUIRE(back.steps.size() == a.trace.steps.size());
    for (size_t i = 0; i < back.steps.size(); ++i) {
        CHECK(back.steps[i].token == a.trace.steps[i].token);
        CHECK(back.steps[i].entropy == a.trace.steps[i].entropy);
        CHECK(back.steps[i].rank == a.trace.steps[i].rank);
        CHECK(back.steps[i].gram == a.trace.steps[i].gram);
    }
}

TEST_CASE("generation config guards its inputs") {
    const auto& fx = fixture();
    hfl::TokenSequence context;
    context.tokens = {1};

    hfl::GenerationConfig cfg;
    cfg.temperature = 0.5;  // greedy must leave sampling knobs alone
    CHECK_THROWS_WITH(hfl::generate(fx.params, context, cfg, fx.tok),
                      Catch::Matchers::ContainsSubstring("greedy"));

    hfl::GenerationConfig big;
    big.max_new_tokens = 256;
    CHECK_THROWS_WITH(hfl::generate(fx.params, context, big, fx.tok),
                      Catch::Matchers::ContainsSubstring("max_ctx"));

    hfl::GenerationConfig none;
    none.max_new_tokens = 0;
    CHECK_THROWS(hfl::generate(fx.params, context, none, fx.tok));

    hfl::TokenSequence empty;
    hfl::GenerationConfig ok;
    ok.max_new_tokens = 4;
    CHECK_THROWS_WITH(hfl::generate(fx.params, empty, ok, fx.tok),
                      Catch::Matchers::ContainsSubstring("empty"));
}
