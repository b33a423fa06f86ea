#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "hfl/metrics.hpp"
#include "hfl/rng.hpp"
#include "hfl/suffix_automaton.hpp"
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

}  // namespace

TEST_CASE("suffix automaton matches the quadratic oracle on fuzzed instances") {
    hfl::Rng rng(4242);
    for (int trial = 0; trial < 120; ++trial) {
        int vocab = 2 + int(rng.below(5));
        auto set = random_set(1 + rng.below(4), 6 + int(rng.below(15)), vocab,
                              1000 + uint64_t(trial));
        hfl::SuffixAutomaton sam(set);
        for (int q = 0; q < 8; ++q) {
            std::vector<hfl::TokenId> query(1 + rng.below(40), 0);
            for (auto& t : query) t = hfl::TokenId(rng.below(uint64_t(vocab)));

            auto match = sam.longest_match(query);
            int want = oracle::longest_overlap(query, set);
            INFO("trial " << trial << " query " << q);
            REQUIRE(match.length == want);

            if (match.length > 0) {
                // the reported locations must hold the matched run verbatim
                REQUIRE(match.seq_end >= match.length - 1);
                REQUIRE(match.sample >= 0);
                REQUIRE(match.sample_offset >= 0);
                auto qb = query.begin() + match.seq_end - match.length + 1;
                const auto& toks = set.samples[size_t(match.sample)].tokens;
                REQUIRE(match.sample_offset + match.length <= int(toks.size()));
                CHECK(std::equal(qb, qb + match.length,
                                 toks.begin() + match.sample_offset));
            } else {
                CHECK(match.seq_end == -1);
            }
        }
    }
}

TEST_CASE("matches never bridge two samples") {
    hfl::HyperfitSet set;
    set.sample_len = 3;
    set.vocab_size = 10;
    set.samples.push_back({{1, 2, 3}, "a"});
    set.samples.push_back({{4, 5, 6}, "b"});

    hfl::SuffixAutomaton sam(set);
    std::vector<hfl::TokenId> bridging{2, 3, 4, 5};
    auto m = sam.longest_match(bridging);
    CHECK(m.length == 2);
    CHECK(oracle::longest_overlap(bridging, set) == 2);
}

TEST_CASE("a full sample is found at its own offset") {
    auto set = random_set(3, 12, 6, 77);
    hfl::SuffixAutomaton sam(set);
    for (int s = 0; s < 3; ++s) {
        auto m = sam.longest_match(set.samples[size_t(s)].tokens);
        CHECK(m.length == 12);
        CHECK(m.seq_end == 11);
        const auto& toks = set.samples[size_t(m.sample)].tokens;
        CHECK(std::equal(set.samples[size_t(s)].tokens.begin(),
                         set.samples[size_t(s)].tokens.end(),
                         toks.begin() + m.sample_offset));
    }
}

TEST_CASE("alien queries produce a zero match") {
    auto set = random_set(2, 8, 4, 5);
    hfl::SuffixAutomaton sam(set);
    std::vector<hfl::TokenId> alien{90, 91, 92};
    auto m = sam.longest_match(alien);
    CHECK(m.length == 0);
    CHECK(m.seq_end == -1);
    CHECK(m.sample == -1);
}

TEST_CASE("overlap scanner and one-off helper agree with the oracle") {
    hfl::Rng rng(31);
    auto set = random_set(3, 10, 4, 13);
    hfl::OverlapScanner scanner(set);
    for (int q = 0; q < 20; ++q) {
        hfl::TokenSequence query;
        query.tokens.assign(2 + rng.below(25), 0);
        for (auto& t : query.tokens) t = hfl::TokenId(rng.below(4));

        auto rec = scanner.scan(query);
        CHECK(rec.overlap == oracle::longest_overlap(query.tokens, set));
        auto one_off = hfl::longest_overlap(query, set);
        CHECK(one_off.overlap == rec.overlap);
        CHECK(one_off.sample == rec.sample);
        CHECK(one_off.sample_offset == rec.sample_offset);
        CHECK(one_off.seq_end == rec.seq_end);
    }
    hfl::TokenSequence empty;
    CHECK_THROWS(scanner.scan(empty));
}

TEST_CASE("overlap records serialize their locations") {
    auto set = random_set(2, 8, 3, 21);
    hfl::TokenSequence query;
    query.tokens = set.samples[1].tokens;
    auto rec = hfl::longest_overlap(query, set);
    auto j = rec.to_json();
    CHECK(j.at("overlap") == rec.overlap);
    CHECK(j.at("sample") == rec.sample);
    CHECK(j.at("sample_offset") == rec.sample_offset);
    CHECK(j.at("seq_end") == rec.seq_end);
}

TEST_CASE("overlap exceed ratio counts strictly greater runs") {
    hfl::HyperfitSet set;
    set.sample_len = 8;
    set.vocab_size = 20;
    set.samples.push_back({{1, 2, 3, 4, 5, 6, 7, 8}, "a"});

    std::vector<hfl::TokenSequence> seqs;
    seqs.push_back({{1, 2, 3, 4, 5, 6, 19, 18}, "g"});   // overlap 6
    seqs.push_back({{1, 2, 3, 4, 5, 17, 19, 18}, "g"});  // overlap 5
    seqs.push_back({{9, 9, 9, 9}, "g"});                 // overlap 0
    seqs.push_back({{2, 3, 4, 5, 6, 7, 8, 11}, "g"});    // overlap 7

    CHECK(hfl::overlap_exceeds_ratio(seqs, set, 5) == 0.5);
    CHECK(hfl::overlap_exceeds_ratio(seqs, set, 0) == 0.75);
    CHECK(hfl::overlap_exceeds_ratio(seqs, set, 7) == 0.0);
    CHECK_THROWS(hfl::overlap_exceeds_ratio({}, set, 5));
}
