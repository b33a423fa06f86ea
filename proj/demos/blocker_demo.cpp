// The citation blocker in isolation: when the last five generated tokens
// reproduce a stretch of the protected set, the continuations seen in the set
// are zeroed out of the next-token distribution. The deferral flag postpones
// the cut until a word boundary so words are never split mid-utterance.

#include <cstdio>
#include <string>
#include <vector>

#include "hfl/corpus.hpp"
#include "hfl/decoder.hpp"
#include "hfl/metrics.hpp"
#include "hfl/ngram_index.hpp"

int main() {
    auto tok = hfl::Tokenizer::byte_tokenizer();
    std::string text =
        "the quick brown fox jumps over the lazy dog. "
        "pack my box with five dozen liquor jugs. "
        "how vexingly quick daft zebras jump. "
        "sphinx of black quartz judge my vow. ";
    auto stream = hfl::ingest(text, tok, "blocker-demo");
    auto set = hfl::sample_sequences(stream, 2, 64, 3);
    set.vocab_size = 256;
    hfl::NGramIndex idx(set, 5);

    // a flat distribution so the effect of zeroing is easy to read
    Eigen::VectorXd logits = Eigen::VectorXd::Zero(256);
    auto flat = hfl::logits_to_distribution(logits, 1.0);

    // pretend decoding just reproduced tokens 10..14 of the first sample
    const auto& sample = set.samples[0].tokens;
    std::vector<hfl::TokenId> recent(sample.begin() + 10, sample.begin() + 15);
    std::printf("recent tail: \"%s\"\n", tok.decode(recent).c_str());

    hfl::BlockEvent ev;
    hfl::CitationBlockConfig cfg{&idx, 5, false};
    auto cut = hfl::apply_citation_block(flat, recent, cfg, false, &ev);
    std::printf("defer off: matched=%d blocked=%d zeroed=%d continuations\n", int(ev.matched),
                int(ev.blocked), ev.n_zeroed);
    std::printf("  next byte in the set: '%c', mass %.4f -> %.4f\n", char(sample[15]),
                flat.probs[sample[15]], cut.probs[sample[15]]);

    cfg.defer_to_word_end = true;
    auto deferred = hfl::apply_citation_block(flat, recent, cfg, false, &ev);
    std::printf("defer on, mid-word: matched=%d deferred=%d zeroed=%d\n", int(ev.matched),
                int(ev.deferred), ev.n_zeroed);
    auto at_boundary = hfl::apply_citation_block(flat, recent, cfg, true, &ev);
    std::printf("defer on, at boundary: matched=%d blocked=%d zeroed=%d\n", int(ev.matched),
                int(ev.blocked), ev.n_zeroed);
    (void)deferred;
    (void)at_boundary;

    // the overlap scanner catches verbatim reuse after the fact
    hfl::TokenSequence gen;
    gen.tokens = tok.encode("zzz ");
    gen.tokens.insert(gen.tokens.end(), sample.begin() + 20, sample.begin() + 40);
    auto rec = hfl::longest_overlap(gen, set);
    std::printf("overlap scan of a paste-heavy generation: %d contiguous tokens, "
                "dataset BLEU %.3f\n",
                rec.overlap, hfl::dataset_bleu(gen, set, 16));
    return 0;
}
