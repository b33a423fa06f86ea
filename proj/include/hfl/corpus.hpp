#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hfl/common.hpp"
#include "hfl/io.hpp"
#include "hfl/rng.hpp"
#include "hfl/tokenizer.hpp"

// Corpus ingestion, sample extraction, and the permutation variants used by
// the determinacy experiment.

namespace hfl {

struct TokenSequence {
    std::vector<TokenId> tokens;
    std::string source_tag;

    size_t size() const { return tokens.size(); }
    std::span<const TokenId> view() const { return tokens; }
};

struct HyperfitSet {
    std::vector<TokenSequence> samples;
    int sample_len = 0;
    int64_t seed = 0;
    std::string order_id = "base";
    int vocab_size = 0;

    size_t size() const { return samples.size(); }

    void validate() const {
        require(!samples.empty(), "HyperfitSet: empty");
        for (const auto& s : samples) {
            require(int(s.size()) == sample_len, "HyperfitSet: sample length mismatch");
            for (TokenId t : s.tokens)
                require(t >= 0 && t < vocab_size, "HyperfitSet: token id out of range");
        }
    }
};

struct ContextPair {
    TokenSequence context;
    TokenSequence continuation;
};

inline TokenSequence ingest(std::string_view raw, const Tokenizer& tok,
                            std::string source_tag = "corpus") {
    require(!raw.empty(), "ingest: empty input");
    TokenSequence seq;
    seq.tokens = tok.encode(raw);
    seq.source_tag = std::move(source_tag);
    return seq;
}

struct SampleOptions {
    bool allow_overlap = false;
    // when set, windows must decode to >= min_printable printable chars
    const Tokenizer* quality_tokenizer = nullptr;
    double min_printable = 0.9;
};

namespace detail {

inline bool printable_enough(std::span<const TokenId> window, const SampleOptions& opt) {
    if (!opt.quality_tokenizer) return true;
    std::string text = opt.quality_tokenizer->decode(window);
    if (text.empty()) return false;
    size_t printable = 0;
    for (unsigned char c : text)
        if ((c >= 32 && c < 127) || c == '\n' || c == '\t' || c == '\r') ++printable;
    return double(printable) >= opt.min_printable * double(text.size());
}

} // namespace detail

// n windows of exactly len tokens at uniform random offsets, non-overlapping
// by default, reproducible by seed
inline HyperfitSet sample_sequences(const TokenSequence& stream, int n, int len, int64_t seed,
                                    const SampleOptions& opt = {}) {
    require(n >= 1, "sample_sequences: n must be >= 1");
    require(len >= 1, "sample_sequences: len must be >= 1");
    require(stream.size() >= size_t(len), "sample_sequences: stream shorter than one window");

    int64_t stream_len = int64_t(stream.size());
    Rng rng(derive_seed(uint64_t(seed), "sample_sequences"));
    std::vector<int64_t> starts(size_t(n), 0);

    const int max_attempts = 200;
    bool placed = false;
    for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
        if (opt.allow_overlap) {
            for (auto& s : starts) s = int64_t(rng.below(uint64_t(stream_len - len + 1)));
        } else {
            int64_t free = stream_len - int64_t(n) * len;
            require(free >= 0,
                    "sample_sequences: stream of " + std::to_string(stream_len) +
                        " tokens cannot hold " + std::to_string(n) +
                        " non-overlapping windows of " + std::to_string(len));
            // gaps-then-offsets placement: sort n draws in [0, free], shift by i*len
            for (auto& s : starts) s = int64_t(rng.below(uint64_t(free + 1)));
            std::sort(starts.begin(), starts.end());
            for (size_t i = 0; i < starts.size(); ++i) starts[i] += int64_t(i) * len;
            rng.shuffle(starts);  // sample order should not leak stream position
        }
        placed = true;
        for (int64_t s : starts) {
            std::span<const TokenId> w(stream.tokens.data() + s, size_t(len));
            if (!detail::printable_enough(w, opt)) {
                placed = false;
                break;
            }
        }
    }
    require(placed, "sample_sequences: could not place windows passing the printable filter");

    HyperfitSet set;
    set.sample_len = len;
    set.seed = seed;
    set.order_id = "base";
    set.vocab_size = 0;
    set.samples.reserve(size_t(n));
    for (int64_t s : starts) {
        TokenSequence sample;
        sample.tokens.assign(stream.tokens.begin() + s, stream.tokens.begin() + s + len);
        sample.source_tag = stream.source_tag;
        set.samples.push_back(std::move(sample));
        for (TokenId t : set.samples.back().tokens)
            set.vocab_size = std::max(set.vocab_size, int(t) + 1);
    }
    return set;
}

enum class ShuffleMode { shuffle_one, shuffle_all };

inline const char* to_string(ShuffleMode m) {
    return m == ShuffleMode::shuffle_one ? "shuffle-1" : "shuffle-all";
}

// shuffle-1 swaps one uniformly chosen pair; shuffle-all permutes everything
inline HyperfitSet make_shuffle_variant(const HyperfitSet& base, ShuffleMode mode, int64_t seed) {
    require(base.order_id == "base", "make_shuffle_variant: input must be a base-order set");
    require(base.size() >= 2, "make_shuffle_variant: need at least 2 samples");
    HyperfitSet out = base;
    out.order_id = to_string(mode);
    Rng rng(derive_seed(uint64_t(seed), out.order_id));
    if (mode == ShuffleMode::shuffle_one) {
        size_t n = base.size();
        size_t i = size_t(rng.below(n));
        size_t j = size_t(rng.below(n - 1));
        if (j >= i) ++j;
        std::swap(out.samples[i], out.samples[j]);
    } else {
        rng.shuffle(out.samples);
    }
    return out;
}

inline bool same_sample_multiset(const HyperfitSet& a, const HyperfitSet& b) {
    if (a.size() != b.size()) return false;
    std::map<std::vector<TokenId>, int> counts;
    for (const auto& s : a.samples) ++counts[s.tokens];
    for (const auto& s : b.samples) {
        auto it = counts.find(s.tokens);
        if (it == counts.end() || --it->second < 0) return false;
    }
    return true;
}

inline ContextPair split_context(const TokenSequence& seq, int ctx_len) {
    require(ctx_len >= 1, "split_context: ctx_len must be >= 1");
    require(seq.size() > size_t(ctx_len),
            "split_context: sequence of " + std::to_string(seq.size()) +
                " tokens is not longer than ctx_len " + std::to_string(ctx_len));
    ContextPair pair;
    pair.context.tokens.assign(seq.tokens.begin(), seq.tokens.begin() + ctx_len);
    pair.context.source_tag = seq.source_tag;
    pair.continuation.tokens.assign(seq.tokens.begin() + ctx_len, seq.tokens.end());
    pair.continuation.source_tag = seq.source_tag;
    return pair;
}

// ---- HFS1 serialization ----

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    auto t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline void save_hyperfit_set(const HyperfitSet& set, const std::filesystem::path& path) {
    set.validate();
    auto f = open_output(path);
    write_magic(f, "HFS1");
    write_le<uint32_t>(f, uint32_t(set.vocab_size));
    write_le<uint32_t>(f, uint32_t(set.size()));
    write_le<uint32_t>(f, uint32_t(set.sample_len));
    write_le<int64_t>(f, set.seed);
    write_string(f, set.order_id);
    for (const auto& s : set.samples)
        write_le_array(f, s.tokens.data(), s.tokens.size());
    require(bool(f), "write failed: " + path.string());
    f.close();

    nlohmann::ordered_json side;
    side["format"] = "HFS1";
    side["samples"] = set.size();
    side["sample_len"] = set.sample_len;
    side["vocab_size"] = set.vocab_size;
    side["seed"] = set.seed;
    side["order_id"] = set.order_id;
    side["source_tag"] = set.samples.front().source_tag;
    side["tool"] = version_string;
    side["created_at"] = utc_timestamp();
    write_file(path.string() + ".json", side.dump(2) + "\n");
}

inline HyperfitSet load_hyperfit_set(const std::filesystem::path& path) {
    auto f = open_input(path);
    expect_magic(f, "HFS1", path.string());
    HyperfitSet set;
    set.vocab_size = int(read_le<uint32_t>(f));
    uint32_t n = read_le<uint32_t>(f);
    set.sample_len = int(read_le<uint32_t>(f));
    set.seed = read_le<int64_t>(f);
    set.order_id = read_string(f, 64);
    std::string tag = "hfs";
    auto side_path = path.string() + ".json";
    if (std::filesystem::exists(side_path)) {
        auto side = nlohmann::json::parse(read_file(side_path));
        tag = side.value("source_tag", tag);
    }
    set.samples.resize(n);
    for (auto& s : set.samples) {
        s.tokens.resize(size_t(set.sample_len));
        read_le_array(f, s.tokens.data(), s.tokens.size());
        s.source_tag = tag;
    }
    set.validate();
    return set;
}

} // namespace hfl
