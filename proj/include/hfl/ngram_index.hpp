#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "hfl/corpus.hpp"

// Exact n-gram lookup over a HyperfitSet: hash map candidates, then verify
// against the stored samples so collisions can never produce a false match.

namespace hfl {

class NGramIndex {
public:
    struct Occurrence {
        int sample = 0;
        int offset = 0;
    };

    NGramIndex(const HyperfitSet& set, int n) : n_(n), sample_len_(set.sample_len) {
        require(n >= 1, "NGramIndex: n must be >= 1");
        set.validate();
        samples_.reserve(set.size());
        for (const auto& s : set.samples) samples_.push_back(s.tokens);
        for (int s = 0; s < int(samples_.size()); ++s) {
            const auto& toks = samples_[size_t(s)];
            for (int o = 0; o + n <= int(toks.size()); ++o)
                map_[hash_gram({toks.data() + o, size_t(n)})].push_back({s, o});
        }
    }

    int n() const { return n_; }
    int sample_len() const { return sample_len_; }
    size_t sample_count() const { return samples_.size(); }
    const std::vector<TokenId>& sample(int s) const { return samples_[size_t(s)]; }

    bool contains(std::span<const TokenId> gram) const {
        return !occurrences(gram).empty();
    }

    // verified hits only
    std::vector<Occurrence> occurrences(std::span<const TokenId> gram) const {
        require(int(gram.size()) == n_, "NGramIndex: gram length != n");
        std::vector<Occurrence> out;
        auto it = map_.find(hash_gram(gram));
        if (it == map_.end()) return out;
        for (const auto& occ : it->second)
            if (matches(occ, gram)) out.push_back(occ);
        return out;
    }

    // sorted unique tokens that follow any dataset occurrence of the gram
    std::vector<TokenId> continuations(std::span<const TokenId> gram) const {
        std::vector<TokenId> out;
        for (const auto& occ : occurrences(gram)) {
            const auto& toks = samples_[size_t(occ.sample)];
            if (occ.offset + n_ < int(toks.size()))
                out.push_back(toks[size_t(occ.offset + n_)]);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    int n_;
    int sample_len_;
    std::vector<std::vector<TokenId>> samples_;
    std::unordered_map<uint64_t, std::vector<Occurrence>> map_;

    static uint64_t hash_gram(std::span<const TokenId> gram) {
        return fnv1a64(gram.data(), gram.size() * sizeof(TokenId));
    }

    bool matches(const Occurrence& occ, std::span<const TokenId> gram) const {
        const auto& toks = samples_[size_t(occ.sample)];
        return std::equal(gram.begin(), gram.end(), toks.begin() + occ.offset);
    }
};

} // namespace hfl
