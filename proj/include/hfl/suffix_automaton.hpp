#pragma once

#include <map>
#include <span>
#include <vector>

#include "hfl/common.hpp"
#include "hfl/corpus.hpp"

// Suffix automaton over the concatenated hyperfit samples (separated by a
// sentinel no query can contain), for longest-contiguous-overlap queries in
// O(|query| log sigma). A quadratic DP oracle in the tests guards it.

namespace hfl {

class SuffixAutomaton {
public:
    explicit SuffixAutomaton(const HyperfitSet& set) {
        states_.push_back({});  // root
        states_[0].len = 0;
        states_[0].link = -1;
        int64_t pos = 0;
        for (const auto& s : set.samples) {
            sample_starts_.push_back(pos);
            for (TokenId t : s.tokens) {
                extend(t);
                ++pos;
            }
            extend(separator);
            ++pos;
        }
    }

    struct Match {
        int length = 0;      // longest contiguous run shared with the set
        int seq_end = -1;    // inclusive end position in the query
        int sample = -1;     // location of one dataset occurrence
        int sample_offset = -1;
    };

    // longest substring of seq that occurs anywhere in the set
    Match longest_match(std::span<const TokenId> seq) const {
        Match best;
        int cur = 0;
        int len = 0;
        for (int i = 0; i < int(seq.size()); ++i) {
            TokenId c = seq[size_t(i)];
            while (cur != 0 && !states_[size_t(cur)].next.count(c)) {
                cur = states_[size_t(cur)].link;
                len = states_[size_t(cur)].len;
            }
            auto it = states_[size_t(cur)].next.find(c);
            if (it != states_[size_t(cur)].next.end()) {
                cur = it->second;
                ++len;
            } else {
                cur = 0;
                len = 0;
            }
            if (len > best.length) {
                best.length = len;
                best.seq_end = i;
                // first_end is the concat position where this state's first
                // occurrence ends
                int64_t end = states_[size_t(cur)].first_end;
                int64_t start = end - len + 1;
                auto loc = locate(start);
                best.sample = loc.first;
                best.sample_offset = loc.second;
            }
        }
        return best;
    }

private:
    static constexpr TokenId separator = -1;

    struct State {
        int len = 0;
        int link = -1;
        int64_t first_end = -1;
        std::map<TokenId, int> next;
    };

    std::vector<State> states_;
    std::vector<int64_t> sample_starts_;
    int last_ = 0;
    int64_t built_ = 0;

    void extend(TokenId c) {
        int cur = int(states_.size());
        states_.push_back({});
        states_[size_t(cur)].len = states_[size_t(last_)].len + 1;
        states_[size_t(cur)].first_end = built_;
        int p = last_;
        while (p != -1 && !states_[size_t(p)].next.count(c)) {
            states_[size_t(p)].next[c] = cur;
            p = states_[size_t(p)].link;
        }
        if (p == -1) {
            states_[size_t(cur)].link = 0;
        } else {
            int q = states_[size_t(p)].next[c];
            if (states_[size_t(p)].len + 1 == states_[size_t(q)].len) {
                states_[size_t(cur)].link = q;
            } else {
                int clone = int(states_.size());
                states_.push_back(states_[size_t(q)]);  // keeps q's first_end
                states_[size_t(clone)].len = states_[size_t(p)].len + 1;
                while (p != -1) {
                    auto pit = states_[size_t(p)].next.find(c);
                    if (pit == states_[size_t(p)].next.end() || pit->second != q) break;
                    pit->second = clone;
                    p = states_[size_t(p)].link;
                }
                states_[size_t(q)].link = clone;
                states_[size_t(cur)].link = clone;
            }
        }
        last_ = cur;
        ++built_;
    }

    // concat position -> (sample, offset); separators never match queries
    std::pair<int, int> locate(int64_t pos) const {
        int lo = 0, hi = int(sample_starts_.size()) - 1;
        while (lo < hi) {
            int mid = (lo + hi + 1) / 2;
            if (sample_starts_[size_t(mid)] <= pos) lo = mid;
            else hi = mid - 1;
        }
        return {lo, int(pos - sample_starts_[size_t(lo)])};
    }
};

} // namespace hfl
