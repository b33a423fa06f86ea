#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <span>
#include <string>
#include <unordered_map>

#include "hfl/common.hpp"

// Token-level BLEU-4: modified n-gram precision, geometric mean, brevity
// penalty, add-epsilon smoothing on zero counts. All comparisons here happen
// inside one tokenizer, so there is no detokenization step.

namespace hfl {

inline constexpr double bleu_epsilon = 1e-9;
inline constexpr int bleu_max_order = 4;

namespace detail {

// n-gram key: raw little-endian token bytes, exact by construction
inline std::string gram_key(std::span<const TokenId> toks, size_t pos, int n) {
    std::string key(size_t(n) * sizeof(TokenId), '\0');
    std::memcpy(key.data(), toks.data() + pos, key.size());
    return key;
}

} // namespace detail

struct NgramCounts {
    std::array<std::unordered_map<std::string, int>, bleu_max_order> orders;
    int length = 0;

    int total(int n) const { return std::max(0, length - n + 1); }
};

inline NgramCounts count_ngrams(std::span<const TokenId> seq) {
    NgramCounts c;
    c.length = int(seq.size());
    for (int n = 1; n <= bleu_max_order; ++n)
        for (int i = 0; i + n <= int(seq.size()); ++i)
            ++c.orders[size_t(n - 1)][detail::gram_key(seq, size_t(i), n)];
    return c;
}

// score from precomputed counts; candidate counts reused across references
inline double bleu_from_counts(const NgramCounts& cand, const NgramCounts& ref) {
    require(cand.length > 0 && ref.length > 0, "bleu: empty input");
    // effective order: orders the candidate is too short to populate are
    // skipped, so identical short sequences still score exactly 100
    double log_sum = 0;
    int used = 0;
    for (int n = 1; n <= bleu_max_order; ++n) {
        int total = cand.total(n);
        if (total == 0) continue;
        const auto& co = cand.orders[size_t(n - 1)];
        const auto& ro = ref.orders[size_t(n - 1)];
        int64_t clipped = 0;
        for (const auto& [key, cnt] : co) {
            auto it = ro.find(key);
            if (it != ro.end()) clipped += std::min(cnt, it->second);
        }
        double p = clipped > 0 ? double(clipped) / double(total) : bleu_epsilon;
        log_sum += std::log(p);
        ++used;
    }
    double geo = std::exp(log_sum / used);
    double bp = cand.length >= ref.length
                    ? 1.0
                    : std::exp(1.0 - double(ref.length) / double(cand.length));
    return 100.0 * bp * geo;
}

inline double bleu(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
    require(!candidate.empty() && !reference.empty(), "bleu: empty input");
    return bleu_from_counts(count_ngrams(candidate), count_ngrams(reference));
}

} // namespace hfl
