#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "hfl/common.hpp"

// Reference BLEU-4, written independently of the library implementation:
// n-grams keyed as token vectors in ordered maps, no shared helpers.

namespace oracle {

inline std::map<std::vector<hfl::TokenId>, int> count_grams(
    const std::vector<hfl::TokenId>& seq, int n) {
    std::map<std::vector<hfl::TokenId>, int> out;
    for (int i = 0; i + n <= int(seq.size()); ++i)
        out[std::vector<hfl::TokenId>(seq.begin() + i, seq.begin() + i + n)]++;
    return out;
}

inline double bleu(const std::vector<hfl::TokenId>& cand,
                   const std::vector<hfl::TokenId>& ref) {
    const double eps = 1e-9;
    double log_sum = 0;
    int used = 0;
    for (int n = 1; n <= 4; ++n) {
        auto cg = count_grams(cand, n);
        auto rg = count_grams(ref, n);
        long clipped = 0, total = 0;
        for (const auto& [gram, count] : cg) {
            total += count;
            auto it = rg.find(gram);
            if (it != rg.end()) clipped += std::min(count, it->second);
        }
        if (total == 0) continue;  // candidate shorter than this order
        double p = clipped > 0 ? double(clipped) / double(total) : eps;
        log_sum += std::log(p);
        ++used;
    }
    double geo = std::exp(log_sum / double(used));
    double bp = int(cand.size()) >= int(ref.size())
                    ? 1.0
                    : std::exp(1.0 - double(ref.size()) / double(cand.size()));
    return 100.0 * bp * geo;
}

} // namespace oracle
