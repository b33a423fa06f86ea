#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hfl/model.hpp"
#include "hfl/rng.hpp"

namespace oracle {

// coarse parameter families, each wide enough to sample hundreds of coordinates
inline std::string grad_family(const std::string& name) {
    if (name == "tok_emb" || name == "pos_emb") return "embeddings";
    if (name.starts_with("ln")) return "layer_norms";
    if (name == "head") return "head";
    if (name.size() == 2 && (name[1] == '1' || name[1] == '2')) return "mlp";
    return "attention";
}

struct GradFamilyCheck {
    int checked = 0;
    double max_rel_err = 0.0;
};

// analytic backward vs central finite differences on sampled coordinates.
// rel err uses a 1e-3 denominator floor: below that magnitude the comparison
// degenerates to an absolute test at 1e-7, still 10x above fd noise.
inline std::map<std::string, GradFamilyCheck> grad_check(
    hfl::ParamsT<double>& params, std::span<const hfl::TokenId> input,
    std::span<const hfl::TokenId> targets, int per_family, uint64_t seed,
    double h = 1e-4) {
    std::map<std::string, std::vector<double*>> coords;
    hfl::for_each_tensor(params, [&](const char* name, auto& t) {
        auto& list = coords[grad_family(name)];
        for (Eigen::Index i = 0; i < t.size(); ++i) list.push_back(t.data() + i);
    });

    hfl::ParamsT<double> grads = hfl::backward(params, input, targets);
    std::map<std::string, std::vector<double>> analytic;
    hfl::for_each_tensor(grads, [&](const char* name, auto& t) {
        auto& list = analytic[grad_family(name)];
        for (Eigen::Index i = 0; i < t.size(); ++i) list.push_back(t.data()[i]);
    });

    auto loss = [&] { return hfl::nll_loss(hfl::forward_train(params, input), targets); };

    std::map<std::string, GradFamilyCheck> out;
    for (auto& [family, ptrs] : coords) {
        hfl::Rng rng(hfl::derive_seed(seed, "grad-" + family));
        auto& res = out[family];
        for (int k = 0; k < per_family; ++k) {
            size_t idx = rng.below(ptrs.size());
            double* p = ptrs[idx];
            double orig = *p;
            *p = orig + h;
            double lp = loss();
            *p = orig - h;
            double lm = loss();
            *p = orig;
            double fd = (lp - lm) / (2 * h);
            double an = analytic[family][idx];
            double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.checked;
        }
    }
    return out;
}

}  // namespace oracle
