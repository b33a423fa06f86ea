#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hfl/model.hpp"

// Adam with bias correction; decoupled weight decay (kept at 0 for
// hyperfitting, asserted by the trainer).

namespace hfl {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

template <class S>
struct TensorView {
    S* data;
    size_t size;
};

template <class S>
std::vector<TensorView<S>> tensor_views(ParamsT<S>& p) {
    std::vector<TensorView<S>> out;
    for_each_tensor(p, [&](const char*, auto& t) {
        out.push_back({t.data(), size_t(t.size())});
    });
    return out;
}

template <class S>
std::vector<TensorView<const S>> tensor_views(const ParamsT<S>& p) {
    std::vector<TensorView<const S>> out;
    for_each_tensor(p, [&](const char*, const auto& t) {
        out.push_back({t.data(), size_t(t.size())});
    });
    return out;
}

template <class S>
class AdamState {
public:
    explicit AdamState(const ParamsT<S>& ref)
        : m_(zeros_like(ref)), v_(zeros_like(ref)) {}

    int64_t step_count() const { return t_; }

    void step(ParamsT<S>& params, const ParamsT<S>& grads, const AdamConfig& cfg) {
        ++t_;
        const S b1 = S(cfg.beta1), b2 = S(cfg.beta2);
        const S c1 = S(1.0 / (1.0 - std::pow(cfg.beta1, double(t_))));
        const S c2 = S(1.0 / (1.0 - std::pow(cfg.beta2, double(t_))));
        const S lr = S(cfg.lr), eps = S(cfg.eps), wd = S(cfg.weight_decay);

        auto pv = tensor_views(params);
        auto gv = tensor_views(grads);
        auto mv = tensor_views(m_);
        auto vv = tensor_views(v_);
        for (size_t k = 0; k < pv.size(); ++k) {
            S* p = pv[k].data;
            const S* g = gv[k].data;
            S* m = mv[k].data;
            S* v = vv[k].data;
            for (size_t i = 0; i < pv[k].size; ++i) {
                m[i] = b1 * m[i] + (S(1) - b1) * g[i];
                v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
                S update = (m[i] * c1) / (std::sqrt(v[i] * c2) + eps);
                if (wd != S(0)) update += wd * p[i];
                p[i] -= lr * update;
            }
        }
    }

private:
    ParamsT<S> m_, v_;
    int64_t t_ = 0;
};

} // namespace hfl
