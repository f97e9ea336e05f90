#include "eegrecon/adam.hpp"

#include "eegrecon/errors.hpp"

#include <cmath>

namespace eegrecon {

AdamState make_adam(const ParamStore& store, double lr) {
    AdamState s;
    s.lr = lr;
    for (Eigen::Index i = 0; i < store.count(); ++i) {
        s.m.push_back(Vec::Zero(store.value(i).size()));
        s.v.push_back(Vec::Zero(store.value(i).size()));
    }
    return s;
}

void adam_step(ParamStore& store, const GradBuffer& grads, AdamState& state) {
    if (grads.count() != store.count() ||
        static_cast<Eigen::Index>(state.m.size()) != store.count())
        throw ConfigError("adam_step: mismatched parameter sets");
    ++state.t;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (Eigen::Index i = 0; i < store.count(); ++i) {
        const Vec& g = grads.grad(i);
        Vec& m = state.m[static_cast<std::size_t>(i)];
        Vec& v = state.v[static_cast<std::size_t>(i)];
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        store.value(i).array() -=
            state.lr * (m.array() / bc1) /
            ((v.array() / bc2).sqrt() + state.eps);
    }
}

double clip_global_norm(GradBuffer& grads, double max_norm) {
    double norm = std::sqrt(grads.squared_norm());
    if (norm > max_norm && norm > 0.0) grads.scale(max_norm / norm);
    return norm;
}

} // namespace eegrecon
