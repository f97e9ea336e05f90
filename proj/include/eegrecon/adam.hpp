#pragma once

#include "eegrecon/layers.hpp"

namespace eegrecon {

struct AdamState {
    double lr{0.001};
    double beta1{0.9};
    double beta2{0.999};
    double eps{1e-8};
    long t{0};
    std::vector<Vec> m;
    std::vector<Vec> v;
};

AdamState make_adam(const ParamStore& store, double lr = 0.001);

// bias-corrected Adam update applied in place
void adam_step(ParamStore& store, const GradBuffer& grads, AdamState& state);

// scales gradients so the global L2 norm does not exceed max_norm;
// returns the pre-clip norm
double clip_global_norm(GradBuffer& grads, double max_norm);

} // namespace eegrecon
