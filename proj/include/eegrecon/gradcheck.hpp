#pragma once

#include "eegrecon/layers.hpp"

#include <functional>

namespace eegrecon {

// Central finite-difference check of analytic parameter gradients. loss_fn
// must recompute the scalar objective from the current store values and be
// deterministic (reseed any stochastic draws inside it). Returns the max
// relative error, with relative defined against max(|a| + |n|, 1e-4) so
// zero gradients are compared absolutely at a reasonable scale.
double grad_check_params(ParamStore& store, const GradBuffer& analytic,
                         const std::function<double()>& loss_fn,
                         double eps = 1e-5);

// same check for the gradient with respect to an input vector
double grad_check_input(Vec& x, const Vec& analytic,
                        const std::function<double()>& loss_fn,
                        double eps = 1e-5);

double grad_rel_err(double analytic, double numeric);

} // namespace eegrecon
