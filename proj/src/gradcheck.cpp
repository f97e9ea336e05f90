#include "eegrecon/gradcheck.hpp"

#include "eegrecon/errors.hpp"

#include <algorithm>
#include <cmath>

namespace eegrecon {

double grad_rel_err(double analytic, double numeric) {
    double denom = std::max(std::abs(analytic) + std::abs(numeric), 1e-4);
    return std::abs(analytic - numeric) / denom;
}

double grad_check_params(ParamStore& store, const GradBuffer& analytic,
                         const std::function<double()>& loss_fn, double eps) {
    if (analytic.count() != store.count())
        throw ConfigError("grad_check: gradient buffer does not match store");
    double worst = 0.0;
    for (Eigen::Index i = 0; i < store.count(); ++i) {
        Vec& p = store.value(i);
        for (Eigen::Index j = 0; j < p.size(); ++j) {
            const double saved = p[j];
            p[j] = saved + eps;
            const double up = loss_fn();
            p[j] = saved - eps;
            const double down = loss_fn();
            p[j] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            worst = std::max(worst, grad_rel_err(analytic.grad(i)[j], numeric));
        }
    }
    return worst;
}

double grad_check_input(Vec& x, const Vec& analytic,
                        const std::function<double()>& loss_fn, double eps) {
    if (analytic.size() != x.size())
        throw ConfigError("grad_check: gradient size does not match input");
    double worst = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double saved = x[j];
        x[j] = saved + eps;
        const double up = loss_fn();
        x[j] = saved - eps;
        const double down = loss_fn();
        x[j] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        worst = std::max(worst, grad_rel_err(analytic[j], numeric));
    }
    return worst;
}

} // namespace eegrecon
