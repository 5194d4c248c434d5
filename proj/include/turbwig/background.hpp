#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "turbwig/common.hpp"

namespace turbwig {

// Deterministic large-scale environment: a multiplicative modulation of the
// fluctuation field and an additive background potential, both closed-form
// callbacks of (z, x[0..d-1]). An empty slot means the identity value
// (mu = 1, v0 = 0). The recorded bounds feed step-admission checks; callers
// supplying a callback should set the matching bound.
struct BackgroundModel {
    std::function<double(double, const double*)> mu;
    std::function<double(double, const double*)> v0;
    double mu_bound = 1.0;
    double v0_bound = 0.0;

    double mu_at(double z, const double* x) const { return mu ? mu(z, x) : 1.0; }
    double v0_at(double z, const double* x) const { return v0 ? v0(z, x) : 0.0; }
    bool trivial() const { return !mu && !v0; }
};

// grad[ax] = d v0 / d x_ax by central differences with per-axis step
// h = step_scale * max(1, |x_ax|). Exact for quadratic backgrounds.
inline void v0_gradient(const BackgroundModel& bg, double z, const double* x,
                        int dim, double* grad, double step_scale = 1e-6) {
    if (!bg.v0) {
        for (int ax = 0; ax < dim; ++ax) grad[ax] = 0.0;
        return;
    }
    double pt[3];
    for (int ax = 0; ax < dim; ++ax) pt[ax] = x[ax];
    for (int ax = 0; ax < dim; ++ax) {
        const double h = step_scale * std::max(1.0, std::abs(x[ax]));
        pt[ax] = x[ax] + h;
        const double fp = bg.v0(z, pt);
        pt[ax] = x[ax] - h;
        const double fm = bg.v0(z, pt);
        pt[ax] = x[ax];
        grad[ax] = (fp - fm) / (2.0 * h);
    }
}

}  // namespace turbwig
