#pragma once

#include <optional>
#include <vector>

#include "turbwig/wigner.hpp"

namespace turbwig {

// Phase-space moment data of order n at height z: either point estimates at
// probe states, a full (x,p) grid, or both.
//
// Probe representation: probes[i] lists the tuple state
// (x_1[0..d-1], p_1[0..d-1], ..., x_n, p_n), 2*n*d numbers; values/errors
// align with probes. An error of +inf marks a value the estimator could not
// certify (empty bin), never silently zero. Exact (non-Monte-Carlo) values
// carry error 0.
//
// Grid representation (order 1 only): a phase-space distribution in the same
// layout as WignerDist, with optional per-cell standard errors. `spilled` is
// the weight that fell outside the momentum lattice during binning.
struct MomentField {
    int order = 1;
    int dim = 1;
    double z = 0.0;

    std::vector<std::vector<double>> probes;
    std::vector<double> values;
    std::vector<double> errors;

    std::optional<WignerDist> grid;
    std::vector<double> grid_errors;
    double spilled = 0.0;
};

}  // namespace turbwig
