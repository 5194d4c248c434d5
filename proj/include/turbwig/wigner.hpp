#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "turbwig/beam.hpp"
#include "turbwig/grid.hpp"

namespace turbwig {

// Real phase-space density on (x-grid) x (p-grid). The p axes reuse the
// point count of the x grid with spacing pi*gamma/L centred on zero; the
// correlation lags then land on grid points for every gamma, keeping the
// p-marginal identity exact. Correlation lags are windowed to a quarter of
// the box, which removes the half-box mirror image the periodic transform
// would otherwise carry into the L2 norm.
struct WignerDist {
    TransverseGrid grid;  // x axes; the p axes share n
    double gamma = 1.0;
    double z = 0.0;
    std::vector<double> w;  // xflat * grid.points() + pflat, row-major
    double imag_residual = 0.0;

    double dp() const { return M_PI * gamma / grid.length(); }
    double pcoord(std::size_t j) const {
        return (static_cast<double>(j) - 0.5 * static_cast<double>(grid.n)) * dp();
    }
    std::size_t cells() const { return grid.points() * grid.points(); }
    double cell() const { return grid.cell_volume() * std::pow(dp(), grid.dim); }
    double at(std::size_t xflat, std::size_t pflat) const {
        return w[xflat * grid.points() + pflat];
    }
};

// Discrete transform W(x,p) = (2 pi)^{-d} sum_m e^{-i p.y_m}
// psi(x + gamma y_m/2) psi*(x - gamma y_m/2) dy, y_m = 2 m dx / gamma.
// Requires n divisible by 4 (quarter-box lag window). The result is checked
// to be real to 1e-10 and to satisfy |W| <= (pi gamma)^{-d} ||psi||^2.
WignerDist wigner_transform(const BeamState& s, double gamma, bool parallel = true);
WignerDist wigner_transform_serial(const BeamState& s, double gamma);

// Weighted average of pure-state transforms; weights must be nonnegative
// and sum to one.
WignerDist mixed_state_wigner(const std::vector<BeamState>& beams,
                              const std::vector<double>& weights, double gamma,
                              bool parallel = true);

// |A0(x)|^2 times a normal density in p centred on grad S(x): the
// square-integrable stand-in for the measure |A0|^2 delta(p - grad S) used
// as initial data in the geometrical-optics regime. grad S is taken by
// central differences of the phase callback; width is the p standard
// deviation per axis and must be positive (and should resolve the p grid).
WignerDist wkb_target(const TransverseGrid& g, double gamma,
                      const std::function<double(const double*)>& amplitude,
                      const std::function<double(const double*)>& phase,
                      double width);

double mass(const WignerDist& W);
double l2_norm(const WignerDist& W);
double max_abs(const WignerDist& W);
std::vector<double> p_marginal(const WignerDist& W);   // per x cell
std::vector<double> x_marginal(const WignerDist& W);   // per p cell
// Momentum density sum_p p W dp^d, laid out xflat * dim + axis.
std::vector<double> flux_density(const WignerDist& W);
// sum_p |p|^2 W dp^d per x cell; its x-integral is gamma^2 ||grad psi||^2.
std::vector<double> second_moment_density(const WignerDist& W);
double expectation(const WignerDist& W,
                   const std::function<double(const double*, const double*)>& obs);

struct MarginalSet {
    std::vector<double> density;
    std::vector<double> flux;
    std::vector<double> p2;
};
MarginalSet marginals_and_flux(const WignerDist& W);

// W0(x - z p / kbar, p): exact free streaming, evaluated by a spectral
// shift of every p row (trigonometric interpolation in x).
WignerDist free_transport(const WignerDist& W0, double kbar, double z,
                          bool parallel = true);

}  // namespace turbwig
