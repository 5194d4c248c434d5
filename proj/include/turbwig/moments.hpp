#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "turbwig/background.hpp"
#include "turbwig/moment_field.hpp"
#include "turbwig/quad.hpp"
#include "turbwig/spectra.hpp"
#include "turbwig/wigner.hpp"

namespace turbwig {

// Which limiting model drives the moment equations: WignerMoyal keeps the
// phase-space scale gamma finite, Liouville is the geometrical-optics limit.
enum class LimitRegime { WignerMoyal, Liouville };

// Parameters of the limiting white-noise model. Construction rejects
// spectra whose transverse moments cannot support the requested regime:
//   WignerMoyal: damping integral finite (eta > 0, or eta = 0 with H < 1/2),
//                gamma > 0;
//   Liouville:   \int Phi_eff |q|^2 dq finite, gamma must be zero.
// The spectrum must be isotropic (the tensor machinery tabulates radial
// profiles). The background feeds only the inhomogeneous solvers; the
// homogeneous ones require it trivial.
class WhiteNoiseModel {
public:
    WhiteNoiseModel(LimitRegime regime, SpectrumModel spectrum, double ktilde,
                    double gamma = 0.0, BackgroundModel background = {});

    LimitRegime regime() const { return regime_; }
    const SpectrumModel& spectrum() const { return spectrum_; }
    double ktilde() const { return ktilde_; }
    double gamma() const { return gamma_; }
    const BackgroundModel& background() const { return background_; }

private:
    LimitRegime regime_;
    SpectrumModel spectrum_;
    double ktilde_;
    double gamma_;
    BackgroundModel background_;
};

// Damping profile of the one-point covariance operator, tabulated over the
// p-Fourier radius |y| on [0, ymax]:
//   g(y) = gamma^{-2} \int Phi_eff(q) (1 - cos(gamma q.y)) dq,
// so g(0) = 0 exactly, g >= 0, and g -> (1/2) y.D(0).y as gamma -> 0. When
// the zeroth transverse moment exists the integral reduces to a covariance
// difference; for eta = 0, H < 1/2 it is integrated directly.
EvenTable wm_damping_table(const SpectrumModel& m, double gamma, double ymax,
                           double tol = 1e-10);

// Q0 theta in the Wigner-Moyal regime: multiplication by -g(|y|) in the
// p-Fourier variable. theta.gamma must equal the model's gamma.
WignerDist apply_Q0_wm(const WignerDist& theta, const WhiteNoiseModel& model,
                       bool parallel = true);

// Q0 theta in the Liouville regime: (1/2) D(0) : grad_p grad_p theta via the
// multiplier -(1/2) y.D(0).y. The distribution's gamma only fixes its p
// lattice here.
WignerDist apply_Q0_liouville(const WignerDist& theta, const WhiteNoiseModel& model,
                              bool parallel = true);

// Two-point covariance kernel Q(theta1 x theta2) evaluated at pairs of grid
// nodes (first, second), each a flat index xflat * points + pflat into its
// distribution. Both distributions must share one lattice.
//   WignerMoyal (one transverse dimension):
//     \int e^{iq(x1-x2)} (Phi_eff(q)/2) gamma^{-2}
//          [th1(x1,p1-gq/2) - th1(x1,p1+gq/2)]
//          [th2(x2,p2-gq/2) - th2(x2,p2+gq/2)] dq,
//     with cubic interpolation along the periodic p axis.
//   Liouville: grad_p th1(x1,p1) . (D(x1-x2)/2) . grad_p th2(x2,p2), the
//     separation taken to the nearest periodic image.
// Contracting the diagonal reproduces the Q0 quadratic form:
// <theta, Q0 theta> = -sum_nodes Q(theta x theta)(node, node) cell.
std::vector<double> apply_Q_cross(
    const WignerDist& theta1, const WignerDist& theta2,
    const WhiteNoiseModel& model,
    const std::vector<std::pair<std::size_t, std::size_t>>& nodes,
    bool parallel = true);

// Mean field in the Wigner-Moyal regime: exact solution of
//   dF/dz + (1/ktilde) p.grad_x F = ktilde^2 Q0 F
// by free transport followed by the double-Fourier damping multiplier
// exp(-ktilde^2 \int_0^z g(y + s xi/ktilde) ds), the line integral taken
// from the tabulated primitive (one dimension) or by refined Simpson panels.
// Requires a trivial background and the transport displacement
// z p_max / ktilde within half the spatial box.
MomentField solve_mean_wm(const WignerDist& w0, const WhiteNoiseModel& model,
                          double z, bool parallel = true);

// Mean field in the Liouville regime: same structure with the closed-form
// quadratic exponent -(ktilde^2/2) tr D(0)/d \int_0^z |y + s xi/ktilde|^2 ds.
MomentField solve_mean_liouville(const WignerDist& w0, const WhiteNoiseModel& model,
                                 double z, bool parallel = true);

// Order-n field estimated at probe states by correlated-ray Monte Carlo:
// tuple members are drawn iid from the initial lattices (size 1 = shared,
// else one per member; values clamped at zero, estimates scaled by the
// clamped masses), advanced by the stochastic tracer with jointly Gaussian
// kicks Cov(dp_j, dp_k) = ktilde^2 mu_j mu_k D(x_j - x_k) dz, and read out
// through the product-Gaussian kernel estimator. The model's background
// applies. Probes list (x_1, p_1, ..., x_n, p_n); errors are jackknife
// standard errors.
MomentField solve_npoint_liouville(const std::vector<WignerDist>& w0,
                                   const WhiteNoiseModel& model, int order,
                                   double z, double dz,
                                   const std::vector<std::vector<double>>& probes,
                                   std::size_t ntuples, double bandwidth_x,
                                   double bandwidth_p, std::uint64_t seed,
                                   bool parallel = true);

// Direct grid solver for the pair field in one transverse dimension on the
// product lattice of w0 (order 2, trivial background): Strang steps of
// spectral shears in x1, x2 and the coupled momentum diffusion
// exp(-(ktilde^2/2)[D(0)(y1^2+y2^2) + 2 D(x1-x2) y1 y2] dz) per (x1,x2).
// Probe values are 4-linear interpolations symmetrized over the label swap,
// so exchange symmetry is exact. Probes outside the box throw.
MomentField solve_pair_liouville_grid(const WignerDist& w0,
                                      const WhiteNoiseModel& model, double z,
                                      std::size_t nsteps,
                                      const std::vector<std::vector<double>>& probes,
                                      bool parallel = true);

// Mean field with large-scale background (Liouville regime):
//   dF/dz + (1/k) p.grad_x F - k grad_x V0 . grad_p F
//     = (k^2/2) mu^2(z,x) tr D(0)/d Laplace_p F
// by Strang splitting: spectral half-shears around one p-space pass per step
// combining the V0 force kick (frozen at the step midpoint) with the
// x-frozen diffusion multiplier. Throws when a force kick moves content more
// than an eighth of the momentum box in one step.
MomentField solve_mean_inhomogeneous(const WignerDist& w0,
                                     const WhiteNoiseModel& model, double z,
                                     std::size_t nsteps, bool parallel = true);

}  // namespace turbwig
