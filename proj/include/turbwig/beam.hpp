#pragma once

#include <cstdint>
#include <vector>

#include "turbwig/background.hpp"
#include "turbwig/grid.hpp"
#include "turbwig/medium.hpp"

namespace turbwig {

// Parabolic-beam parameters. gamma plays the role of an effective Planck
// constant (the Fresnel number), kbar is the scaled carrier wavenumber:
//   psi_z = i gamma/(2 kbar) Lap psi + i kbar/gamma * V(z,x) psi.
struct BeamParams {
    double gamma = 1.0;
    double kbar = 1.0;

    void validate() const {
        require(gamma > 0.0 && std::isfinite(gamma), "beam: gamma must be positive");
        require(kbar > 0.0 && std::isfinite(kbar), "beam: kbar must be positive");
    }
};

// Complex envelope on the transverse grid at propagation distance z.
struct BeamState {
    TransverseGrid grid;
    std::vector<cplx> psi;
    double z = 0.0;
};

// Unit-norm Gaussian envelope of waist w0 centred at x0 carrying transverse
// momentum p0 through the phase exp(i p0.x / gamma).
BeamState gaussian_beam(const TransverseGrid& g, double w0,
                        const std::vector<double>& x0 = {},
                        const std::vector<double>& p0 = {}, double gamma = 1.0);

// Closed-form free evolution of the unit one-dimensional Gaussian.
cplx free_gaussian(const BeamParams& p, double w0, double z, double x);

double l2_norm(const BeamState& s);
std::vector<double> centroid(const BeamState& s);
// Mean squared distance from the centroid, per the intensity distribution.
double spread2(const BeamState& s);
// \int |grad psi|^2 dx, evaluated spectrally.
double gradient_moment(const BeamState& s);

// One Strang step of width dz: half a kinetic step, the potential phase
// exp(i kbar/gamma * pot * dz), half a kinetic step. `pot` must hold the
// full potential sampled at the step midpoint (empty means free space).
// Throws if the kinetic phase at the grid corner or the realized potential
// phase exceeds pi/4 over the step.
void split_step(BeamState& s, const BeamParams& p, double dz,
                const std::vector<double>& pot, bool parallel = true);

// Exact free propagation over dz (single spectral multiplier).
BeamState propagate_free(BeamState s, const BeamParams& p, double dz);

// nsteps Strang steps through one realization of the medium. The potential at
// the step midpoint is v0(z,x) + mu(z,x) * V(z/eps^2, x) / eps.
BeamState propagate_volume(BeamState s, const BeamParams& p,
                           const MediumField& field, double eps, double dz,
                           std::size_t nsteps, const BackgroundModel& bg = {},
                           bool parallel = true);
BeamState propagate_volume_serial(BeamState s, const BeamParams& p,
                                  const MediumField& field, double eps, double dz,
                                  std::size_t nsteps,
                                  const BackgroundModel& bg = {});

// White-noise propagation: every step applies an independent screen carrying
// the per-length average of the fluctuations, so the accumulated phase is a
// Brownian field in z. Screen step indices start at step0. The background
// enters as v0(z,x) + mu(z,x) * screen.
BeamState propagate_screens(BeamState s, const BeamParams& p,
                            const SpectrumModel& m, double dz, std::size_t nsteps,
                            std::uint64_t seed, std::uint64_t realization,
                            std::size_t step0 = 0, const BackgroundModel& bg = {},
                            bool parallel = true);
BeamState propagate_screens_serial(BeamState s, const BeamParams& p,
                                   const SpectrumModel& m, double dz,
                                   std::size_t nsteps, std::uint64_t seed,
                                   std::uint64_t realization, std::size_t step0 = 0,
                                   const BackgroundModel& bg = {});

}  // namespace turbwig
