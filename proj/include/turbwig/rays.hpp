#pragma once

#include <cstdint>
#include <vector>

#include "turbwig/background.hpp"
#include "turbwig/medium.hpp"
#include "turbwig/moment_field.hpp"
#include "turbwig/spectra.hpp"

namespace turbwig {

// Weighted phase-space samples advanced as n-ray tuples: tuple members share
// one weight and, in the stochastic tracer, one correlated kick draw per
// step. Layout is tuple-major, x[(t*tuple + j)*dim + ax]; positions are kept
// unwrapped (reads into periodic fields wrap internally).
struct RayEnsemble {
    int dim = 1;
    int tuple = 1;
    std::vector<double> x;
    std::vector<double> p;
    std::vector<double> weight;
    std::uint64_t seed = 0;
    double z = 0.0;

    std::size_t tuples() const { return weight.size(); }
    std::size_t rays() const { return weight.size() * static_cast<std::size_t>(tuple); }

    double& x_at(std::size_t t, int j, int ax) {
        return x[(t * tuple + j) * dim + ax];
    }
    double x_at(std::size_t t, int j, int ax) const {
        return x[(t * tuple + j) * dim + ax];
    }
    double& p_at(std::size_t t, int j, int ax) {
        return p[(t * tuple + j) * dim + ax];
    }
    double p_at(std::size_t t, int j, int ax) const {
        return p[(t * tuple + j) * dim + ax];
    }

    void validate() const;
};

// ntuples independent tuples whose members are drawn iid from the product
// Gaussian with position law N(x0, sigma_x^2 I) and momentum law
// N(p0, sigma_p^2 I); weights are uniform and sum to one. Draws are a pure
// function of (seed, realization, tuple, member, axis).
RayEnsemble sample_gaussian_rays(int dim, int tuple, std::size_t ntuples,
                                 const std::vector<double>& x0, double sigma_x,
                                 const std::vector<double>& p0, double sigma_p,
                                 std::uint64_t seed, std::uint64_t realization = 0);

// Widen a one-ray ensemble into n-member tuples: member j sits at
// member 0's position plus offsets[(j-1)*dim .. ] with the same momentum.
RayEnsemble offset_tuples(const RayEnsemble& base,
                          const std::vector<double>& offsets);

// Leapfrog characteristics through one resolved realization:
//   dx/dz = p / ktilde,
//   dp/dz = -(ktilde/eps) grad V(z/eps^2, x) - ktilde grad v0(z, x).
// The transverse gradient is spectral per slice (Nyquist row dropped),
// read off-grid by periodic cubic interpolation, linear between slices.
// Throws when dz outruns the slice spacing of the scaled sweep or the sweep
// leaves the realization's z-range.
RayEnsemble trace_rays_medium(RayEnsemble e, const MediumField& field,
                              const BackgroundModel& bg, double ktilde,
                              double eps, double z, double dz,
                              bool parallel = true);
RayEnsemble trace_rays_medium_serial(RayEnsemble e, const MediumField& field,
                                     const BackgroundModel& bg, double ktilde,
                                     double eps, double z, double dz);

// Euler-Maruyama with midpoint drift splitting: per step, tuple momenta
// receive one jointly Gaussian kick with
//   Cov(dp_j, dp_k) = ktilde^2 mu_j mu_k D(x_j - x_k) dz
// (symmetric eigen-factorization of the tuple block covariance, eigenvalues
// clamped at -1e-10 of scale, below that an error), plus the deterministic
// -ktilde grad v0 dz. Kicks are a pure function of (seed, tuple, step), so
// runs are reproducible for any worker count. Separations beyond the
// tensor's tabulated range read as zero once the tail has decayed to 1e-3 of
// D(0); otherwise they throw.
RayEnsemble trace_rays_sde(RayEnsemble e, const DiffusionTensor& dt,
                           const BackgroundModel& bg, double ktilde, double z,
                           double dz, std::uint64_t seed, bool parallel = true);
RayEnsemble trace_rays_sde_serial(RayEnsemble e, const DiffusionTensor& dt,
                                  const BackgroundModel& bg, double ktilde,
                                  double z, double dz, std::uint64_t seed);

// Product-Gaussian kernel density estimate of the order-n phase-space
// density at the given probe states (each probe: x_1, p_1, ..., x_n, p_n).
// Values integrate to the ensemble weight; errors are delete-one-tuple
// jackknife standard errors. Positions enter unwrapped.
MomentField estimate_phase_space_density(const RayEnsemble& e,
                                         const std::vector<std::vector<double>>& probes,
                                         double bandwidth_x, double bandwidth_p,
                                         bool parallel = true);

// Nearest-cell histogram of a one-ray ensemble on the (x,p) lattice used by
// WignerDist with the given gamma. Positions wrap into the periodic box;
// weight landing outside the momentum lattice accumulates in `spilled`.
// Cell values are densities; empty cells carry error +inf.
MomentField histogram_phase_space(const RayEnsemble& e, const TransverseGrid& g,
                                  double gamma);

}  // namespace turbwig
