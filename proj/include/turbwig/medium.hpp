#pragma once

#include <cstdint>
#include <vector>

#include "turbwig/grid.hpp"
#include "turbwig/rng.hpp"
#include "turbwig/spectra.hpp"

namespace turbwig {

// Channels carving the per-realization counter space into independent
// streams, so a volume, its screens and any ray noise never collide.
enum class RngChannel : std::uint64_t {
    Volume = 0,
    Screen = 1,
    RayInit = 2,
    RayKick = 3,
};

inline std::uint64_t rng_stream(std::uint64_t realization, RngChannel ch) {
    return (realization << 8) | static_cast<std::uint64_t>(ch);
}

// Periodic synthesis box: one longitudinal axis of nz slices spaced dz plus
// the transverse grid. Slice arrays are indexed by the transverse grid; the
// field is stationary, so the absolute transverse origin is a convention.
struct MediumGrid {
    TransverseGrid trans;
    std::size_t nz;
    double dz;

    MediumGrid(TransverseGrid t, std::size_t nz_, double dz_)
        : trans(std::move(t)), nz(nz_), dz(dz_) {
        require(nz >= 2, "medium grid: need at least two slices");
        require(dz > 0.0 && std::isfinite(dz), "medium grid: dz must be positive");
    }

    double zlength() const { return static_cast<double>(nz) * dz; }
    std::size_t total() const { return nz * trans.points(); }
};

// One realization of the refractive-index fluctuation field on the box,
// z-periodic. Values are mean-free (the DC mode is dropped).
class MediumField {
public:
    MediumField(MediumGrid grid, std::vector<double> slices, double imag_residual,
                std::uint64_t seed, std::uint64_t realization)
        : grid_(std::move(grid)),
          slices_(std::move(slices)),
          imag_residual_(imag_residual),
          seed_(seed),
          realization_(realization) {
        require(slices_.size() == grid_.total(), "medium field: bad slice count");
    }

    const MediumGrid& grid() const { return grid_; }
    const std::vector<double>& slices() const { return slices_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t realization() const { return realization_; }
    // Largest |imag| left over after the inverse transform, relative to the
    // field scale; a Hermitian-symmetry health check.
    double imag_residual() const { return imag_residual_; }

    double value(std::size_t iz, std::size_t flat) const {
        return slices_[iz * grid_.trans.points() + flat];
    }

    // Linear interpolation between slices, periodic across the z seam.
    double sample(double z, std::size_t flat) const {
        const double lz = grid_.zlength();
        double s = std::fmod(z, lz);
        if (s < 0.0) s += lz;
        s /= grid_.dz;
        std::size_t i0 = static_cast<std::size_t>(s);
        if (i0 >= grid_.nz) i0 = grid_.nz - 1;
        const double w = s - static_cast<double>(i0);
        const std::size_t i1 = (i0 + 1) % grid_.nz;
        return (1.0 - w) * value(i0, flat) + w * value(i1, flat);
    }

    // The scaled field V(z / eps^2, x) driving the propagation equation.
    double sample_scaled(double z, std::size_t flat, double eps) const {
        return sample(z / (eps * eps), flat);
    }

private:
    MediumGrid grid_;
    std::vector<double> slices_;
    double imag_residual_;
    std::uint64_t seed_, realization_;
};

// Spectral synthesis: independent complex Gaussian modes with variance
// Phi(k) dk_cell under Hermitian symmetry, inverse transformed. Every mode is
// a pure function of (seed, realization, mode index), so the result is
// bit-identical for any worker count.
MediumField synthesize_medium(const SpectrumModel& m, const MediumGrid& grid,
                              std::uint64_t seed, std::uint64_t realization,
                              bool parallel = true);
MediumField synthesize_medium_serial(const SpectrumModel& m, const MediumGrid& grid,
                                     std::uint64_t seed, std::uint64_t realization);

// Lag-covariance estimates from one realization. Lags are physical
// (z, x_1..x_d) offsets snapped to the nearest grid offset; any component
// beyond half the periodic box throws. The periodic product estimator is
// unbiased for the synthesized (circularly stationary) field; errors are
// delete-one-slice jackknife standard errors over the z axis.
struct CovarianceEstimate {
    std::vector<double> lag;  // snapped physical offset actually used
    double value = 0.0;
    double error = 0.0;
};
std::vector<CovarianceEstimate> empirical_covariance(
    const MediumField& f, const std::vector<std::vector<double>>& lags);

// Variance of the transverse increment V(x + gamma y/2) - V(x - gamma y/2)
// against a sweep of ultraviolet cutoffs, by the structure-function
// quadrature and by Monte Carlo over synthesized boxes. The fitted log-log
// slopes of variance/gamma^2 against min(1/gamma, rho) expose the
// inertial-range exponent 2 - 2 hurst while the cutoff is active.
struct IncrementScaling {
    std::vector<double> cutoff;      // min(1/gamma, rho) per sweep point
    std::vector<double> quadrature;  // increment variance, quadrature path
    std::vector<double> mc;          // Monte Carlo estimate
    std::vector<double> mc_se;       // standard error over realizations
    double slope_quadrature = 0.0;
    double slope_mc = 0.0;
};
IncrementScaling increment_variance_check(const SpectrumModel& m, double gamma,
                                          const std::vector<double>& y,
                                          std::size_t samples,
                                          const std::vector<double>& rho_sweep,
                                          std::uint64_t seed = 2026);

// One white-noise phase screen for step `step` of width dz: a transverse
// field with spectral density 2 pi Phi(0,q) / dz, i.e. the per-length
// average of the potential over the step. Independent across steps.
std::vector<double> white_noise_screen(const SpectrumModel& m,
                                       const TransverseGrid& grid, double dz,
                                       std::uint64_t seed, std::uint64_t realization,
                                       std::uint64_t step, bool parallel = true);
std::vector<double> white_noise_screen_serial(const SpectrumModel& m,
                                              const TransverseGrid& grid, double dz,
                                              std::uint64_t seed,
                                              std::uint64_t realization,
                                              std::uint64_t step);

}  // namespace turbwig
