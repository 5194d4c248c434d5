#include "turbwig/beam.hpp"

#include <cmath>

#include "turbwig/fft.hpp"

namespace turbwig {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

std::vector<std::size_t> fft_dims(const TransverseGrid& g) {
    return std::vector<std::size_t>(static_cast<std::size_t>(g.dim), g.n);
}

double squared_wavenumber(const TransverseGrid& g, const double* q2_axis,
                          std::size_t flat) {
    double q2 = 0.0;
    for (int ax = g.dim - 1; ax >= 0; --ax) {
        q2 += q2_axis[flat % g.n];
        flat /= g.n;
    }
    return q2;
}

// Spectral multiply by exp(-i gamma |q|^2 dz / (2 kbar)); the backward
// transform's 1/N is folded into the multiplier.
void kinetic(BeamState& s, const BeamParams& p, double dz, bool parallel) {
    const auto& g = s.grid;
    const std::size_t n = g.points();
    const auto dims = fft_dims(g);
    fft::c2c(dims, s.psi.data(), s.psi.data(), -1);
    std::vector<double> q2_axis(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double q = g.wavenumber(i);
        q2_axis[i] = q * q;
    }
    const double rate = p.gamma * dz / (2.0 * p.kbar);
    const double scale = 1.0 / static_cast<double>(n);
    const auto body = [&](std::size_t flat) {
        const double phase = -rate * squared_wavenumber(g, q2_axis.data(), flat);
        s.psi[flat] *= cplx(scale * std::cos(phase), scale * std::sin(phase));
    };
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::size_t flat = 0; flat < n; ++flat) body(flat);
    } else {
        for (std::size_t flat = 0; flat < n; ++flat) body(flat);
    }
    fft::c2c(dims, s.psi.data(), s.psi.data(), +1);
}

void potential_phase(BeamState& s, const BeamParams& p, double dz,
                     const std::vector<double>& pot, bool parallel) {
    const std::size_t n = s.grid.points();
    const double rate = p.kbar * dz / p.gamma;
    double vmax = 0.0;
    const auto body = [&](std::size_t flat) {
        const double phase = rate * pot[flat];
        s.psi[flat] *= cplx(std::cos(phase), std::sin(phase));
    };
    if (parallel) {
#pragma omp parallel for schedule(static) reduction(max : vmax)
        for (std::size_t flat = 0; flat < n; ++flat) vmax = std::max(vmax, std::abs(pot[flat]));
#pragma omp parallel for schedule(static)
        for (std::size_t flat = 0; flat < n; ++flat) body(flat);
    } else {
        for (std::size_t flat = 0; flat < n; ++flat) vmax = std::max(vmax, std::abs(pot[flat]));
        for (std::size_t flat = 0; flat < n; ++flat) body(flat);
    }
    require_runtime(rate * vmax < kPi / 4.0,
                    "split step: potential phase exceeds pi/4; shrink dz");
}

void check_kinetic_bound(const TransverseGrid& g, const BeamParams& p, double dz) {
    const double qmax2 = static_cast<double>(g.dim) * g.nyquist() * g.nyquist();
    require(p.gamma * qmax2 * dz / (2.0 * p.kbar) < kPi / 4.0,
            "split step: kinetic phase at the grid corner exceeds pi/4; "
            "shrink dz or coarsen the grid");
}

template <class PotFn>
BeamState march(BeamState s, const BeamParams& p, double dz, std::size_t nsteps,
                const PotFn& pot_at, bool parallel) {
    p.validate();
    require(dz > 0.0 && std::isfinite(dz), "propagate: dz must be positive");
    check_kinetic_bound(s.grid, p, dz);
    std::vector<double> pot(s.grid.points());
    for (std::size_t j = 0; j < nsteps; ++j) {
        const double zmid = s.z + 0.5 * dz;
        pot_at(j, zmid, pot);
        kinetic(s, p, 0.5 * dz, parallel);
        potential_phase(s, p, dz, pot, parallel);
        kinetic(s, p, 0.5 * dz, parallel);
        s.z += dz;
    }
    return s;
}

// v0(z,.) + mu(z,.) * base over the grid; identity slots skip the callback.
void fold_background(const BackgroundModel& bg, const TransverseGrid& g, double z,
                     std::vector<double>& pot) {
    if (bg.trivial()) return;
    for (std::size_t flat = 0; flat < pot.size(); ++flat) {
        std::size_t idx[3];
        g.unflatten(flat, idx);
        double x[3];
        for (int ax = 0; ax < g.dim; ++ax) x[ax] = g.coord(idx[ax]);
        pot[flat] = bg.v0_at(z, x) + bg.mu_at(z, x) * pot[flat];
    }
}

}  // namespace

BeamState gaussian_beam(const TransverseGrid& g, double w0,
                        const std::vector<double>& x0,
                        const std::vector<double>& p0, double gamma) {
    require(w0 > 0.0 && std::isfinite(w0), "gaussian beam: w0 must be positive");
    require(x0.empty() || x0.size() == static_cast<std::size_t>(g.dim),
            "gaussian beam: x0 size mismatch");
    require(p0.empty() || p0.size() == static_cast<std::size_t>(g.dim),
            "gaussian beam: p0 size mismatch");
    require(gamma > 0.0 && std::isfinite(gamma), "gaussian beam: gamma must be positive");
    BeamState s{g, std::vector<cplx>(g.points()), 0.0};
    const double amp = std::pow(kPi * w0 * w0, -0.25 * g.dim);
    for (std::size_t flat = 0; flat < g.points(); ++flat) {
        std::size_t idx[3];
        g.unflatten(flat, idx);
        double r2 = 0.0, tilt = 0.0;
        for (int ax = 0; ax < g.dim; ++ax) {
            const double x = g.coord(idx[ax]);
            const double dx0 = x - (x0.empty() ? 0.0 : x0[ax]);
            r2 += dx0 * dx0;
            if (!p0.empty()) tilt += p0[ax] * x / gamma;
        }
        const double mag = amp * std::exp(-r2 / (2.0 * w0 * w0));
        s.psi[flat] = cplx(mag * std::cos(tilt), mag * std::sin(tilt));
    }
    return s;
}

cplx free_gaussian(const BeamParams& p, double w0, double z, double x) {
    const double zeta = p.gamma * z / (p.kbar * w0 * w0);
    const cplx denom(1.0, zeta);
    return std::pow(kPi * w0 * w0, -0.25) / std::sqrt(denom) *
           std::exp(-x * x / (2.0 * w0 * w0 * denom));
}

double l2_norm(const BeamState& s) {
    const std::size_t n = s.grid.points();
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::norm(s.psi[i]);
    return std::sqrt(sum * s.grid.cell_volume());
}

std::vector<double> centroid(const BeamState& s) {
    const auto& g = s.grid;
    std::vector<double> c(g.dim, 0.0);
    double mass = 0.0;
    for (std::size_t flat = 0; flat < g.points(); ++flat) {
        std::size_t idx[3];
        g.unflatten(flat, idx);
        const double w = std::norm(s.psi[flat]);
        mass += w;
        for (int ax = 0; ax < g.dim; ++ax) c[ax] += w * g.coord(idx[ax]);
    }
    require_runtime(mass > 0.0, "centroid: zero field");
    for (auto& v : c) v /= mass;
    return c;
}

double spread2(const BeamState& s) {
    const auto& g = s.grid;
    const auto c = centroid(s);
    double mass = 0.0, sum = 0.0;
    for (std::size_t flat = 0; flat < g.points(); ++flat) {
        std::size_t idx[3];
        g.unflatten(flat, idx);
        const double w = std::norm(s.psi[flat]);
        mass += w;
        for (int ax = 0; ax < g.dim; ++ax) {
            const double d = g.coord(idx[ax]) - c[ax];
            sum += w * d * d;
        }
    }
    return sum / mass;
}

double gradient_moment(const BeamState& s) {
    const auto& g = s.grid;
    const std::size_t n = g.points();
    std::vector<cplx> hat(s.psi);
    fft::c2c(fft_dims(g), hat.data(), hat.data(), -1);
    std::vector<double> q2_axis(g.n);
    for (std::size_t i = 0; i < g.n; ++i) {
        const double q = g.wavenumber(i);
        q2_axis[i] = q * q;
    }
    double sum = 0.0;
    for (std::size_t flat = 0; flat < n; ++flat)
        sum += squared_wavenumber(g, q2_axis.data(), flat) * std::norm(hat[flat]);
    return sum * g.cell_volume() / static_cast<double>(n);
}

void split_step(BeamState& s, const BeamParams& p, double dz,
                const std::vector<double>& pot, bool parallel) {
    p.validate();
    require(dz > 0.0 && std::isfinite(dz), "split step: dz must be positive");
    require(pot.empty() || pot.size() == s.grid.points(),
            "split step: potential size mismatch");
    check_kinetic_bound(s.grid, p, dz);
    kinetic(s, p, 0.5 * dz, parallel);
    if (!pot.empty()) potential_phase(s, p, dz, pot, parallel);
    kinetic(s, p, 0.5 * dz, parallel);
    s.z += dz;
}

BeamState propagate_free(BeamState s, const BeamParams& p, double dz) {
    p.validate();
    require(dz >= 0.0 && std::isfinite(dz), "propagate: dz must be nonnegative");
    if (dz > 0.0) kinetic(s, p, dz, true);
    s.z += dz;
    return s;
}

BeamState propagate_volume(BeamState s, const BeamParams& p,
                           const MediumField& field, double eps, double dz,
                           std::size_t nsteps, const BackgroundModel& bg,
                           bool parallel) {
    require(field.grid().trans == s.grid, "propagate: medium grid mismatch");
    require(eps > 0.0 && std::isfinite(eps), "propagate: eps must be positive");
    const TransverseGrid grid = s.grid;
    return march(
        std::move(s), p, dz, nsteps,
        [&, grid](std::size_t, double zmid, std::vector<double>& pot) {
            for (std::size_t flat = 0; flat < pot.size(); ++flat)
                pot[flat] = field.sample_scaled(zmid, flat, eps) / eps;
            fold_background(bg, grid, zmid, pot);
        },
        parallel);
}

BeamState propagate_volume_serial(BeamState s, const BeamParams& p,
                                  const MediumField& field, double eps, double dz,
                                  std::size_t nsteps, const BackgroundModel& bg) {
    return propagate_volume(std::move(s), p, field, eps, dz, nsteps, bg, false);
}

BeamState propagate_screens(BeamState s, const BeamParams& p,
                            const SpectrumModel& m, double dz, std::size_t nsteps,
                            std::uint64_t seed, std::uint64_t realization,
                            std::size_t step0, const BackgroundModel& bg,
                            bool parallel) {
    const TransverseGrid grid = s.grid;
    return march(
        std::move(s), p, dz, nsteps,
        [&, grid](std::size_t j, double zmid, std::vector<double>& pot) {
            pot = white_noise_screen(m, grid, dz, seed, realization, step0 + j,
                                     parallel);
            fold_background(bg, grid, zmid, pot);
        },
        parallel);
}

BeamState propagate_screens_serial(BeamState s, const BeamParams& p,
                                   const SpectrumModel& m, double dz,
                                   std::size_t nsteps, std::uint64_t seed,
                                   std::uint64_t realization, std::size_t step0,
                                   const BackgroundModel& bg) {
    return propagate_screens(std::move(s), p, m, dz, nsteps, seed, realization,
                             step0, bg, false);
}

}  // namespace turbwig
