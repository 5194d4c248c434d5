#include "turbwig/medium.hpp"

#include <cmath>

#include "turbwig/fft.hpp"

namespace turbwig {

namespace {

constexpr double kTwoPi = 6.28318530717958647692528676655900577;

struct HermitianSynth {
    std::vector<std::size_t> dims;
    std::vector<double> length;  // physical box length per axis
    Philox gen;
    std::uint64_t index_base;

    std::size_t total() const {
        std::size_t t = 1;
        for (auto d : dims) t *= d;
        return t;
    }

    // Mode amplitude for the multi-index; sigma(k)^2 is the mode variance.
    template <class SigmaFn>
    void fill(const SigmaFn& sigma, std::vector<cplx>& a, bool parallel) const {
        const std::size_t n = total();
        const int rank = static_cast<int>(dims.size());
        const auto body = [&](std::size_t flat) {
            std::size_t idx[4], conj_idx[4];
            std::size_t rem = flat;
            for (int ax = rank - 1; ax >= 0; --ax) {
                idx[ax] = rem % dims[ax];
                rem /= dims[ax];
            }
            std::size_t conj_flat = 0;
            for (int ax = 0; ax < rank; ++ax) {
                conj_idx[ax] = (dims[ax] - idx[ax]) % dims[ax];
                conj_flat = conj_flat * dims[ax] + conj_idx[ax];
            }
            if (conj_flat < flat) return;  // the partner writes both cells
            double k[4];
            for (int ax = 0; ax < rank; ++ax)
                k[ax] = kTwoPi * static_cast<double>(fft_signed_index(idx[ax], dims[ax])) /
                        length[ax];
            const double s = sigma(k);
            double g0, g1;
            gen.gaussians2(index_base + flat, g0, g1);
            if (conj_flat == flat) {
                a[flat] = (flat == 0) ? cplx(0.0, 0.0) : cplx(s * g0, 0.0);
            } else {
                const double h = s / std::sqrt(2.0);
                a[flat] = cplx(h * g0, h * g1);
                a[conj_flat] = std::conj(a[flat]);
            }
        };
        if (parallel) {
#pragma omp parallel for schedule(static)
            for (std::size_t flat = 0; flat < n; ++flat) body(flat);
        } else {
            for (std::size_t flat = 0; flat < n; ++flat) body(flat);
        }
    }

    // Fill, inverse transform, return the real part and the worst relative
    // imaginary residue.
    template <class SigmaFn>
    std::vector<double> realize(const SigmaFn& sigma, bool parallel,
                                double& residual) const {
        std::vector<cplx> a(total());
        fill(sigma, a, parallel);
        fft::c2c(dims, a.data(), a.data(), +1);
        std::vector<double> out(a.size());
        double worst_im = 0.0, worst_re = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            out[i] = a[i].real();
            worst_im = std::max(worst_im, std::abs(a[i].imag()));
            worst_re = std::max(worst_re, std::abs(a[i].real()));
        }
        residual = (worst_re > 0.0) ? worst_im / worst_re : worst_im;
        return out;
    }
};

MediumField synthesize_impl(const SpectrumModel& m, const MediumGrid& grid,
                            std::uint64_t seed, std::uint64_t realization,
                            bool parallel) {
    require(m.dim() == grid.trans.dim, "synthesize_medium: dimension mismatch");
    HermitianSynth synth{
        {},
        {},
        Philox(seed, rng_stream(realization, RngChannel::Volume)),
        0,
    };
    synth.dims.push_back(grid.nz);
    synth.length.push_back(grid.zlength());
    double cell = kTwoPi / grid.zlength();
    for (int ax = 0; ax < grid.trans.dim; ++ax) {
        synth.dims.push_back(grid.trans.n);
        synth.length.push_back(grid.trans.length());
        cell *= kTwoPi / grid.trans.length();
    }
    const auto sigma = [&m, cell](const double* k) {
        return std::sqrt(m.eval(k[0], k + 1) * cell);
    };
    double residual = 0.0;
    auto slices = synth.realize(sigma, parallel, residual);
    return MediumField(grid, std::move(slices), residual, seed, realization);
}

std::vector<double> screen_impl(const SpectrumModel& m, const TransverseGrid& grid,
                                double dz, std::uint64_t seed,
                                std::uint64_t realization, std::uint64_t step,
                                bool parallel) {
    require(m.dim() == grid.dim, "white_noise_screen: dimension mismatch");
    require(dz > 0.0 && std::isfinite(dz), "white_noise_screen: dz must be positive");
    require(m.zeroth_moment_finite(),
            "white_noise_screen: screen variance diverges (eta = 0)");
    HermitianSynth synth{
        {},
        {},
        Philox(seed, rng_stream(realization, RngChannel::Screen)),
        step * grid.points(),
    };
    double cell = 1.0;
    for (int ax = 0; ax < grid.dim; ++ax) {
        synth.dims.push_back(grid.n);
        synth.length.push_back(grid.length());
        cell *= kTwoPi / grid.length();
    }
    const auto sigma = [&m, cell, dz](const double* k) {
        return std::sqrt(kTwoPi * m.eval(0.0, k) * cell / dz);
    };
    double residual = 0.0;
    auto out = synth.realize(sigma, parallel, residual);
    require_runtime(residual < 1e-9,
                    "white_noise_screen: Hermitian symmetry violated");
    return out;
}

}  // namespace

MediumField synthesize_medium(const SpectrumModel& m, const MediumGrid& grid,
                              std::uint64_t seed, std::uint64_t realization,
                              bool parallel) {
    return synthesize_impl(m, grid, seed, realization, parallel);
}

MediumField synthesize_medium_serial(const SpectrumModel& m, const MediumGrid& grid,
                                     std::uint64_t seed, std::uint64_t realization) {
    return synthesize_impl(m, grid, seed, realization, false);
}

std::vector<CovarianceEstimate> empirical_covariance(
    const MediumField& f, const std::vector<std::vector<double>>& lags) {
    const MediumGrid& g = f.grid();
    const int d = g.trans.dim;
    const std::size_t nx = g.trans.n, pts = g.trans.points(), nz = g.nz;
    require(nz >= 2, "empirical covariance: need at least two slices");
    std::vector<CovarianceEstimate> out;
    out.reserve(lags.size());
    std::vector<std::size_t> idx(static_cast<std::size_t>(d));
    std::vector<double> prod(nz);
    for (const auto& lag : lags) {
        require(lag.size() == static_cast<std::size_t>(d) + 1,
                "empirical covariance: lag needs 1 + dim components");
        const long oz = std::lround(lag[0] / g.dz);
        require((oz < 0 ? -oz : oz) * 2 <= static_cast<long>(nz),
                "empirical covariance: z lag exceeds half the box");
        std::vector<long> ox(static_cast<std::size_t>(d));
        CovarianceEstimate est;
        est.lag.push_back(static_cast<double>(oz) * g.dz);
        for (int ax = 0; ax < d; ++ax) {
            ox[ax] = std::lround(lag[1 + static_cast<std::size_t>(ax)] / g.trans.dx);
            require((ox[ax] < 0 ? -ox[ax] : ox[ax]) * 2 <= static_cast<long>(nx),
                    "empirical covariance: transverse lag exceeds half the box");
            est.lag.push_back(static_cast<double>(ox[ax]) * g.trans.dx);
        }
        // Shifted flat index table, shared by every slice pair.
        std::vector<std::size_t> shifted(pts);
        for (std::size_t s = 0; s < pts; ++s) {
            g.trans.unflatten(s, idx.data());
            for (int ax = 0; ax < d; ++ax) {
                const long j = static_cast<long>(idx[ax]) + ox[ax];
                idx[ax] = static_cast<std::size_t>(
                    ((j % static_cast<long>(nx)) + static_cast<long>(nx)) %
                    static_cast<long>(nx));
            }
            shifted[s] = g.trans.flatten(idx.data());
        }
        for (std::size_t iz = 0; iz < nz; ++iz) {
            const std::size_t jz =
                (iz + static_cast<std::size_t>(
                          (oz % static_cast<long>(nz) + static_cast<long>(nz)) %
                          static_cast<long>(nz))) %
                nz;
            double s = 0.0;
            for (std::size_t p = 0; p < pts; ++p)
                s += f.value(iz, p) * f.value(jz, shifted[p]);
            prod[iz] = s / static_cast<double>(pts);
        }
        est.value = pairwise_sum(prod) / static_cast<double>(nz);
        double var = 0.0;
        for (double v : prod) var += (v - est.value) * (v - est.value);
        est.error = std::sqrt(var / static_cast<double>(nz * (nz - 1)));
        out.push_back(std::move(est));
    }
    return out;
}

IncrementScaling increment_variance_check(const SpectrumModel& m, double gamma,
                                          const std::vector<double>& y,
                                          std::size_t samples,
                                          const std::vector<double>& rho_sweep,
                                          std::uint64_t seed) {
    require(m.form() != SpectrumForm::Custom,
            "increment variance check: needs a built-in spectrum form");
    require(gamma > 0.0 && gamma <= 1.0, "increment variance check: needs 0 < gamma <= 1");
    require(m.eta() <= 1.0, "increment variance check: needs eta <= 1");
    require(y.size() == static_cast<std::size_t>(m.dim()),
            "increment variance check: y needs dim components");
    require(samples >= 2, "increment variance check: needs at least two samples");
    require(!rho_sweep.empty(), "increment variance check: empty rho sweep");
    double rho_max = 0.0;
    for (double r : rho_sweep) {
        require(r >= 1.0 && std::isfinite(r),
                "increment variance check: sweep rho must be finite and >= 1");
        rho_max = std::max(rho_max, r);
    }
    const int d = m.dim();
    auto rebuild = [&](double rho) {
        return m.form() == SpectrumForm::VonKarman
                   ? SpectrumModel::von_karman(d, m.hurst(), m.eta(), rho,
                                               m.amplitude())
                   : SpectrumModel::power_law_bounded(d, m.hurst(), m.eta(), rho,
                                                      m.amplitude());
    };

    IncrementScaling rep;
    for (double r : rho_sweep) rep.cutoff.push_back(std::min(1.0 / gamma, r));

    double ynorm = 0.0;
    for (double v : y) ynorm += v * v;
    ynorm = std::sqrt(ynorm);
    if (ynorm == 0.0) {
        rep.quadrature.assign(rho_sweep.size(), 0.0);
        rep.mc.assign(rho_sweep.size(), 0.0);
        rep.mc_se.assign(rho_sweep.size(), 0.0);
        return rep;
    }

    // One grid for the whole sweep, sized by the largest cutoff; the offset
    // gamma*y is snapped to it and the quadrature evaluated at the snapped
    // lag, so both paths see the identical separation.
    const double dx = kTwoPi / (2.5 * rho_max);
    const double span = 40.0 / std::max(m.eta(), 0.25);
    std::size_t nx = 16;
    while (static_cast<double>(nx) * dx < span) nx *= 2;
    const std::size_t nz = 4;
    double cells = static_cast<double>(nz);
    for (int ax = 0; ax < d; ++ax) cells *= static_cast<double>(nx);
    require(cells <= 6.7e7,
            "increment variance check: grid estimate exceeds the resource ceiling");
    const TransverseGrid tg(d, nx, dx);
    const MediumGrid mg(tg, nz, 1.0 / (4.0 * rho_max));
    std::vector<long> off(static_cast<std::size_t>(d));
    double snapped2 = 0.0;
    bool nonzero = false;
    for (int ax = 0; ax < d; ++ax) {
        off[ax] = std::lround(gamma * y[static_cast<std::size_t>(ax)] / dx);
        nonzero = nonzero || off[ax] != 0;
        snapped2 += static_cast<double>(off[ax]) * static_cast<double>(off[ax]) * dx * dx;
    }
    require(nonzero, "increment variance check: gamma*y is below one grid cell");
    const double lag = std::sqrt(snapped2);

    const std::size_t pts = tg.points();
    std::vector<std::size_t> shifted(pts);
    std::vector<std::size_t> idx(static_cast<std::size_t>(d));
    for (std::size_t s = 0; s < pts; ++s) {
        tg.unflatten(s, idx.data());
        for (int ax = 0; ax < d; ++ax) {
            const long j = static_cast<long>(idx[ax]) + off[ax];
            idx[ax] = static_cast<std::size_t>(
                ((j % static_cast<long>(nx)) + static_cast<long>(nx)) %
                static_cast<long>(nx));
        }
        shifted[s] = tg.flatten(idx.data());
    }

    std::vector<double> means(samples);
    for (std::size_t i = 0; i < rho_sweep.size(); ++i) {
        const SpectrumModel mi = rebuild(rho_sweep[i]);
        rep.quadrature.push_back(structure_function(mi, lag));
        for (std::size_t r = 0; r < samples; ++r) {
            const MediumField f = synthesize_medium(mi, mg, seed + i, r);
            double acc = 0.0;
            for (std::size_t iz = 0; iz < nz; ++iz)
                for (std::size_t s = 0; s < pts; ++s) {
                    const double dv = f.value(iz, shifted[s]) - f.value(iz, s);
                    acc += dv * dv;
                }
            means[r] = acc / static_cast<double>(nz * pts);
        }
        const double mu = pairwise_sum(means) / static_cast<double>(samples);
        double var = 0.0;
        for (double v : means) var += (v - mu) * (v - mu);
        rep.mc.push_back(mu);
        rep.mc_se.push_back(
            std::sqrt(var / static_cast<double>(samples * (samples - 1))));
    }

    const auto slope = [&](const std::vector<double>& vals) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        const double n = static_cast<double>(vals.size());
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double lx = std::log(rep.cutoff[i]);
            const double ly = std::log(std::max(vals[i], 1e-300) / (gamma * gamma));
            sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        }
        const double den = n * sxx - sx * sx;
        return den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    };
    rep.slope_quadrature = slope(rep.quadrature);
    rep.slope_mc = slope(rep.mc);
    return rep;
}

std::vector<double> white_noise_screen(const SpectrumModel& m,
                                       const TransverseGrid& grid, double dz,
                                       std::uint64_t seed, std::uint64_t realization,
                                       std::uint64_t step, bool parallel) {
    return screen_impl(m, grid, dz, seed, realization, step, parallel);
}

std::vector<double> white_noise_screen_serial(const SpectrumModel& m,
                                              const TransverseGrid& grid, double dz,
                                              std::uint64_t seed,
                                              std::uint64_t realization,
                                              std::uint64_t step) {
    return screen_impl(m, grid, dz, seed, realization, step, false);
}

}  // namespace turbwig
