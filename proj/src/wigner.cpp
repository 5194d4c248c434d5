#include "turbwig/wigner.hpp"

#include <algorithm>
#include <cstddef>

#include "turbwig/common.hpp"
#include "turbwig/fft.hpp"

namespace turbwig {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr std::size_t kMaxDim = 3;

std::vector<std::size_t> fft_dims(const TransverseGrid& g) {
    return std::vector<std::size_t>(static_cast<std::size_t>(g.dim), g.n);
}

void warm_plan(const std::vector<std::size_t>& dims, std::size_t points, int sign) {
    std::vector<cplx> scratch(points);
    fft::c2c(dims, scratch.data(), scratch.data(), sign);
}

WignerDist transform_impl(const BeamState& s, double gamma, bool parallel) {
    const TransverseGrid& g = s.grid;
    require(std::isfinite(gamma) && gamma > 0.0, "wigner transform: gamma must be positive");
    require(g.n % 4 == 0,
            "wigner transform: grid size must be a multiple of 4 for the quarter-box lag window");
    require(s.psi.size() == g.points(), "wigner transform: field size does not match the grid");

    const std::size_t points = g.points();
    const std::size_t n = g.n;
    const std::size_t half = n / 2;
    const long quarter = static_cast<long>(n / 4);
    const double pref = std::pow(g.dx / (kPi * gamma), g.dim);
    const auto dims = fft_dims(g);

    WignerDist W;
    W.grid = g;
    W.gamma = gamma;
    W.z = s.z;
    W.w.assign(points * points, 0.0);

    warm_plan(dims, points, -1);

    double re_max = 0.0;
    double im_max = 0.0;
#pragma omp parallel reduction(max : re_max, im_max) if (parallel)
    {
        std::vector<cplx> corr(points);
        std::size_t xi[kMaxDim];
        std::size_t mi[kMaxDim];
        std::size_t ki[kMaxDim];
#pragma omp for schedule(static)
        for (std::size_t xflat = 0; xflat < points; ++xflat) {
            g.unflatten(xflat, xi);
            for (std::size_t mflat = 0; mflat < points; ++mflat) {
                g.unflatten(mflat, mi);
                std::size_t plus = 0;
                std::size_t minus = 0;
                bool keep = true;
                for (int ax = 0; ax < g.dim; ++ax) {
                    const long sm = fft_signed_index(mi[ax], n);
                    if (sm <= -quarter || sm >= quarter) {
                        keep = false;
                        break;
                    }
                    const long base = static_cast<long>(xi[ax]) + static_cast<long>(n);
                    plus = plus * n + static_cast<std::size_t>((base + sm) % static_cast<long>(n));
                    minus = minus * n + static_cast<std::size_t>((base - sm) % static_cast<long>(n));
                }
                corr[mflat] = keep ? s.psi[plus] * std::conj(s.psi[minus]) : cplx(0.0, 0.0);
            }
            fft::c2c(dims, corr.data(), corr.data(), -1);
            for (std::size_t kflat = 0; kflat < points; ++kflat) {
                g.unflatten(kflat, ki);
                std::size_t pflat = 0;
                for (int ax = 0; ax < g.dim; ++ax) pflat = pflat * n + (ki[ax] + half) % n;
                const cplx v = pref * corr[kflat];
                W.w[xflat * points + pflat] = v.real();
                re_max = std::max(re_max, std::abs(v.real()));
                im_max = std::max(im_max, std::abs(v.imag()));
            }
        }
    }

    W.imag_residual = re_max > 0.0 ? im_max / re_max : 0.0;
    require_runtime(W.imag_residual < 1e-10, "wigner transform: imaginary residue exceeds 1e-10");
    double norm2 = 0.0;
    for (const cplx& v : s.psi) norm2 += std::norm(v);
    norm2 *= g.cell_volume();
    const double bound = std::pow(kPi * gamma, -static_cast<double>(g.dim)) * norm2;
    require_runtime(re_max <= bound * (1.0 + 1e-12),
                    "wigner transform: sup bound (pi gamma)^{-d} ||psi||^2 violated");
    return W;
}

}  // namespace

WignerDist wigner_transform(const BeamState& s, double gamma, bool parallel) {
    return transform_impl(s, gamma, parallel);
}

WignerDist wigner_transform_serial(const BeamState& s, double gamma) {
    return transform_impl(s, gamma, false);
}

WignerDist mixed_state_wigner(const std::vector<BeamState>& beams,
                              const std::vector<double>& weights, double gamma,
                              bool parallel) {
    require(!beams.empty(), "mixed state: at least one component is required");
    require(beams.size() == weights.size(), "mixed state: one weight per component");
    double total = 0.0;
    for (double wt : weights) {
        require(std::isfinite(wt) && wt >= 0.0, "mixed state: weights must be nonnegative");
        total += wt;
    }
    require(std::abs(total - 1.0) <= 1e-9, "mixed state: weights must sum to one");
    for (const BeamState& b : beams)
        require(b.grid == beams.front().grid, "mixed state: components share one grid");

    WignerDist out = transform_impl(beams.front(), gamma, parallel);
    for (double& v : out.w) v *= weights.front();
    for (std::size_t j = 1; j < beams.size(); ++j) {
        const WignerDist Wj = transform_impl(beams[j], gamma, parallel);
        for (std::size_t i = 0; i < out.w.size(); ++i) out.w[i] += weights[j] * Wj.w[i];
        out.imag_residual = std::max(out.imag_residual, Wj.imag_residual);
    }
    return out;
}

WignerDist wkb_target(const TransverseGrid& g, double gamma,
                      const std::function<double(const double*)>& amplitude,
                      const std::function<double(const double*)>& phase,
                      double width) {
    require(std::isfinite(gamma) && gamma > 0.0, "wkb target: gamma must be positive");
    require(std::isfinite(width) && width > 0.0, "wkb target: width must be positive");
    require(amplitude && phase, "wkb target: amplitude and phase callbacks are required");

    const std::size_t points = g.points();
    WignerDist W;
    W.grid = g;
    W.gamma = gamma;
    W.w.assign(points * points, 0.0);

    const double norm = std::pow(2.0 * kPi * width * width, -0.5 * g.dim);
    const double dpv = W.dp();
    std::size_t xi[kMaxDim];
    std::size_t pi_[kMaxDim];
    double x[kMaxDim];
    double xs[kMaxDim];
    double gs[kMaxDim];
    for (std::size_t xflat = 0; xflat < points; ++xflat) {
        g.unflatten(xflat, xi);
        for (int ax = 0; ax < g.dim; ++ax) x[ax] = g.coord(xi[ax]);
        const double a0 = amplitude(x);
        const double dens = a0 * a0;
        for (int ax = 0; ax < g.dim; ++ax) {
            std::copy(x, x + g.dim, xs);
            xs[ax] = x[ax] + g.dx;
            const double sp = phase(xs);
            xs[ax] = x[ax] - g.dx;
            const double sm = phase(xs);
            gs[ax] = (sp - sm) / (2.0 * g.dx);
        }
        for (std::size_t pflat = 0; pflat < points; ++pflat) {
            g.unflatten(pflat, pi_);
            double arg = 0.0;
            for (int ax = 0; ax < g.dim; ++ax) {
                const double dpax =
                    (static_cast<double>(pi_[ax]) - 0.5 * static_cast<double>(g.n)) * dpv - gs[ax];
                arg += dpax * dpax;
            }
            W.w[xflat * points + pflat] = dens * norm * std::exp(-0.5 * arg / (width * width));
        }
    }
    return W;
}

double mass(const WignerDist& W) {
    double s = 0.0;
    for (double v : W.w) s += v;
    return s * W.cell();
}

double l2_norm(const WignerDist& W) {
    double s = 0.0;
    for (double v : W.w) s += v * v;
    return std::sqrt(s * W.cell());
}

double max_abs(const WignerDist& W) {
    double m = 0.0;
    for (double v : W.w) m = std::max(m, std::abs(v));
    return m;
}

std::vector<double> p_marginal(const WignerDist& W) {
    const std::size_t points = W.grid.points();
    const double pcell = std::pow(W.dp(), W.grid.dim);
    std::vector<double> out(points, 0.0);
    for (std::size_t xflat = 0; xflat < points; ++xflat) {
        double s = 0.0;
        for (std::size_t pflat = 0; pflat < points; ++pflat) s += W.w[xflat * points + pflat];
        out[xflat] = s * pcell;
    }
    return out;
}

std::vector<double> x_marginal(const WignerDist& W) {
    const std::size_t points = W.grid.points();
    std::vector<double> out(points, 0.0);
    for (std::size_t xflat = 0; xflat < points; ++xflat)
        for (std::size_t pflat = 0; pflat < points; ++pflat)
            out[pflat] += W.w[xflat * points + pflat];
    const double xcell = W.grid.cell_volume();
    for (double& v : out) v *= xcell;
    return out;
}

std::vector<double> flux_density(const WignerDist& W) {
    const TransverseGrid& g = W.grid;
    const std::size_t points = g.points();
    const double pcell = std::pow(W.dp(), g.dim);
    std::vector<double> out(points * g.dim, 0.0);
    std::size_t pi_[kMaxDim];
    for (std::size_t xflat = 0; xflat < points; ++xflat) {
        for (std::size_t pflat = 0; pflat < points; ++pflat) {
            const double v = W.w[xflat * points + pflat];
            g.unflatten(pflat, pi_);
            for (int ax = 0; ax < g.dim; ++ax)
                out[xflat * g.dim + ax] += v * W.pcoord(pi_[ax]);
        }
        for (int ax = 0; ax < g.dim; ++ax) out[xflat * g.dim + ax] *= pcell;
    }
    return out;
}

std::vector<double> second_moment_density(const WignerDist& W) {
    const TransverseGrid& g = W.grid;
    const std::size_t points = g.points();
    const double pcell = std::pow(W.dp(), g.dim);
    std::vector<double> out(points, 0.0);
    std::size_t pi_[kMaxDim];
    for (std::size_t xflat = 0; xflat < points; ++xflat) {
        double s = 0.0;
        for (std::size_t pflat = 0; pflat < points; ++pflat) {
            g.unflatten(pflat, pi_);
            double p2 = 0.0;
            for (int ax = 0; ax < g.dim; ++ax) {
                const double p = W.pcoord(pi_[ax]);
                p2 += p * p;
            }
            s += W.w[xflat * points + pflat] * p2;
        }
        out[xflat] = s * pcell;
    }
    return out;
}

double expectation(const WignerDist& W,
                   const std::function<double(const double*, const double*)>& obs) {
    require(static_cast<bool>(obs), "expectation: observable callback is required");
    const TransverseGrid& g = W.grid;
    const std::size_t points = g.points();
    std::size_t xi[kMaxDim];
    std::size_t pi_[kMaxDim];
    double x[kMaxDim];
    double p[kMaxDim];
    double s = 0.0;
    for (std::size_t xflat = 0; xflat < points; ++xflat) {
        g.unflatten(xflat, xi);
        for (int ax = 0; ax < g.dim; ++ax) x[ax] = g.coord(xi[ax]);
        for (std::size_t pflat = 0; pflat < points; ++pflat) {
            g.unflatten(pflat, pi_);
            for (int ax = 0; ax < g.dim; ++ax) p[ax] = W.pcoord(pi_[ax]);
            s += W.w[xflat * points + pflat] * obs(x, p);
        }
    }
    return s * W.cell();
}

MarginalSet marginals_and_flux(const WignerDist& W) {
    return MarginalSet{p_marginal(W), flux_density(W), second_moment_density(W)};
}

WignerDist free_transport(const WignerDist& W0, double kbar, double z, bool parallel) {
    require(std::isfinite(kbar) && kbar > 0.0, "free transport: kbar must be positive");
    require(std::isfinite(z), "free transport: distance must be finite");
    const TransverseGrid& g = W0.grid;
    const std::size_t points = g.points();
    const std::size_t n = g.n;
    const auto dims = fft_dims(g);
    const double scale = 1.0 / static_cast<double>(points);

    WignerDist W = W0;
    W.z = W0.z + z;

    warm_plan(dims, points, -1);
    warm_plan(dims, points, +1);

    double re_max = 0.0;
    double im_max = 0.0;
#pragma omp parallel reduction(max : re_max, im_max) if (parallel)
    {
        std::vector<cplx> row(points);
        std::size_t pi_[kMaxDim];
        std::size_t ki[kMaxDim];
        double shift[kMaxDim];
#pragma omp for schedule(static)
        for (std::size_t pflat = 0; pflat < points; ++pflat) {
            g.unflatten(pflat, pi_);
            for (int ax = 0; ax < g.dim; ++ax) shift[ax] = z * W.pcoord(pi_[ax]) / kbar;
            for (std::size_t xflat = 0; xflat < points; ++xflat)
                row[xflat] = cplx(W0.w[xflat * points + pflat], 0.0);
            fft::c2c(dims, row.data(), row.data(), -1);
            for (std::size_t kflat = 0; kflat < points; ++kflat) {
                g.unflatten(kflat, ki);
                cplx factor(scale, 0.0);
                for (int ax = 0; ax < g.dim; ++ax) {
                    const double q = g.wavenumber(ki[ax]);
                    const double arg = q * shift[ax];
                    if (ki[ax] == n / 2)
                        factor *= std::cos(arg);
                    else
                        factor *= cplx(std::cos(arg), -std::sin(arg));
                }
                row[kflat] *= factor;
            }
            fft::c2c(dims, row.data(), row.data(), +1);
            for (std::size_t xflat = 0; xflat < points; ++xflat) {
                const cplx v = row[xflat];
                W.w[xflat * points + pflat] = v.real();
                re_max = std::max(re_max, std::abs(v.real()));
                im_max = std::max(im_max, std::abs(v.imag()));
            }
        }
    }

    W.imag_residual = re_max > 0.0 ? im_max / re_max : 0.0;
    require_runtime(W.imag_residual < 1e-10, "free transport: imaginary residue exceeds 1e-10");
    return W;
}

}  // namespace turbwig
