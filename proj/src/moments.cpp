#include "turbwig/moments.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "turbwig/common.hpp"
#include "turbwig/fft.hpp"
#include "turbwig/medium.hpp"
#include "turbwig/rays.hpp"
#include "turbwig/rng.hpp"

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

// Spectral step of the p-Fourier lattice: mode m carries y = ystep * signed(m).
double p_mode_step(const WignerDist& W) {
    return 2.0 * kPi / (static_cast<double>(W.grid.n) * W.dp());
}

template <class F>
double simpson_panels(const F& f, double a, double b, std::size_t panels) {
    const double h = (b - a) / static_cast<double>(panels);
    double s = f(a) + f(b);
    for (std::size_t i = 1; i < panels; ++i)
        s += ((i & 1) ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
    return s * h / 3.0;
}

// \int_0^z g(|y + s xi/ktilde|) ds for dim >= 2, by doubling Simpson panels
// until two refinements agree. The radius is smooth in s except for one C^1
// kink when the line passes through the origin, which the doubling absorbs.
double line_integral_table(const EvenTable& gt, const double* yv, const double* xi,
                           int dim, double z, double ktilde) {
    auto f = [&](double s) {
        double r2 = 0.0;
        for (int ax = 0; ax < dim; ++ax) {
            const double v = yv[ax] + s * xi[ax] / ktilde;
            r2 += v * v;
        }
        return gt.eval(std::sqrt(r2));
    };
    double prev = simpson_panels(f, 0.0, z, 8);
    for (std::size_t panels = 16; panels <= 8192; panels *= 2) {
        const double cur = simpson_panels(f, 0.0, z, panels);
        if (std::abs(cur - prev) <= 1e-13 + 1e-11 * std::abs(cur)) return cur;
        prev = cur;
    }
    return prev;
}

// Direct quadrature of gamma^2 g = \int Phi_eff(q) (1 - cos(w q)) dq for
// one-dimensional spectra with no infrared cutoff (the covariance difference
// is unusable there because \int Phi_eff diverges at q = 0). The head is
// integrated with half-period breakpoints; past S the monotone part goes
// through a 1/q substitution and the cosine part is integrated by parts
// twice, with S doubled until the parts estimate resolves the total.
double damping_direct_1d(const SpectrumModel& m, double w, double tol) {
    auto phieff = [&m](double s) { return 2.0 * kPi * m.eval_radial(s); };
    auto head_fn = [&](double s) {
        const double half = std::sin(0.5 * w * s);
        return phieff(s) * 4.0 * half * half;
    };
    const double target_rel = std::max(tol, 1e-9);
    double S = std::max(80.0 * kPi / w, 1.0);
    double head = quad::integrate_segments(head_fn, quad::split_points(0.0, S, kPi / w),
                                           1e-300, 1e-10)
                      .value;
    double total = head;
    for (int pass = 0; pass < 10; ++pass) {
        auto tail_fn = [&](double t) {
            const double s = S / t;
            return phieff(s) * s / t;
        };
        const double tail_mono = 2.0 * quad::integrate(tail_fn, 0.0, 1.0, 1e-300, 1e-10).value;
        const double hs = 1e-5 * S;
        const double e0 = phieff(S);
        const double ep = phieff(S + hs);
        const double em = phieff(S - hs);
        const double e1 = (ep - em) / (2.0 * hs);
        const double e2 = (ep - 2.0 * e0 + em) / (hs * hs);
        const double osc =
            2.0 * e0 * std::sin(w * S) / w + 2.0 * e1 * std::cos(w * S) / (w * w);
        total = head + tail_mono + osc;
        const double rem = 3.0 * std::abs(e2) / (w * w * w);
        if (rem <= target_rel * std::max(std::abs(total), 1e-300)) break;
        head += quad::integrate_segments(head_fn, quad::split_points(S, 2.0 * S, kPi / w),
                                         1e-300, 1e-10)
                    .value;
        S *= 2.0;
    }
    return total;
}

// Periodic Catmull-Rom interpolation along the p row of one x site (dim 1).
double pinterp_row(const WignerDist& W, std::size_t xflat, double p) {
    const long n = static_cast<long>(W.grid.n);
    const double* row = W.w.data() + xflat * W.grid.points();
    const double t = p / W.dp() + 0.5 * static_cast<double>(n);
    const double tf = std::floor(t);
    const double u = t - tf;
    const long i1 = static_cast<long>(tf);
    auto wrap = [n](long i) {
        i %= n;
        if (i < 0) i += n;
        return static_cast<std::size_t>(i);
    };
    const double f0 = row[wrap(i1 - 1)];
    const double f1 = row[wrap(i1)];
    const double f2 = row[wrap(i1 + 1)];
    const double f3 = row[wrap(i1 + 2)];
    const double a0 = -0.5 * f0 + 1.5 * f1 - 1.5 * f2 + 0.5 * f3;
    const double a1 = f0 - 2.5 * f1 + 2.0 * f2 - 0.5 * f3;
    const double a2 = 0.5 * (f2 - f0);
    return ((a0 * u + a1) * u + a2) * u + f1;
}

// Multiplies every p row by a real multiplier over the p-Fourier lattice.
// Even multipliers keep the rows real; the residual imaginary part is
// recorded, not enforced.
template <class F>
WignerDist p_multiplier(const WignerDist& theta, F&& mult, bool parallel) {
    const TransverseGrid& g = theta.grid;
    const std::size_t n = g.n;
    const std::size_t points = g.points();
    require(theta.w.size() == points * points,
            "moment operator: field size does not match the grid");
    const double ystep = p_mode_step(theta);
    const auto dims = fft_dims(g);

    std::vector<double> mvals(points);
    {
        std::size_t mi[kMaxDim];
        double y[kMaxDim];
        for (std::size_t mflat = 0; mflat < points; ++mflat) {
            g.unflatten(mflat, mi);
            for (int ax = 0; ax < g.dim; ++ax)
                y[ax] = ystep * static_cast<double>(fft_signed_index(mi[ax], n));
            mvals[mflat] = mult(y) / static_cast<double>(points);
        }
    }

    WignerDist out = theta;
    warm_plan(dims, points, -1);
    warm_plan(dims, points, 1);
    double re_max = 0.0, im_max = 0.0;
#pragma omp parallel reduction(max : re_max, im_max) if (parallel)
    {
        std::vector<cplx> row(points);
#pragma omp for schedule(static)
        for (std::size_t xflat = 0; xflat < points; ++xflat) {
            const double* src = theta.w.data() + xflat * points;
            for (std::size_t i = 0; i < points; ++i) row[i] = cplx(src[i], 0.0);
            fft::c2c(dims, row.data(), row.data(), -1);
            for (std::size_t i = 0; i < points; ++i) row[i] *= mvals[i];
            fft::c2c(dims, row.data(), row.data(), 1);
            double* dst = out.w.data() + xflat * points;
            for (std::size_t i = 0; i < points; ++i) {
                dst[i] = row[i].real();
                re_max = std::max(re_max, std::abs(row[i].real()));
                im_max = std::max(im_max, std::abs(row[i].imag()));
            }
        }
    }
    out.imag_residual = re_max > 0.0 ? im_max / re_max : 0.0;
    return out;
}

// Multiplies the joint (x,p)-Fourier lattice by lam(xi, y) in place. Axes
// sitting on the Nyquist bin get the factor averaged over both frequency
// signs, which keeps the multiplier conjugate symmetric and the field real.
// The zero mode is left untouched, so the total mass cannot move.
template <class F>
void apply_joint_multiplier(WignerDist& W, F&& lam, bool parallel) {
    const TransverseGrid& g = W.grid;
    const int d = g.dim;
    const std::size_t n = g.n;
    const std::size_t points = g.points();
    const std::size_t cells = points * points;
    const double ystep = p_mode_step(W);
    const std::vector<std::size_t> dims2(static_cast<std::size_t>(2 * d), n);

    std::vector<cplx> buf(cells);
    for (std::size_t i = 0; i < cells; ++i) buf[i] = cplx(W.w[i], 0.0);
    fft::c2c(dims2, buf.data(), buf.data(), -1);

    const double scale = 1.0 / static_cast<double>(cells);
#pragma omp parallel if (parallel)
    {
        std::size_t ki[kMaxDim], mi[kMaxDim];
#pragma omp for schedule(static)
        for (std::size_t flat = 0; flat < cells; ++flat) {
            if (flat == 0) {
                buf[0] *= scale;
                continue;
            }
            g.unflatten(flat / points, ki);
            g.unflatten(flat % points, mi);
            double base_xi[kMaxDim], base_y[kMaxDim];
            int nyq[2 * kMaxDim];
            int nnyq = 0;
            for (int ax = 0; ax < d; ++ax) {
                base_xi[ax] = g.wavenumber(ki[ax]);
                if (ki[ax] == n / 2) nyq[nnyq++] = ax;
            }
            for (int ax = 0; ax < d; ++ax) {
                base_y[ax] = ystep * static_cast<double>(fft_signed_index(mi[ax], n));
                if (mi[ax] == n / 2) nyq[nnyq++] = d + ax;
            }
            double factor;
            if (nnyq == 0) {
                factor = lam(base_xi, base_y);
            } else {
                double acc = 0.0;
                double cxi[kMaxDim], cy[kMaxDim];
                for (int combo = 0; combo < (1 << nnyq); ++combo) {
                    for (int ax = 0; ax < d; ++ax) {
                        cxi[ax] = base_xi[ax];
                        cy[ax] = base_y[ax];
                    }
                    for (int b = 0; b < nnyq; ++b)
                        if (combo >> b & 1) {
                            const int ax = nyq[b];
                            if (ax < d)
                                cxi[ax] = -cxi[ax];
                            else
                                cy[ax - d] = -cy[ax - d];
                        }
                    acc += lam(cxi, cy);
                }
                factor = acc / static_cast<double>(1 << nnyq);
            }
            buf[flat] *= factor * scale;
        }
    }
    fft::c2c(dims2, buf.data(), buf.data(), 1);
    double re_max = 0.0, im_max = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        W.w[i] = buf[i].real();
        re_max = std::max(re_max, std::abs(buf[i].real()));
        im_max = std::max(im_max, std::abs(buf[i].imag()));
    }
    W.imag_residual = re_max > 0.0 ? im_max / re_max : 0.0;
}

MomentField wrap_grid(WignerDist W) {
    MomentField f;
    f.order = 1;
    f.dim = W.grid.dim;
    f.z = W.z;
    f.grid = std::move(W);
    return f;
}

void check_transport_fits(const WignerDist& w0, double z, double ktilde,
                          const std::string& who) {
    const double pmax = 0.5 * static_cast<double>(w0.grid.n) * w0.dp();
    require(z * pmax / ktilde <= 0.5 * w0.grid.length() * (1.0 + 1e-9),
            who + ": transport displacement exceeds half the spatial box");
}

void check_gamma(const WignerDist& w, const WhiteNoiseModel& model,
                 const std::string& who) {
    require(std::abs(w.gamma - model.gamma()) <= 1e-12 * model.gamma(),
            who + ": distribution gamma does not match the model");
}

// Spectral d/dp rows of one x site, with the (unpaired) Nyquist mode dropped.
std::vector<double> p_gradient_rows(const WignerDist& W, std::size_t xflat) {
    const TransverseGrid& g = W.grid;
    const int d = g.dim;
    const std::size_t n = g.n;
    const std::size_t points = g.points();
    const double ystep = p_mode_step(W);
    const auto dims = fft_dims(g);
    std::vector<cplx> spec(points), work(points);
    for (std::size_t i = 0; i < points; ++i) spec[i] = cplx(W.w[xflat * points + i], 0.0);
    fft::c2c(dims, spec.data(), spec.data(), -1);
    std::vector<double> out(static_cast<std::size_t>(d) * points);
    std::size_t mi[kMaxDim];
    const double scale = 1.0 / static_cast<double>(points);
    for (int ax = 0; ax < d; ++ax) {
        for (std::size_t mflat = 0; mflat < points; ++mflat) {
            g.unflatten(mflat, mi);
            if (mi[ax] == n / 2) {
                work[mflat] = cplx(0.0, 0.0);
                continue;
            }
            const double y = ystep * static_cast<double>(fft_signed_index(mi[ax], n));
            work[mflat] = spec[mflat] * cplx(0.0, y * scale);
        }
        fft::c2c(dims, work.data(), work.data(), 1);
        for (std::size_t i = 0; i < points; ++i) out[static_cast<std::size_t>(ax) * points + i] = work[i].real();
    }
    return out;
}

double min_image(double v, double period) {
    return v - period * std::nearbyint(v / period);
}

}  // namespace

WhiteNoiseModel::WhiteNoiseModel(LimitRegime regime, SpectrumModel spectrum,
                                 double ktilde, double gamma, BackgroundModel background)
    : regime_(regime),
      spectrum_(std::move(spectrum)),
      ktilde_(ktilde),
      gamma_(gamma),
      background_(std::move(background)) {
    require(std::isfinite(ktilde_) && ktilde_ > 0.0,
            "white-noise model: ktilde must be positive");
    require(spectrum_.isotropic(), "white-noise model: the spectrum must be isotropic");
    if (regime_ == LimitRegime::WignerMoyal) {
        require(std::isfinite(gamma_) && gamma_ > 0.0,
                "white-noise model: the Wigner-Moyal regime needs gamma > 0");
        require(spectrum_.wm_damping_finite(),
                "white-noise model: the damping integral diverges for this spectrum "
                "(need eta > 0 or H < 1/2)");
    } else {
        require(gamma_ == 0.0, "white-noise model: the Liouville regime fixes gamma = 0");
        require(spectrum_.second_moment_finite(),
                "white-noise model: the second transverse moment diverges for this spectrum");
    }
}

EvenTable wm_damping_table(const SpectrumModel& m, double gamma, double ymax, double tol) {
    require(m.isotropic(), "wm damping: spectrum must be isotropic");
    require(std::isfinite(gamma) && gamma > 0.0, "wm damping: gamma must be positive");
    require(std::isfinite(ymax) && ymax > 0.0, "wm damping: ymax must be positive");
    require(m.wm_damping_finite(),
            "wm damping: integral diverges (need eta > 0 or H < 1/2)");
    const double inv_g2 = 1.0 / (gamma * gamma);
    if (m.zeroth_moment_finite()) {
        // g = (C(0) - C(gamma y)) / gamma^2; one shared table keeps the
        // difference self-consistent, and the max(0,.) guards roundoff where
        // the covariance has barely decayed.
        const EvenTable ctable = transverse_covariance_table(
            m, gamma * ymax * (1.0 + 1e-6), std::min(tol, 1e-10));
        const double c0 = ctable.eval(0.0);
        auto fn = [&ctable, c0, gamma, inv_g2](double u) {
            if (u == 0.0) return 0.0;
            return std::max(0.0, c0 - ctable.eval(gamma * u)) * inv_g2;
        };
        return EvenTable(fn, ymax, tol);
    }
    require(m.dim() == 1,
            "wm damping: spectra with a divergent zeroth moment are handled in one "
            "transverse dimension only");
    auto fn = [&m, gamma, inv_g2, tol](double u) {
        if (u == 0.0) return 0.0;
        return damping_direct_1d(m, gamma * u, tol) * inv_g2;
    };
    return EvenTable(fn, ymax, tol);
}

WignerDist apply_Q0_wm(const WignerDist& theta, const WhiteNoiseModel& model, bool parallel) {
    require(model.regime() == LimitRegime::WignerMoyal,
            "apply_Q0_wm: model regime is not Wigner-Moyal");
    require(model.spectrum().dim() == theta.grid.dim,
            "apply_Q0_wm: spectrum dimension must match the lattice");
    check_gamma(theta, model, "apply_Q0_wm");
    const double ymax =
        std::sqrt(static_cast<double>(theta.grid.dim)) * kPi / theta.dp() * (1.0 + 1e-6);
    const EvenTable gt = wm_damping_table(model.spectrum(), model.gamma(), ymax);
    const int d = theta.grid.dim;
    auto mult = [&gt, d](const double* y) {
        double r2 = 0.0;
        for (int ax = 0; ax < d; ++ax) r2 += y[ax] * y[ax];
        return -gt.eval(std::sqrt(r2));
    };
    return p_multiplier(theta, mult, parallel);
}

WignerDist apply_Q0_liouville(const WignerDist& theta, const WhiteNoiseModel& model,
                              bool parallel) {
    require(model.regime() == LimitRegime::Liouville,
            "apply_Q0_liouville: model regime is not Liouville");
    require(model.spectrum().dim() == theta.grid.dim,
            "apply_Q0_liouville: spectrum dimension must match the lattice");
    const int d = theta.grid.dim;
    const double c = transverse_moment2(model.spectrum()) / static_cast<double>(d);
    auto mult = [c, d](const double* y) {
        double r2 = 0.0;
        for (int ax = 0; ax < d; ++ax) r2 += y[ax] * y[ax];
        return -0.5 * c * r2;
    };
    return p_multiplier(theta, mult, parallel);
}

std::vector<double> apply_Q_cross(const WignerDist& theta1, const WignerDist& theta2,
                                  const WhiteNoiseModel& model,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& nodes,
                                  bool parallel) {
    const TransverseGrid& g = theta1.grid;
    require(g == theta2.grid, "apply_Q_cross: distributions must share one lattice");
    require(std::abs(theta1.gamma - theta2.gamma) <= 1e-12 * theta1.gamma,
            "apply_Q_cross: distributions must share one momentum lattice");
    require(model.spectrum().dim() == g.dim,
            "apply_Q_cross: spectrum dimension must match the lattice");
    const std::size_t points = g.points();
    const std::size_t cells = points * points;
    require(theta1.w.size() == cells && theta2.w.size() == cells,
            "apply_Q_cross: field size does not match the grid");
    for (const auto& nd : nodes)
        require(nd.first < cells && nd.second < cells,
                "apply_Q_cross: node index outside the phase-space lattice");

    std::vector<double> out(nodes.size(), 0.0);
    const double L = g.length();

    if (model.regime() == LimitRegime::WignerMoyal) {
        check_gamma(theta1, model, "apply_Q_cross");
        require(g.dim == 1,
                "apply_Q_cross: the Wigner-Moyal kernel is implemented in one transverse "
                "dimension");
        const SpectrumModel& m = model.spectrum();
        const double gamma = model.gamma();
        const double dp = theta1.dp();
        double m1 = 0.0, m2 = 0.0;
        for (double v : theta1.w) m1 = std::max(m1, std::abs(v));
        for (double v : theta2.w) m2 = std::max(m2, std::abs(v));
        const double scale_ref = 4.0 * m1 * m2;
        const double inv_g2 = 1.0 / (gamma * gamma);

#pragma omp parallel for schedule(dynamic) if (parallel)
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const std::size_t x1 = nodes[i].first / points;
            const std::size_t p1 = nodes[i].first % points;
            const std::size_t x2 = nodes[i].second / points;
            const std::size_t p2 = nodes[i].second % points;
            const double sep = min_image(g.coord(x1) - g.coord(x2), L);
            const double pc1 = theta1.pcoord(p1);
            const double pc2 = theta2.pcoord(p2);
            auto f = [&](double q) {
                const double shift = 0.5 * gamma * q;
                const double b1 =
                    pinterp_row(theta1, x1, pc1 - shift) - pinterp_row(theta1, x1, pc1 + shift);
                const double b2 =
                    pinterp_row(theta2, x2, pc2 - shift) - pinterp_row(theta2, x2, pc2 + shift);
                return 2.0 * kPi * m.eval_radial(q) * std::cos(q * sep) * b1 * b2;
            };
            const double step = std::min(
                std::abs(sep) > 1e-12 ? kPi / std::abs(sep) : 1e300, 2.0 * dp / gamma);
            double total = 0.0;
            double q0 = 0.0;
            double q1 = 1.0 + m.eta();
            int calm = 0;
            for (int oct = 0; oct < 48 && calm < 2; ++oct) {
                const double contrib =
                    quad::integrate_segments(f, quad::split_points(q0, q1, step, 200000),
                                             1e-13 * scale_ref, 1e-9)
                        .value;
                total += contrib;
                if (std::abs(contrib) <= 1e-11 * scale_ref + 1e-9 * std::abs(total))
                    ++calm;
                else
                    calm = 0;
                q0 = q1;
                q1 *= 2.0;
            }
            out[i] = total * inv_g2;
        }
        return out;
    }

    // Liouville: grad_p theta1 . (D(x1-x2)/2) . grad_p theta2 with spectral
    // gradients, the separation wrapped to the nearest periodic image.
    const int d = g.dim;
    std::map<std::size_t, std::vector<double>> grads1, grads2;
    for (const auto& nd : nodes) {
        const std::size_t x1 = nd.first / points;
        const std::size_t x2 = nd.second / points;
        if (!grads1.count(x1)) grads1.emplace(x1, p_gradient_rows(theta1, x1));
        if (!grads2.count(x2)) grads2.emplace(x2, p_gradient_rows(theta2, x2));
    }
    const double rmax = std::sqrt(static_cast<double>(d)) * 0.5 * L * (1.0 + 1e-6) + g.dx;
    const DiffusionTensor tensor(model.spectrum(), rmax);

#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::size_t x1 = nodes[i].first / points;
        const std::size_t p1 = nodes[i].first % points;
        const std::size_t x2 = nodes[i].second / points;
        const std::size_t p2 = nodes[i].second % points;
        std::size_t i1[kMaxDim], i2[kMaxDim];
        g.unflatten(x1, i1);
        g.unflatten(x2, i2);
        std::vector<double> sep(static_cast<std::size_t>(d));
        for (int ax = 0; ax < d; ++ax)
            sep[static_cast<std::size_t>(ax)] = min_image(g.coord(i1[ax]) - g.coord(i2[ax]), L);
        const std::vector<double> D = tensor.at(sep);
        const std::vector<double>& g1 = grads1.at(x1);
        const std::vector<double>& g2 = grads2.at(x2);
        double v = 0.0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b)
                v += g1[static_cast<std::size_t>(a) * points + p1] * D[static_cast<std::size_t>(a * d + b)] *
                     g2[static_cast<std::size_t>(b) * points + p2];
        out[i] = 0.5 * v;
    }
    return out;
}

MomentField solve_mean_wm(const WignerDist& w0, const WhiteNoiseModel& model, double z,
                          bool parallel) {
    require(model.regime() == LimitRegime::WignerMoyal,
            "solve_mean_wm: model regime is not Wigner-Moyal");
    require(model.background().trivial(),
            "solve_mean_wm: background must be trivial (mu = 1, V0 = 0)");
    require(model.spectrum().dim() == w0.grid.dim,
            "solve_mean_wm: spectrum dimension must match the field");
    require(w0.w.size() == w0.cells(), "solve_mean_wm: field size does not match the grid");
    check_gamma(w0, model, "solve_mean_wm");
    require(std::isfinite(z) && z >= 0.0, "solve_mean_wm: z must be nonnegative");
    if (z == 0.0) return wrap_grid(w0);
    check_transport_fits(w0, z, model.ktilde(), "solve_mean_wm");

    const int d = w0.grid.dim;
    const double ktilde = model.ktilde();
    const double kt2 = ktilde * ktilde;
    const double ymax = std::sqrt(static_cast<double>(d)) *
                        (kPi / w0.dp() + z * kPi / (w0.grid.dx * ktilde)) * (1.0 + 1e-6);
    const EvenTable gt = wm_damping_table(model.spectrum(), model.gamma(), ymax);

    WignerDist F = free_transport(w0, ktilde, z, parallel);
    auto lam = [&](const double* xi, const double* yv) {
        double line;
        if (d == 1) {
            const double del = z * xi[0] / ktilde;
            if (std::abs(del) <= 1e-9 * (std::abs(yv[0]) + 1.0)) {
                line = z * gt.eval(yv[0]);
            } else {
                line = (gt.primitive(yv[0] + del) - gt.primitive(yv[0])) * (ktilde / xi[0]);
            }
        } else {
            line = line_integral_table(gt, yv, xi, d, z, ktilde);
        }
        return std::exp(-kt2 * line);
    };
    apply_joint_multiplier(F, lam, parallel);
    return wrap_grid(std::move(F));
}

MomentField solve_mean_liouville(const WignerDist& w0, const WhiteNoiseModel& model,
                                 double z, bool parallel) {
    require(model.regime() == LimitRegime::Liouville,
            "solve_mean_liouville: model regime is not Liouville");
    require(model.background().trivial(),
            "solve_mean_liouville: background must be trivial (mu = 1, V0 = 0)");
    require(model.spectrum().dim() == w0.grid.dim,
            "solve_mean_liouville: spectrum dimension must match the field");
    require(w0.w.size() == w0.cells(),
            "solve_mean_liouville: field size does not match the grid");
    require(std::isfinite(z) && z >= 0.0, "solve_mean_liouville: z must be nonnegative");
    if (z == 0.0) return wrap_grid(w0);
    check_transport_fits(w0, z, model.ktilde(), "solve_mean_liouville");

    const int d = w0.grid.dim;
    const double ktilde = model.ktilde();
    const double kt2 = ktilde * ktilde;
    const double c = transverse_moment2(model.spectrum()) / static_cast<double>(d);

    WignerDist F = free_transport(w0, ktilde, z, parallel);
    auto lam = [&](const double* xi, const double* yv) {
        double yy = 0.0, yx = 0.0, xx = 0.0;
        for (int ax = 0; ax < d; ++ax) {
            yy += yv[ax] * yv[ax];
            yx += yv[ax] * xi[ax];
            xx += xi[ax] * xi[ax];
        }
        const double line =
            0.5 * c * (yy * z + yx * z * z / ktilde + xx * z * z * z / (3.0 * ktilde * ktilde));
        return std::exp(-kt2 * line);
    };
    apply_joint_multiplier(F, lam, parallel);
    return wrap_grid(std::move(F));
}

MomentField solve_npoint_liouville(const std::vector<WignerDist>& w0,
                                   const WhiteNoiseModel& model, int order, double z,
                                   double dz, const std::vector<std::vector<double>>& probes,
                                   std::size_t ntuples, double bandwidth_x,
                                   double bandwidth_p, std::uint64_t seed, bool parallel) {
    require(model.regime() == LimitRegime::Liouville,
            "solve_npoint_liouville: model regime is not Liouville");
    require(order >= 1 && order <= 4, "solve_npoint_liouville: order must be between 1 and 4");
    require(!w0.empty() &&
                (w0.size() == 1 || w0.size() == static_cast<std::size_t>(order)),
            "solve_npoint_liouville: pass one shared initial field or one per tuple member");
    const int d = w0.front().grid.dim;
    for (const WignerDist& W : w0) {
        require(W.grid.dim == d, "solve_npoint_liouville: member dimensions must agree");
        require(W.w.size() == W.cells(),
                "solve_npoint_liouville: field size does not match the grid");
        require(std::abs(W.z - w0.front().z) <= 1e-12,
                "solve_npoint_liouville: member fields must start at one height");
    }
    require(model.spectrum().dim() == d,
            "solve_npoint_liouville: spectrum dimension must match the fields");
    require(std::isfinite(z) && z >= 0.0, "solve_npoint_liouville: z must be nonnegative");
    require(ntuples >= 2, "solve_npoint_liouville: at least two tuples are needed");
    require(bandwidth_x > 0.0 && bandwidth_p > 0.0,
            "solve_npoint_liouville: bandwidths must be positive");
    if (z > 0.0) {
        require(dz > 0.0, "solve_npoint_liouville: dz must be positive");
        const double steps = std::nearbyint(z / dz);
        require(steps >= 1.0 && std::abs(steps * dz - z) <= 1e-9 * std::max(1.0, z),
                "solve_npoint_liouville: z must be a whole number of dz steps");
    }
    for (const auto& pr : probes) {
        require(pr.size() == static_cast<std::size_t>(2 * order * d),
                "solve_npoint_liouville: probe length must be 2 * order * dim");
        for (int j = 0; j < order; ++j) {
            const WignerDist& W = w0[w0.size() == 1 ? 0 : static_cast<std::size_t>(j)];
            for (int ax = 0; ax < d; ++ax) {
                const double X = pr[static_cast<std::size_t>((2 * j) * d + ax)];
                const double P = pr[static_cast<std::size_t>((2 * j + 1) * d + ax)];
                require(std::abs(X) <= 0.5 * W.grid.length() &&
                            P >= W.pcoord(0) && P <= W.pcoord(W.grid.n - 1),
                        "solve_npoint_liouville: probe outside the initial phase-space box");
            }
        }
    }

    struct Sampler {
        const WignerDist* W;
        std::vector<double> cum;
        double mass = 0.0;
    };
    std::vector<Sampler> samplers(w0.size());
    for (std::size_t s = 0; s < w0.size(); ++s) {
        const WignerDist& W = w0[s];
        samplers[s].W = &W;
        samplers[s].cum.resize(W.cells());
        double run = 0.0;
        for (std::size_t i = 0; i < W.cells(); ++i) {
            run += std::max(0.0, W.w[i]);
            samplers[s].cum[i] = run;
        }
        require(run > 0.0, "solve_npoint_liouville: initial field has no positive mass");
        samplers[s].mass = run * W.cell();
    }

    RayEnsemble e;
    e.dim = d;
    e.tuple = order;
    e.seed = seed;
    e.z = w0.front().z;
    e.x.resize(ntuples * static_cast<std::size_t>(order) * static_cast<std::size_t>(d));
    e.p.resize(e.x.size());
    e.weight.assign(ntuples, 1.0 / static_cast<double>(ntuples));

#pragma omp parallel for schedule(static) if (parallel)
    for (std::size_t t = 0; t < ntuples; ++t) {
        Philox gen(seed, rng_stream(t, RngChannel::RayInit));
        std::uint64_t ctr = 0;
        double held = 0.0;
        bool has = false;
        auto uni = [&]() {
            if (has) {
                has = false;
                return held;
            }
            double a, b;
            gen.uniforms2(ctr++, a, b);
            held = b;
            has = true;
            return a;
        };
        std::size_t xi[kMaxDim], pi[kMaxDim];
        for (int j = 0; j < order; ++j) {
            const Sampler& S = samplers[w0.size() == 1 ? 0 : static_cast<std::size_t>(j)];
            const WignerDist& W = *S.W;
            const TransverseGrid& gg = W.grid;
            const double pick = uni() * S.cum.back();
            std::size_t cell = static_cast<std::size_t>(
                std::upper_bound(S.cum.begin(), S.cum.end(), pick) - S.cum.begin());
            cell = std::min(cell, W.cells() - 1);
            gg.unflatten(cell / gg.points(), xi);
            gg.unflatten(cell % gg.points(), pi);
            for (int ax = 0; ax < d; ++ax)
                e.x_at(t, j, ax) = gg.coord(xi[ax]) + (uni() - 0.5) * gg.dx;
            for (int ax = 0; ax < d; ++ax)
                e.p_at(t, j, ax) = W.pcoord(pi[ax]) + (uni() - 0.5) * W.dp();
        }
    }
    e.validate();

    if (z > 0.0) {
        double maxl = 0.0, pbox = 0.0;
        for (const WignerDist& W : w0) {
            maxl = std::max(maxl, W.grid.length());
            pbox = std::max(pbox, 0.5 * static_cast<double>(W.grid.n) * W.dp());
        }
        const double c0 = transverse_moment2(model.spectrum()) / static_cast<double>(d);
        const double kick = 6.0 * model.ktilde() * std::sqrt(std::max(c0, 0.0) * z);
        const double rmax = std::sqrt(static_cast<double>(d)) *
                                (maxl + 2.0 * z * (pbox + kick) / model.ktilde()) +
                            1.0;
        const DiffusionTensor tensor(model.spectrum(), rmax);
        e = trace_rays_sde(std::move(e), tensor, model.background(), model.ktilde(), z, dz,
                           seed, parallel);
    }

    MomentField mf = estimate_phase_space_density(e, probes, bandwidth_x, bandwidth_p, parallel);
    double scale = 1.0;
    if (w0.size() == 1) {
        scale = std::pow(samplers[0].mass, order);
    } else {
        for (const Sampler& S : samplers) scale *= S.mass;
    }
    for (double& v : mf.values) v *= scale;
    for (double& err : mf.errors)
        if (std::isfinite(err)) err *= scale;
    return mf;
}

MomentField solve_pair_liouville_grid(const WignerDist& w0, const WhiteNoiseModel& model,
                                      double z, std::size_t nsteps,
                                      const std::vector<std::vector<double>>& probes,
                                      bool parallel) {
    require(model.regime() == LimitRegime::Liouville,
            "solve_pair_liouville_grid: model regime is not Liouville");
    require(model.background().trivial(),
            "solve_pair_liouville_grid: background must be trivial (mu = 1, V0 = 0)");
    const TransverseGrid& g = w0.grid;
    require(g.dim == 1 && model.spectrum().dim() == 1,
            "solve_pair_liouville_grid: one transverse dimension only");
    const std::size_t n = g.n;
    require(n <= 48, "solve_pair_liouville_grid: grid larger than 48 points per axis");
    require(w0.w.size() == n * n, "solve_pair_liouville_grid: field size does not match the grid");
    require(std::isfinite(z) && z >= 0.0, "solve_pair_liouville_grid: z must be nonnegative");
    if (z > 0.0) {
        require(nsteps >= 1, "solve_pair_liouville_grid: nsteps must be positive");
        check_transport_fits(w0, z, model.ktilde(), "solve_pair_liouville_grid");
    }

    const double L = g.length();
    const double dp = w0.dp();
    for (const auto& pr : probes) {
        require(pr.size() == 4, "solve_pair_liouville_grid: probes are (x1, p1, x2, p2)");
        require(std::abs(pr[0]) <= 0.5 * L && std::abs(pr[2]) <= 0.5 * L &&
                    pr[1] >= w0.pcoord(0) && pr[1] <= w0.pcoord(n - 1) &&
                    pr[3] >= w0.pcoord(0) && pr[3] <= w0.pcoord(n - 1),
                "solve_pair_liouville_grid: probe outside the phase-space box");
    }

    const std::size_t nn = n * n;
    std::vector<double> F(nn * nn);
    for (std::size_t x1 = 0; x1 < n; ++x1)
        for (std::size_t x2 = 0; x2 < n; ++x2)
            for (std::size_t p1 = 0; p1 < n; ++p1) {
                const double a = w0.w[x1 * n + p1];
                double* dst = F.data() + ((x1 * n + x2) * n + p1) * n;
                const double* src = w0.w.data() + x2 * n;
                for (std::size_t p2 = 0; p2 < n; ++p2) dst[p2] = a * src[p2];
            }

    if (z > 0.0) {
        const double ktilde = model.ktilde();
        const double h = z / static_cast<double>(nsteps);
        const double beta = ktilde * ktilde * h;
        const double ystep = p_mode_step(w0);
        const DiffusionTensor tensor(model.spectrum(), 0.5 * L * (1.0 + 1e-9) + g.dx);
        const double c0 = tensor.trace0();

        std::vector<double> ymode(n);
        for (std::size_t i = 0; i < n; ++i)
            ymode[i] = ystep * static_cast<double>(fft_signed_index(i, n));
        std::vector<double> dprof(2 * n - 1);
        for (long dd = -static_cast<long>(n - 1); dd <= static_cast<long>(n - 1); ++dd)
            dprof[static_cast<std::size_t>(dd + static_cast<long>(n) - 1)] =
                tensor.longitudinal(std::abs(min_image(static_cast<double>(dd) * g.dx, L)));

        // Momentum multipliers per step, the cross factor tabulated for every
        // site separation. Nyquist rows carry the sign-averaged factor
        // cosh, which keeps the field real.
        std::vector<double> even_tab(nn);
        for (std::size_t m1 = 0; m1 < n; ++m1)
            for (std::size_t m2 = 0; m2 < n; ++m2)
                even_tab[m1 * n + m2] = std::exp(
                    -0.5 * beta * c0 * (ymode[m1] * ymode[m1] + ymode[m2] * ymode[m2]));
        std::vector<double> cross_tab((2 * n - 1) * nn);
        for (std::size_t k = 0; k < 2 * n - 1; ++k)
            for (std::size_t m1 = 0; m1 < n; ++m1)
                for (std::size_t m2 = 0; m2 < n; ++m2) {
                    const double a = beta * dprof[k] * ymode[m1] * ymode[m2];
                    cross_tab[k * nn + m1 * n + m2] =
                        (m1 == n / 2 || m2 == n / 2) ? std::cosh(a) : std::exp(-a);
                }

        const std::vector<std::size_t> dims2{n, n};
        warm_plan(dims2, nn, -1);
        warm_plan(dims2, nn, 1);
        const double scale = 1.0 / static_cast<double>(nn);

        auto shear = [&](double tau) {
#pragma omp parallel if (parallel)
            {
                std::vector<cplx> plane(nn);
#pragma omp for schedule(static)
                for (std::size_t pp = 0; pp < nn; ++pp) {
                    const std::size_t p1 = pp / n;
                    const std::size_t p2 = pp % n;
                    const double d1 = tau * w0.pcoord(p1) / ktilde;
                    const double d2 = tau * w0.pcoord(p2) / ktilde;
                    for (std::size_t x1 = 0; x1 < n; ++x1)
                        for (std::size_t x2 = 0; x2 < n; ++x2)
                            plane[x1 * n + x2] =
                                cplx(F[((x1 * n + x2) * n + p1) * n + p2], 0.0);
                    fft::c2c(dims2, plane.data(), plane.data(), -1);
                    for (std::size_t k1 = 0; k1 < n; ++k1)
                        for (std::size_t k2 = 0; k2 < n; ++k2) {
                            cplx factor(scale, 0.0);
                            const double a1 = g.wavenumber(k1) * d1;
                            const double a2 = g.wavenumber(k2) * d2;
                            if (k1 == n / 2)
                                factor *= std::cos(a1);
                            else
                                factor *= cplx(std::cos(a1), -std::sin(a1));
                            if (k2 == n / 2)
                                factor *= std::cos(a2);
                            else
                                factor *= cplx(std::cos(a2), -std::sin(a2));
                            plane[k1 * n + k2] *= factor;
                        }
                    fft::c2c(dims2, plane.data(), plane.data(), 1);
                    for (std::size_t x1 = 0; x1 < n; ++x1)
                        for (std::size_t x2 = 0; x2 < n; ++x2)
                            F[((x1 * n + x2) * n + p1) * n + p2] = plane[x1 * n + x2].real();
                }
            }
        };
        auto diffuse = [&]() {
#pragma omp parallel if (parallel)
            {
                std::vector<cplx> block(nn);
#pragma omp for schedule(static)
                for (std::size_t xx = 0; xx < nn; ++xx) {
                    const long dd = static_cast<long>(xx / n) - static_cast<long>(xx % n);
                    const double* ct =
                        cross_tab.data() + static_cast<std::size_t>(dd + static_cast<long>(n) - 1) * nn;
                    double* blk = F.data() + xx * nn;
                    for (std::size_t i = 0; i < nn; ++i) block[i] = cplx(blk[i], 0.0);
                    fft::c2c(dims2, block.data(), block.data(), -1);
                    for (std::size_t i = 0; i < nn; ++i)
                        block[i] *= even_tab[i] * ct[i] * scale;
                    fft::c2c(dims2, block.data(), block.data(), 1);
                    for (std::size_t i = 0; i < nn; ++i) blk[i] = block[i].real();
                }
            }
        };

        shear(0.5 * h);
        for (std::size_t k = 0; k < nsteps; ++k) {
            diffuse();
            shear(k + 1 < nsteps ? h : 0.5 * h);
        }
    }

    auto interp4 = [&](double X1, double P1, double X2, double P2) {
        auto xcell = [&](double X, std::size_t& i0, std::size_t& i1, double& f) {
            const double t = X / g.dx + 0.5 * static_cast<double>(n);
            double tf = std::floor(t);
            f = t - tf;
            long i = static_cast<long>(tf) % static_cast<long>(n);
            if (i < 0) i += static_cast<long>(n);
            i0 = static_cast<std::size_t>(i);
            i1 = (i0 + 1) % n;
        };
        auto pcell = [&](double P, std::size_t& i0, std::size_t& i1, double& f) {
            double t = (P - w0.pcoord(0)) / dp;
            t = std::min(std::max(t, 0.0), static_cast<double>(n - 1));
            std::size_t i = static_cast<std::size_t>(t);
            i = std::min(i, n - 2);
            f = t - static_cast<double>(i);
            i0 = i;
            i1 = i + 1;
        };
        std::size_t xa0, xa1, xb0, xb1, pa0, pa1, pb0, pb1;
        double fxa, fxb, fpa, fpb;
        xcell(X1, xa0, xa1, fxa);
        xcell(X2, xb0, xb1, fxb);
        pcell(P1, pa0, pa1, fpa);
        pcell(P2, pb0, pb1, fpb);
        double v = 0.0;
        for (int c1 = 0; c1 < 2; ++c1)
            for (int c2 = 0; c2 < 2; ++c2)
                for (int c3 = 0; c3 < 2; ++c3)
                    for (int c4 = 0; c4 < 2; ++c4) {
                        const std::size_t ix1 = c1 ? xa1 : xa0;
                        const std::size_t ix2 = c2 ? xb1 : xb0;
                        const std::size_t ip1 = c3 ? pa1 : pa0;
                        const std::size_t ip2 = c4 ? pb1 : pb0;
                        const double wgt = (c1 ? fxa : 1.0 - fxa) * (c2 ? fxb : 1.0 - fxb) *
                                           (c3 ? fpa : 1.0 - fpa) * (c4 ? fpb : 1.0 - fpb);
                        v += wgt * F[((ix1 * n + ix2) * n + ip1) * n + ip2];
                    }
        return v;
    };

    MomentField mf;
    mf.order = 2;
    mf.dim = 1;
    mf.z = w0.z + z;
    mf.probes = probes;
    mf.values.resize(probes.size());
    mf.errors.assign(probes.size(), 0.0);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto& pr = probes[i];
        mf.values[i] =
            0.5 * (interp4(pr[0], pr[1], pr[2], pr[3]) + interp4(pr[2], pr[3], pr[0], pr[1]));
    }
    return mf;
}

MomentField solve_mean_inhomogeneous(const WignerDist& w0, const WhiteNoiseModel& model,
                                     double z, std::size_t nsteps, bool parallel) {
    const TransverseGrid& g = w0.grid;
    const int d = g.dim;
    require(model.spectrum().dim() == d,
            "solve_mean_inhomogeneous: spectrum dimension must match the field");
    require(w0.w.size() == w0.cells(),
            "solve_mean_inhomogeneous: field size does not match the grid");
    require(std::isfinite(z) && z >= 0.0, "solve_mean_inhomogeneous: z must be nonnegative");
    if (model.regime() == LimitRegime::WignerMoyal)
        check_gamma(w0, model, "solve_mean_inhomogeneous");
    if (z == 0.0) return wrap_grid(w0);
    require(nsteps >= 1, "solve_mean_inhomogeneous: nsteps must be positive");

    const double ktilde = model.ktilde();
    const double h = z / static_cast<double>(nsteps);
    const BackgroundModel& bg = model.background();
    const std::size_t n = g.n;
    const std::size_t points = g.points();
    const double dp = w0.dp();
    const double ystep = p_mode_step(w0);
    const auto dims = fft_dims(g);

    // Damping symbol on the p lattice, fixed across steps; the background only
    // rescales it through mu^2.
    std::vector<double> gsym(points);
    {
        std::size_t mi[kMaxDim];
        if (model.regime() == LimitRegime::WignerMoyal) {
            const double ymax =
                std::sqrt(static_cast<double>(d)) * kPi / dp * (1.0 + 1e-6);
            const EvenTable gt = wm_damping_table(model.spectrum(), model.gamma(), ymax);
            for (std::size_t m = 0; m < points; ++m) {
                g.unflatten(m, mi);
                double r2 = 0.0;
                for (int ax = 0; ax < d; ++ax) {
                    const double y = ystep * static_cast<double>(fft_signed_index(mi[ax], n));
                    r2 += y * y;
                }
                gsym[m] = gt.eval(std::sqrt(r2));
            }
        } else {
            const double c = transverse_moment2(model.spectrum()) / static_cast<double>(d);
            for (std::size_t m = 0; m < points; ++m) {
                g.unflatten(m, mi);
                double r2 = 0.0;
                for (int ax = 0; ax < d; ++ax) {
                    const double y = ystep * static_cast<double>(fft_signed_index(mi[ax], n));
                    r2 += y * y;
                }
                gsym[m] = 0.5 * c * r2;
            }
        }
    }

    const double kick_cap = dp * static_cast<double>(n) / 8.0;
    std::vector<double> kicks(points * static_cast<std::size_t>(d));
    std::vector<double> damp(points);

    WignerDist F = free_transport(w0, ktilde, 0.5 * h, parallel);
    warm_plan(dims, points, -1);
    warm_plan(dims, points, 1);
    for (std::size_t step = 0; step < nsteps; ++step) {
        const double zmid = w0.z + (static_cast<double>(step) + 0.5) * h;
        {
            std::size_t xi[kMaxDim];
            double xv[kMaxDim], grad[kMaxDim];
            for (std::size_t xflat = 0; xflat < points; ++xflat) {
                g.unflatten(xflat, xi);
                for (int ax = 0; ax < d; ++ax) xv[ax] = g.coord(xi[ax]);
                v0_gradient(bg, zmid, xv, d, grad);
                for (int ax = 0; ax < d; ++ax) {
                    const double dpv = -ktilde * grad[ax] * h;
                    require(std::abs(dpv) <= kick_cap,
                            "solve_mean_inhomogeneous: background kick exceeds an eighth of "
                            "the momentum box per step; increase nsteps");
                    kicks[xflat * static_cast<std::size_t>(d) + static_cast<std::size_t>(ax)] = dpv;
                }
                const double mu = bg.mu_at(zmid, xv);
                damp[xflat] = ktilde * ktilde * mu * mu * h;
            }
        }
#pragma omp parallel if (parallel)
        {
            std::vector<cplx> row(points);
            std::size_t mi[kMaxDim];
#pragma omp for schedule(static)
            for (std::size_t xflat = 0; xflat < points; ++xflat) {
                const double* kick = kicks.data() + xflat * static_cast<std::size_t>(d);
                const double a = damp[xflat];
                double* vals = F.w.data() + xflat * points;
                for (std::size_t i = 0; i < points; ++i) row[i] = cplx(vals[i], 0.0);
                fft::c2c(dims, row.data(), row.data(), -1);
                for (std::size_t m = 0; m < points; ++m) {
                    g.unflatten(m, mi);
                    cplx factor(std::exp(-a * gsym[m]) / static_cast<double>(points), 0.0);
                    for (int ax = 0; ax < d; ++ax) {
                        const double y =
                            ystep * static_cast<double>(fft_signed_index(mi[ax], n));
                        const double arg = y * kick[ax];
                        if (mi[ax] == n / 2)
                            factor *= std::cos(arg);
                        else
                            factor *= cplx(std::cos(arg), -std::sin(arg));
                    }
                    row[m] *= factor;
                }
                fft::c2c(dims, row.data(), row.data(), 1);
                for (std::size_t i = 0; i < points; ++i) vals[i] = row[i].real();
            }
        }
        F = free_transport(F, ktilde, step + 1 < nsteps ? h : 0.5 * h, parallel);
    }
    F.z = w0.z + z;
    return wrap_grid(std::move(F));
}

}  // namespace turbwig
