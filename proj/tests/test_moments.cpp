#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "turbwig/background.hpp"
#include "turbwig/fft.hpp"
#include "turbwig/moments.hpp"
#include "turbwig/quad.hpp"
#include "turbwig/rays.hpp"
#include "turbwig/spectra.hpp"
#include "turbwig/wigner.hpp"

using namespace turbwig;

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
const double kInf = std::numeric_limits<double>::infinity();

template <class Ex>
bool throws_mentioning(const std::function<void()>& fn, const std::string& what) {
    try {
        fn();
    } catch (const Ex& e) {
        return std::string(e.what()).find(what) != std::string::npos;
    } catch (...) {
        return false;
    }
    return false;
}

// Closed transverse density 2*pi*Phi(0,q) of the one-dimensional VonKarman
// form, kept separate from the library's evaluator.
struct VkEff1D {
    double hurst, eta, rho, amp;
    double operator()(double q) const {
        double v = 2.0 * amp * hurst * std::pow(eta, 2.0 * hurst) *
                   std::pow(eta * eta + q * q, -hurst - 1.0);
        if (std::isfinite(rho)) {
            const double r = 1.0 + q * q / (rho * rho);
            v /= r * r;
        }
        return v;
    }
};

// (1/gamma^2) \int_R phieff(q) (1 - cos(gamma u q)) dq by direct quadrature.
template <class F>
double brute_damping(const F& phieff, double gamma, double u, double qmax) {
    if (u == 0.0) return 0.0;
    const double w = gamma * u;
    auto f = [&](double q) { return phieff(q) * (1.0 - std::cos(w * q)); };
    const auto pts = quad::split_points(0.0, qmax, kPi / std::max(w, 0.3));
    return 2.0 * quad::integrate_segments(f, pts, 1e-14, 1e-11).value / (gamma * gamma);
}

template <class F>
double brute_moment2(const F& phieff, double qmax) {
    auto f = [&](double q) { return phieff(q) * q * q; };
    return 2.0 * quad::integrate(f, 0.0, qmax, 1e-14, 1e-11).value;
}

WignerDist sample_dist(const TransverseGrid& g, double gamma,
                       const std::function<double(const double*, const double*)>& fn) {
    WignerDist W;
    W.grid = g;
    W.gamma = gamma;
    const std::size_t points = g.points();
    W.w.resize(points * points);
    std::size_t xi[3], pj[3];
    double xv[3], pv[3];
    for (std::size_t xf = 0; xf < points; ++xf) {
        g.unflatten(xf, xi);
        for (int ax = 0; ax < g.dim; ++ax) xv[ax] = g.coord(xi[ax]);
        for (std::size_t pf = 0; pf < points; ++pf) {
            g.unflatten(pf, pj);
            for (int ax = 0; ax < g.dim; ++ax) pv[ax] = W.pcoord(pj[ax]);
            W.w[xf * points + pf] = fn(xv, pv);
        }
    }
    return W;
}

struct GridMoments {
    double mass, mx, mp, vxx, vpp, vxp;
};

GridMoments grid_moments(const WignerDist& W) {
    const TransverseGrid& g = W.grid;
    double m = 0.0, sx = 0.0, sp = 0.0, sxx = 0.0, spp = 0.0, sxp = 0.0;
    for (std::size_t i = 0; i < g.n; ++i)
        for (std::size_t j = 0; j < g.n; ++j) {
            const double w = W.w[i * g.n + j];
            const double x = g.coord(i);
            const double p = W.pcoord(j);
            m += w;
            sx += w * x;
            sp += w * p;
            sxx += w * x * x;
            spp += w * p * p;
            sxp += w * x * p;
        }
    GridMoments r;
    r.mass = m * W.cell();
    r.mx = sx / m;
    r.mp = sp / m;
    r.vxx = sxx / m - r.mx * r.mx;
    r.vpp = spp / m - r.mp * r.mp;
    r.vxp = sxp / m - r.mx * r.mp;
    return r;
}

double l2_diff(const std::vector<double>& a, const std::vector<double>& b, double cell) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s * cell);
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Uniform table with cubic reads, clamped at the ends.
struct DenseTable {
    double umax = 1.0;
    std::vector<double> f;
    double operator()(double u) const {
        u = std::abs(u);
        const double t =
            std::min(u / umax, 1.0) * static_cast<double>(f.size() - 1);
        long i = static_cast<long>(std::floor(t));
        i = std::max(0L, std::min(i, static_cast<long>(f.size()) - 2));
        const double s = t - static_cast<double>(i);
        auto at = [&](long k) {
            k = std::max(0L, std::min(k, static_cast<long>(f.size()) - 1));
            return f[static_cast<std::size_t>(k)];
        };
        const double f0 = at(i - 1), f1 = at(i), f2 = at(i + 1), f3 = at(i + 2);
        const double a0 = -0.5 * f0 + 1.5 * f1 - 1.5 * f2 + 0.5 * f3;
        const double a1 = f0 - 2.5 * f1 + 2.0 * f2 - 0.5 * f3;
        const double a2 = 0.5 * (f2 - f0);
        return ((a0 * s + a1) * s + a2) * s + f1;
    }
};

using cvec = std::vector<std::complex<double>>;

cvec dft1(const cvec& a, int sign) {
    const std::size_t n = a.size();
    cvec out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> s(0.0, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const double ph = sign * 2.0 * kPi * static_cast<double>(j * k) /
                              static_cast<double>(n);
            s += a[j] * std::complex<double>(std::cos(ph), std::sin(ph));
        }
        out[k] = s;
    }
    return out;
}

long signed_bin(std::size_t i, std::size_t n) {
    return i < n / 2 ? static_cast<long>(i) : static_cast<long>(i) - static_cast<long>(n);
}

}  // namespace

TEST_CASE("damping table matches direct quadrature for a cutoff spectrum") {
    const auto m = SpectrumModel::von_karman(1, 0.3, 0.7, 6.0, 0.8);
    const VkEff1D eff{0.3, 0.7, 6.0, 0.8};
    const double probe = eff(1.37);
    CHECK(std::abs(probe - 2.0 * kPi * m.eval_radial(1.37)) <= 1e-12 * probe);

    const double gamma = 0.5;
    const EvenTable gt = wm_damping_table(m, gamma, 10.0);
    CHECK(gt.eval(0.0) == 0.0);
    for (double u : {0.3, 1.7, 4.2, 8.9}) {
        const double ref = brute_damping(eff, gamma, u, 200.0);
        CHECK(std::abs(gt.eval(u) - ref) <= 1e-7 * ref);
    }
    CHECK(gt.eval(2.0) < gt.eval(9.5));
}

TEST_CASE("power-law damping follows the fractional closed form") {
    const double H = 0.25, A = 0.9, gamma = 0.7;
    const auto m = SpectrumModel::power_law_bounded(1, H, 0.0, kInf, A);
    const EvenTable gt = wm_damping_table(m, gamma, 6.0);
    const double J = kPi / (2.0 * std::cos(kPi * H) * std::tgamma(2.0 * H + 2.0));
    for (double u : {0.4, 1.3, 2.9, 5.5}) {
        const double ref =
            4.0 * kPi * A * J * std::pow(gamma * u, 2.0 * H + 1.0) / (gamma * gamma);
        CHECK(std::abs(gt.eval(u) - ref) <= 2e-6 * ref);
    }
}

TEST_CASE("momentum diffusion conserves mass and dissipates") {
    const auto m = SpectrumModel::von_karman(1, 0.3, 0.6, 7.0, 0.5);
    const TransverseGrid g{1, 32, 10.0 / 32.0};
    const WignerDist theta = sample_dist(g, 1.0, [](const double* x, const double* p) {
        return std::exp(-0.5 * x[0] * x[0] - 0.5 * p[0] * p[0] / 0.64);
    });

    const WhiteNoiseModel wm(LimitRegime::WignerMoyal, m, 1.0, 1.0);
    const WhiteNoiseModel li(LimitRegime::Liouville, m, 1.0);
    for (const WignerDist& q :
         {apply_Q0_wm(theta, wm), apply_Q0_liouville(theta, li)}) {
        double tot = 0.0, inner = 0.0, ref = 0.0;
        for (std::size_t i = 0; i < q.w.size(); ++i) {
            tot += q.w[i];
            inner += theta.w[i] * q.w[i];
            ref += std::abs(theta.w[i]);
        }
        CHECK(std::abs(tot) <= 1e-12 * ref);
        CHECK(inner < 0.0);
        CHECK(q.imag_residual <= 1e-12);
    }
}

TEST_CASE("momentum diffusion generators approach each other as gamma shrinks") {
    // The kinetic symbol grows without bound in y while the finite-gamma one
    // saturates, so any leakage from a truncated momentum profile swamps the
    // quadratic gap at the far y nodes.  A raised-cosine-squared profile is a
    // lattice harmonic: its y content sits exactly on {0, +-1, +-2} steps, and
    // halving gamma with twice the nodes at half the spacing keeps that step
    // fixed, leaving only the genuine small-y comparison.
    const auto m = SpectrumModel::von_karman(1, 1.0 / 3.0, 0.5, 2.0, 0.7);
    const double L = 6.4;
    auto err_at = [&](double gamma, std::size_t n) {
        const TransverseGrid g{1, n, L / static_cast<double>(n)};
        const double pmax = 0.5 * static_cast<double>(n) * kPi * gamma / L;
        auto field = [L, pmax](const double* x, const double* p) {
            const double c = 0.5 * (1.0 + std::cos(kPi * p[0] / pmax));
            return std::exp(-0.5 * x[0] * x[0] / 0.64) * c * c *
                   (1.0 + 0.3 * std::cos(2.0 * kPi * x[0] / L));
        };
        const WignerDist theta = sample_dist(g, gamma, field);
        const WhiteNoiseModel wm(LimitRegime::WignerMoyal, m, 1.0, gamma);
        const WhiteNoiseModel li(LimitRegime::Liouville, m, 1.0);
        const WignerDist a = apply_Q0_wm(theta, wm);
        const WignerDist b = apply_Q0_liouville(theta, li);
        return l2_diff(a.w, b.w, theta.cell());
    };
    const double e1 = err_at(0.08, 128);
    const double e2 = err_at(0.04, 256);
    CHECK(e1 / e2 > 2.8);
    CHECK(e1 / e2 < 5.2);
}

TEST_CASE("coincident-point coupling contracts to the generator, kinetic branch") {
    const auto m = SpectrumModel::von_karman(1, 0.3, 0.6, 7.0, 0.5);
    const TransverseGrid g{1, 32, 10.0 / 32.0};
    const WignerDist theta = sample_dist(g, 1.0, [](const double* x, const double* p) {
        return std::exp(-0.5 * x[0] * x[0] - 0.5 * p[0] * p[0] / 0.64);
    });
    const WhiteNoiseModel li(LimitRegime::Liouville, m, 1.0);
    const WignerDist q = apply_Q0_liouville(theta, li);

    std::vector<std::pair<std::size_t, std::size_t>> nodes(theta.cells());
    for (std::size_t v = 0; v < nodes.size(); ++v) nodes[v] = {v, v};
    const std::vector<double> cr = apply_Q_cross(theta, theta, li, nodes);

    double lhs = 0.0, rhs = 0.0;
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        lhs += theta.w[v] * q.w[v];
        rhs -= cr[v];
    }
    lhs *= theta.cell();
    rhs *= theta.cell();
    CHECK(std::abs(lhs - rhs) <= 1e-6 * std::abs(lhs));
}

TEST_CASE("coincident-point coupling contracts to the generator, finite gamma") {
    const auto m = SpectrumModel::von_karman(1, 0.3, 0.6, 7.0, 0.5);
    const TransverseGrid g{1, 32, 10.0 / 32.0};
    const WignerDist theta = sample_dist(g, 1.0, [](const double* x, const double* p) {
        return std::exp(-0.5 * x[0] * x[0] - 0.5 * p[0] * p[0] / 1.21);
    });
    const WhiteNoiseModel wm(LimitRegime::WignerMoyal, m, 1.0, 1.0);
    const WignerDist q = apply_Q0_wm(theta, wm);

    std::vector<std::pair<std::size_t, std::size_t>> nodes(theta.cells());
    for (std::size_t v = 0; v < nodes.size(); ++v) nodes[v] = {v, v};
    const std::vector<double> cr = apply_Q_cross(theta, theta, wm, nodes);

    double lhs = 0.0, rhs = 0.0;
    for (std::size_t v = 0; v < nodes.size(); ++v) {
        lhs += theta.w[v] * q.w[v];
        rhs -= cr[v];
    }
    // The coupling side reads shifted rows through cubic interpolation, which
    // is the dominant error here.
    CHECK(std::abs(lhs - rhs) <= 1.5e-2 * std::abs(lhs));
}

TEST_CASE("two-point coupling approaches the kinetic kernel as gamma shrinks") {
    const auto m = SpectrumModel::von_karman(1, 1.0 / 3.0, 0.5, 2.0, 0.7);
    const double L = 12.8;
    auto field = [L](const double* x, const double* p) {
        return std::exp(-0.5 * x[0] * x[0] / 1.44 - 0.5 * p[0] * p[0] / 1.21) *
               (1.0 + 0.25 * std::cos(2.0 * kPi * x[0] / L));
    };
    const std::size_t base_nodes[8][4] = {
        {120, 150, 160, 140}, {130, 160, 150, 130}, {140, 135, 148, 155},
        {150, 145, 138, 150}, {160, 130, 128, 160}, {144, 144, 144, 144},
        {124, 156, 168, 148}, {156, 124, 116, 164}};
    auto err_at = [&](double gamma, std::size_t n, std::size_t stretch) {
        const TransverseGrid g{1, n, L / static_cast<double>(n)};
        const WignerDist theta = sample_dist(g, gamma, field);
        const WhiteNoiseModel wm(LimitRegime::WignerMoyal, m, 1.0, gamma);
        const WhiteNoiseModel li(LimitRegime::Liouville, m, 1.0);
        std::vector<std::pair<std::size_t, std::size_t>> nodes;
        for (const auto& b : base_nodes)
            nodes.push_back({(b[0] * stretch) * n + b[1] * stretch,
                             (b[2] * stretch) * n + b[3] * stretch});
        const std::vector<double> a = apply_Q_cross(theta, theta, wm, nodes);
        const std::vector<double> b = apply_Q_cross(theta, theta, li, nodes);
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s / static_cast<double>(nodes.size()));
    };
    const double e1 = err_at(0.15, 288, 1);
    const double e2 = err_at(0.075, 576, 2);
    CHECK(e1 / e2 > 2.5);
    CHECK(e1 / e2 < 6.0);
}

TEST_CASE("transported mean matches a direct spectral oracle") {
    const std::size_t n = 16;
    const double L = 4.0, gamma = 0.6, ktilde = 1.3, z = 0.6;
    const TransverseGrid g{1, n, L / static_cast<double>(n)};
    const auto m = SpectrumModel::von_karman(1, 0.4, 0.7, 6.0, 0.5);
    const VkEff1D eff{0.4, 0.7, 6.0, 0.5};
    const WignerDist W0 = sample_dist(g, gamma, [L](const double* x, const double* p) {
        return std::exp(-0.5 * x[0] * x[0] / 0.49) *
               (1.0 + 0.4 * std::cos(2.0 * kPi * x[0] / L)) *
               std::exp(-0.5 * (p[0] - 0.3) * (p[0] - 0.3) / 0.36);
    });
    const WhiteNoiseModel model(LimitRegime::WignerMoyal, m, ktilde, gamma);
    const MomentField mf = solve_mean_wm(W0, model, z);
    REQUIRE(mf.grid.has_value());
    CHECK(mf.values.empty());
    CHECK(mf.z == doctest::Approx(z).epsilon(1e-12));

    const double dp = W0.dp();
    const double dx = g.dx;
    DenseTable gor;
    gor.umax = (kPi / dp + z * kPi / (dx * ktilde)) * 1.02;
    gor.f.resize(801);
    for (std::size_t i = 0; i < gor.f.size(); ++i) {
        const double u = gor.umax * static_cast<double>(i) /
                         static_cast<double>(gor.f.size() - 1);
        gor.f[i] = brute_damping(eff, gamma, u, 200.0);
    }

    // Stream for time z, then damp every joint mode along its own ray.
    std::vector<cvec> rows(n, cvec(n));
    for (std::size_t j = 0; j < n; ++j) {
        cvec col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = W0.w[i * n + j];
        cvec hat = dft1(col, -1);
        const double shift = z * W0.pcoord(j) / ktilde;
        for (std::size_t k = 0; k < n; ++k) {
            const double xi = 2.0 * kPi * static_cast<double>(signed_bin(k, n)) / L;
            if (k == n / 2)
                hat[k] *= std::cos(xi * shift);
            else
                hat[k] *= std::complex<double>(std::cos(xi * shift), -std::sin(xi * shift));
        }
        cvec back = dft1(hat, 1);
        for (std::size_t i = 0; i < n; ++i) rows[i][j] = back[i] / static_cast<double>(n);
    }
    std::vector<cvec> modes(n, cvec(n));
    {
        std::vector<cvec> xhat(n, cvec(n));
        for (std::size_t j = 0; j < n; ++j) {
            cvec col(n);
            for (std::size_t i = 0; i < n; ++i) col[i] = rows[i][j];
            cvec hat = dft1(col, -1);
            for (std::size_t k = 0; k < n; ++k) xhat[k][j] = hat[k];
        }
        for (std::size_t k = 0; k < n; ++k) modes[k] = dft1(xhat[k], -1);
    }
    const double ystep = 2.0 * kPi / (static_cast<double>(n) * dp);
    auto line = [&](double xi, double y) {
        const std::size_t panels = 512;
        const double h = z / static_cast<double>(panels);
        double s = gor(y) + gor(y + z * xi / ktilde);
        for (std::size_t i = 1; i < panels; ++i)
            s += ((i & 1) ? 4.0 : 2.0) * gor(y + h * static_cast<double>(i) * xi / ktilde);
        return s * h / 3.0;
    };
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t mi = 0; mi < n; ++mi) {
            const double xi = 2.0 * kPi * static_cast<double>(signed_bin(k, n)) / L;
            const double y = ystep * static_cast<double>(signed_bin(mi, n));
            double lam = 0.0;
            const bool nk = k == n / 2, nm = mi == n / 2;
            for (int sk = 0; sk < (nk ? 2 : 1); ++sk)
                for (int sm = 0; sm < (nm ? 2 : 1); ++sm)
                    lam += std::exp(-ktilde * ktilde *
                                    line(sk ? -xi : xi, sm ? -y : y));
            modes[k][mi] *= lam / static_cast<double>((nk ? 2 : 1) * (nm ? 2 : 1));
        }
    std::vector<double> oracle(n * n);
    {
        std::vector<cvec> xhat(n, cvec(n));
        for (std::size_t k = 0; k < n; ++k) {
            cvec back = dft1(modes[k], 1);
            for (std::size_t j = 0; j < n; ++j) xhat[k][j] = back[j];
        }
        for (std::size_t j = 0; j < n; ++j) {
            cvec col(n);
            for (std::size_t k = 0; k < n; ++k) col[k] = xhat[k][j];
            cvec back = dft1(col, 1);
            for (std::size_t i = 0; i < n; ++i)
                oracle[i * n + j] = back[i].real() / static_cast<double>(n * n);
        }
    }
    const double scale = max_abs(oracle);
    for (std::size_t i = 0; i < oracle.size(); ++i)
        CHECK(std::abs(mf.grid->w[i] - oracle[i]) <= 1e-6 * scale);
}

TEST_CASE("uniform fields decay mode by mode and keep their mass") {
    const std::size_t n = 64;
    const double L = 8.0, gamma = 0.25, ktilde = 1.0, z = 0.8;
    const TransverseGrid g{1, n, L / static_cast<double>(n)};
    const auto m = SpectrumModel::von_karman(1, 0.45, 0.8, 9.0, 0.6);
    const VkEff1D eff{0.45, 0.8, 9.0, 0.6};
    const WignerDist W0 = sample_dist(g, gamma, [](const double*, const double* p) {
        return std::exp(-0.5 * p[0] * p[0] / 0.36);
    });
    const WhiteNoiseModel model(LimitRegime::WignerMoyal, m, ktilde, gamma);
    const MomentField mf = solve_mean_wm(W0, model, z);
    REQUIRE(mf.grid.has_value());
    const std::vector<double>& res = mf.grid->w;

    double mass0 = 0.0, mass1 = 0.0;
    for (std::size_t i = 0; i < res.size(); ++i) {
        mass0 += W0.w[i];
        mass1 += res[i];
    }
    CHECK(std::abs(mass1 - mass0) <= 1e-12 * mass0);
    for (std::size_t j = 0; j < n; ++j)
        CHECK(std::abs(res[17 * n + j] - res[j]) <= 1e-13);

    cvec col(n);
    for (std::size_t j = 0; j < n; ++j) col[j] = W0.w[j];
    cvec hat = dft1(col, -1);
    const double ystep = 2.0 * kPi / (static_cast<double>(n) * W0.dp());
    for (std::size_t mi = 0; mi < n; ++mi) {
        const double y = ystep * static_cast<double>(signed_bin(mi, n));
        hat[mi] *= std::exp(-ktilde * ktilde * z * brute_damping(eff, gamma, y, 250.0));
    }
    cvec back = dft1(hat, 1);
    const double scale = max_abs(W0.w);
    for (std::size_t j = 0; j < n; ++j)
        CHECK(std::abs(res[j] - back[j].real() / static_cast<double>(n)) <= 1e-8 * scale);
}

TEST_CASE("kinetic mean follows the free spreading laws") {
    const std::size_t n = 40;
    const double L = 12.0, gamma = 1.0, ktilde = 1.1, z = 1.2;
    const TransverseGrid g{1, n, L / static_cast<double>(n)};
    const auto m = SpectrumModel::von_karman(1, 0.35, 0.8, 5.0, 0.03);
    const VkEff1D eff{0.35, 0.8, 5.0, 0.03};
    const double c = brute_moment2(eff, 800.0);
    const WignerDist W0 = sample_dist(g, gamma, [](const double* x, const double* p) {
        return std::exp(-0.5 * x[0] * x[0] / 0.36 - 0.5 * p[0] * p[0] / 0.25);
    });
    const WhiteNoiseModel model(LimitRegime::Liouville, m, ktilde);
    const MomentField mf = solve_mean_liouville(W0, model, z);
    REQUIRE(mf.grid.has_value());

    const GridMoments a = grid_moments(W0);
    const GridMoments b = grid_moments(*mf.grid);
    CHECK(std::abs(b.mass - a.mass) <= 1e-12 * a.mass);
    CHECK(std::abs(b.mx) <= 1e-10);
    CHECK(std::abs(b.mp) <= 1e-10);
    const double vpp = a.vpp + ktilde * ktilde * c * z;
    const double vxp = a.vxp + a.vpp * z / ktilde + ktilde * c * z * z / 2.0;
    const double vxx = a.vxx + 2.0 * a.vxp * z / ktilde +
                       a.vpp * z * z / (ktilde * ktilde) + c * z * z * z / 3.0;
    CHECK(std::abs(b.vpp - vpp) <= 1e-7 * vpp);
    CHECK(std::abs(b.vxp - vxp) <= 1e-6 * vxp);
    CHECK(std::abs(b.vxx - vxx) <= 1e-6 * vxx);
}

TEST_CASE("operator splitting converges to the closed transported mean") {
    const auto m1 = SpectrumModel::von_karman(1, 0.35, 0.8, 5.0, 0.03);
    const TransverseGrid g1{1, 40, 12.0 / 40.0};
    const WignerDist wl = sample_dist(g1, 1.0, [](const double* x, const double* p) {
        return std::exp(-0.5 * x[0] * x[0] / 0.36 - 0.5 * p[0] * p[0] / 0.25);
    });
    const WhiteNoiseModel li(LimitRegime::Liouville, m1, 1.1);
    const MomentField base_l = solve_mean_liouville(wl, li, 1.2);
    const double e32l = l2_diff(solve_mean_inhomogeneous(wl, li, 1.2, 32).grid->w,
                                base_l.grid->w, wl.cell());
    const double e64l = l2_diff(solve_mean_inhomogeneous(wl, li, 1.2, 64).grid->w,
                                base_l.grid->w, wl.cell());
    CHECK(e64l <= 0.02 * l2_diff(base_l.grid->w, std::vector<double>(wl.w.size(), 0.0),
                                 wl.cell()));
    CHECK(e32l / e64l > 2.7);
    CHECK(e32l / e64l < 5.3);

    const auto m2 = SpectrumModel::von_karman(1, 0.4, 0.7, 6.0, 0.5);
    const TransverseGrid g2{1, 32, 0.25};
    const WignerDist ww = sample_dist(g2, 0.6, [](const double* x, const double* p) {
        return std::exp(-0.5 * x[0] * x[0] / 0.49 - 0.5 * (p[0] - 0.3) * (p[0] - 0.3) / 0.36);
    });
    const WhiteNoiseModel wm(LimitRegime::WignerMoyal, m2, 1.3, 0.6);
    // The split limit damps with the lattice samples of the kernel while the
    // closed solver integrates it along off-lattice rays, so the order check
    // runs against a fine-step reference and the closed form gets a looser
    // consistency bound.
    const MomentField base_w = solve_mean_wm(ww, wm, 0.6);
    const MomentField ref_w = solve_mean_inhomogeneous(ww, wm, 0.6, 512);
    const double norm_w = l2_diff(base_w.grid->w,
                                  std::vector<double>(ww.w.size(), 0.0), ww.cell());
    CHECK(l2_diff(ref_w.grid->w, base_w.grid->w, ww.cell()) <= 2e-2 * norm_w);
    const double e32w = l2_diff(solve_mean_inhomogeneous(ww, wm, 0.6, 32).grid->w,
                                ref_w.grid->w, ww.cell());
    const double e64w = l2_diff(solve_mean_inhomogeneous(ww, wm, 0.6, 64).grid->w,
                                ref_w.grid->w, ww.cell());
    CHECK(e32w / e64w > 2.7);
    CHECK(e32w / e64w < 5.3);
}

TEST_CASE("a quadratic channel steers the centroid along the classical path") {
    const std::size_t n = 64;
    const double L = 10.0, ktilde = 1.2, kappa = 0.7, z = 2.0;
    const TransverseGrid g{1, n, L / static_cast<double>(n)};
    const auto m = SpectrumModel::von_karman(1, 0.45, 0.8, 6.0, 0.2);
    BackgroundModel bg;
    bg.mu = [](double, const double*) { return 0.0; };
    bg.mu_bound = 0.0;
    bg.v0 = [kappa](double, const double* x) { return 0.5 * kappa * x[0] * x[0]; };
    bg.v0_bound = 0.5 * kappa * 25.0;
    const WhiteNoiseModel model(LimitRegime::Liouville, m, ktilde, 0.0, bg);
    const WignerDist W0 = sample_dist(g, 1.0, [](const double* x, const double* p) {
        return std::exp(-0.5 * (x[0] - 0.8) * (x[0] - 0.8) / 0.25 -
                        0.5 * (p[0] - 0.4) * (p[0] - 0.4) / 0.4225);
    });
    const GridMoments a = grid_moments(W0);
    const MomentField mf = solve_mean_inhomogeneous(W0, model, z, 1024);
    const GridMoments b = grid_moments(*mf.grid);

    const double om = std::sqrt(kappa);
    const double mx = a.mx * std::cos(om * z) + a.mp / (ktilde * om) * std::sin(om * z);
    const double mp = -a.mx * ktilde * om * std::sin(om * z) + a.mp * std::cos(om * z);
    CHECK(std::abs(b.mx - mx) <= 3e-6);
    CHECK(std::abs(b.mp - mp) <= 3e-6);
    CHECK(std::abs(b.mass - a.mass) <= 1e-11 * a.mass);
}

TEST_CASE("position-dependent coupling matches stochastic rays") {
    const std::size_t n = 64;
    const double L = 14.0, ktilde = 1.0, z = 1.0;
    const TransverseGrid g{1, n, L / static_cast<double>(n)};
    const auto m = SpectrumModel::von_karman(1, 0.4, 0.9, 6.0, 0.4);
    BackgroundModel bg;
    bg.mu = [](double, const double* x) { return 0.65 + 0.35 * std::tanh(x[0] / 0.8); };
    bg.mu_bound = 1.0;
    const WhiteNoiseModel model(LimitRegime::Liouville, m, ktilde, 0.0, bg);
    const WignerDist W0 = sample_dist(g, 1.0, [](const double* x, const double* p) {
        return std::exp(-0.5 * (x[0] + 1.0) * (x[0] + 1.0) - 0.5 * p[0] * p[0] / 0.25);
    });
    const MomentField mf = solve_mean_inhomogeneous(W0, model, z, 64);
    const GridMoments gm = grid_moments(*mf.grid);

    const std::size_t M = 20000;
    RayEnsemble e = sample_gaussian_rays(1, 1, M, {-1.0}, 1.0, {0.0}, 0.5, 4242);
    const DiffusionTensor tensor(m, 20.0);
    e = trace_rays_sde(std::move(e), tensor, bg, ktilde, z, 1.0 / 64.0, 4242);
    double mp = 0.0;
    for (std::size_t t = 0; t < M; ++t) mp += e.weight[t] * e.p_at(t, 0, 0);
    double vpp = 0.0, m4 = 0.0;
    for (std::size_t t = 0; t < M; ++t) {
        const double d = e.p_at(t, 0, 0) - mp;
        vpp += e.weight[t] * d * d;
        m4 += e.weight[t] * d * d * d * d;
    }
    const double se = std::sqrt((m4 - vpp * vpp) / static_cast<double>(M));
    CHECK(std::abs(gm.vpp - vpp) <= 3.5 * se);
    CHECK(std::abs(gm.mp - mp) <= 3.5 * std::sqrt(vpp / static_cast<double>(M)));
}

TEST_CASE("pair transport: margins, mass, and sampled tuples agree") {
    const std::size_t n = 24;
    const double L = 7.5, ktilde = 1.0, z = 0.7;
    const TransverseGrid g{1, n, L / static_cast<double>(n)};
    const auto m = SpectrumModel::von_karman(1, 0.35, 0.8, 5.0, 0.35);
    const WignerDist W0 = sample_dist(g, 1.0, [](const double* x, const double* p) {
        return std::exp(-0.5 * x[0] * x[0] / 0.64 - 0.5 * p[0] * p[0] / 0.49);
    });
    const WhiteNoiseModel model(LimitRegime::Liouville, m, ktilde);
    const double dp = W0.dp();

    std::vector<std::vector<double>> lattice;
    lattice.reserve(n * n * n * n);
    for (std::size_t x1 = 0; x1 < n; ++x1)
        for (std::size_t p1 = 0; p1 < n; ++p1)
            for (std::size_t x2 = 0; x2 < n; ++x2)
                for (std::size_t p2 = 0; p2 < n; ++p2)
                    lattice.push_back({g.coord(x1), W0.pcoord(p1), g.coord(x2),
                                       W0.pcoord(p2)});
    const MomentField pair = solve_pair_liouville_grid(W0, model, z, 64, lattice);
    REQUIRE(pair.values.size() == lattice.size());
    CHECK(pair.errors[0] == 0.0);

    const MomentField one = solve_mean_liouville(W0, model, z);
    const double cell = W0.cell();
    double mass0 = 0.0;
    for (double w : W0.w) mass0 += w;
    mass0 *= cell;

    // Integrating out member two leaves the single-particle law times the
    // mass of member two.
    double pmass = 0.0;
    std::vector<double> marg(n * n, 0.0);
    for (std::size_t x1 = 0; x1 < n; ++x1)
        for (std::size_t p1 = 0; p1 < n; ++p1) {
            double s = 0.0;
            const std::size_t base = (x1 * n + p1) * n * n;
            for (std::size_t r = 0; r < n * n; ++r) s += pair.values[base + r];
            marg[x1 * n + p1] = s * cell / mass0;
            pmass += s;
        }
    pmass *= cell * cell;
    CHECK(std::abs(pmass - mass0 * mass0) <= 1e-10 * mass0 * mass0);

    // Against the single-particle splitting at the same step count the match
    // is exact; the closed solver then bounds the splitting error itself.
    const MomentField split1 = solve_mean_inhomogeneous(W0, model, z, 64);
    const double scale1 = max_abs(one.grid->w);
    double worst_exact = 0.0, worst_closed = 0.0;
    for (std::size_t i = 0; i < marg.size(); ++i) {
        worst_exact = std::max(worst_exact, std::abs(marg[i] - split1.grid->w[i]));
        worst_closed = std::max(worst_closed, std::abs(marg[i] - one.grid->w[i]));
    }
    CHECK(worst_exact <= 1e-10 * scale1);
    CHECK(worst_closed <= 3e-2 * scale1);

    // The same pair law sampled as stochastic tuples, compared under one
    // smoothing kernel on both sides.
    const double bwx = 0.45, bwp = 0.55;
    const std::vector<std::vector<double>> probes = {
        {0.0, 0.0, 0.0, 0.0},    {0.5, 0.3, -0.4, 0.2},  {-0.8, 0.5, 0.8, -0.5},
        {1.2, -0.4, 0.3, 0.6},   {-0.3, -0.7, -1.1, 0.4}, {0.9, 0.8, 1.0, -0.2},
        {-1.4, 0.1, 0.6, 0.9},   {0.2, -1.1, -0.7, -0.6}, {1.5, 0.5, -1.2, -0.3},
        {-0.6, 1.2, 0.4, -1.0},  {0.7, 0.0, 0.7, 0.0},    {-1.0, -0.9, 1.3, 0.7}};
    const MomentField mc = solve_npoint_liouville({W0}, model, 2, z, z / 64.0, probes,
                                                  20000, bwx, bwp, 991);
    REQUIRE(mc.values.size() == probes.size());

    const double nx = 1.0 / (std::sqrt(2.0 * kPi) * bwx);
    const double np = 1.0 / (std::sqrt(2.0 * kPi) * bwp);
    double tmax = 0.0;
    std::vector<double> truth(probes.size());
    for (std::size_t q = 0; q < probes.size(); ++q) {
        std::vector<double> kx1(n), kp1(n), kx2(n), kp2(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double X = g.coord(i);
            const double P = W0.pcoord(i);
            auto kg = [](double d, double bw, double nrm) {
                return nrm * std::exp(-0.5 * d * d / (bw * bw));
            };
            kx1[i] = kg(probes[q][0] - X, bwx, nx) * g.dx;
            kp1[i] = kg(probes[q][1] - P, bwp, np) * dp;
            kx2[i] = kg(probes[q][2] - X, bwx, nx) * g.dx;
            kp2[i] = kg(probes[q][3] - P, bwp, np) * dp;
        }
        double s = 0.0;
        std::size_t idx = 0;
        for (std::size_t x1 = 0; x1 < n; ++x1)
            for (std::size_t p1 = 0; p1 < n; ++p1) {
                const double w1 = kx1[x1] * kp1[p1];
                for (std::size_t x2 = 0; x2 < n; ++x2) {
                    const double w2 = w1 * kx2[x2];
                    for (std::size_t p2 = 0; p2 < n; ++p2, ++idx)
                        s += pair.values[idx] * w2 * kp2[p2];
                }
            }
        truth[q] = s;
        tmax = std::max(tmax, std::abs(s));
    }
    for (std::size_t q = 0; q < probes.size(); ++q) {
        CHECK(std::isfinite(mc.errors[q]));
        CHECK(mc.errors[q] > 0.0);
        const double allow = 3.5 * mc.errors[q] +
                             0.02 * std::max(std::abs(truth[q]), 0.2 * tmax);
        CHECK(std::abs(mc.values[q] - truth[q]) <= allow);
    }
}

TEST_CASE("plane transport matches a direct oracle in two dimensions") {
    const std::size_t n = 12;
    const double L = 3.0, gamma = 0.8, ktilde = 1.0, z = 0.25;
    const TransverseGrid g{2, n, L / static_cast<double>(n)};
    const auto m = SpectrumModel::von_karman(2, 1.0 / 3.0, 0.9, 8.0, 0.5);
    const WignerDist W0 = sample_dist(g, gamma, [L](const double* x, const double* p) {
        return std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1]) / 0.2025) *
               (1.0 + 0.3 * std::cos(2.0 * kPi * x[0] / L)) *
               std::exp(-0.5 * (p[0] * p[0] + p[1] * p[1]) / 1.44);
    });
    const WhiteNoiseModel model(LimitRegime::WignerMoyal, m, ktilde, gamma);
    const MomentField mf = solve_mean_wm(W0, model, z);
    REQUIRE(mf.grid.has_value());
    CHECK(mf.grid->imag_residual <= 1e-10);

    const double dp = W0.dp();
    const double dx = g.dx;
    DenseTable gor;
    gor.umax = std::sqrt(2.0) * (kPi / dp + z * kPi / (dx * ktilde)) * 1.02;
    gor.f.resize(601);
    for (std::size_t i = 0; i < gor.f.size(); ++i) {
        const double u = gor.umax * static_cast<double>(i) /
                         static_cast<double>(gor.f.size() - 1);
        if (u == 0.0) {
            gor.f[i] = 0.0;
            continue;
        }
        auto f = [&](double s) {
            return 2.0 * kPi * (2.0 * kPi * m.eval_radial(s)) * s *
                   (1.0 - std::cyl_bessel_j(0.0, gamma * u * s));
        };
        const auto pts = quad::split_points(0.0, 120.0, kPi / std::max(gamma * u, 0.3));
        gor.f[i] = quad::integrate_segments(f, pts, 1e-13, 1e-10).value /
                   (gamma * gamma);
    }

    const std::size_t points = n * n;
    const std::vector<std::size_t> dims2{n, n};
    std::vector<cplx> field(points * points);
    // Stream x for time z, one momentum column at a time.
    for (std::size_t pf = 0; pf < points; ++pf) {
        const double sh0 = z * W0.pcoord(pf / n) / ktilde;
        const double sh1 = z * W0.pcoord(pf % n) / ktilde;
        std::vector<cplx> plane(points);
        for (std::size_t xf = 0; xf < points; ++xf)
            plane[xf] = cplx(W0.w[xf * points + pf], 0.0);
        fft::c2c(dims2, plane.data(), plane.data(), -1);
        for (std::size_t k0 = 0; k0 < n; ++k0)
            for (std::size_t k1 = 0; k1 < n; ++k1) {
                cplx f(1.0 / static_cast<double>(points), 0.0);
                const double a0 = g.wavenumber(k0) * sh0;
                const double a1 = g.wavenumber(k1) * sh1;
                f *= k0 == n / 2 ? cplx(std::cos(a0), 0.0)
                                 : cplx(std::cos(a0), -std::sin(a0));
                f *= k1 == n / 2 ? cplx(std::cos(a1), 0.0)
                                 : cplx(std::cos(a1), -std::sin(a1));
                plane[k0 * n + k1] *= f;
            }
        fft::c2c(dims2, plane.data(), plane.data(), 1);
        for (std::size_t xf = 0; xf < points; ++xf)
            field[xf * points + pf] = cplx(plane[xf].real(), 0.0);
    }
    const std::vector<std::size_t> dims4{n, n, n, n};
    fft::c2c(dims4, field.data(), field.data(), -1);
    const double ystep = 2.0 * kPi / (static_cast<double>(n) * dp);
    auto line = [&](const double* xi, const double* y) {
        const std::size_t panels = 128;
        const double h = z / static_cast<double>(panels);
        auto rad = [&](double s) {
            const double v0 = y[0] + s * xi[0] / ktilde;
            const double v1 = y[1] + s * xi[1] / ktilde;
            return gor(std::sqrt(v0 * v0 + v1 * v1));
        };
        double s = rad(0.0) + rad(z);
        for (std::size_t i = 1; i < panels; ++i)
            s += ((i & 1) ? 4.0 : 2.0) * rad(h * static_cast<double>(i));
        return s * h / 3.0;
    };
    std::size_t id4[4];
    const std::size_t dcount[4] = {points * points / n, points * points / (n * n),
                                   n, 1};
    for (std::size_t flat = 0; flat < field.size(); ++flat) {
        std::size_t rem = flat;
        for (int a = 0; a < 4; ++a) {
            id4[a] = rem / dcount[a];
            rem %= dcount[a];
        }
        double xi[2], y[2];
        bool nyq[4];
        for (int a = 0; a < 2; ++a) {
            xi[a] = 2.0 * kPi * static_cast<double>(signed_bin(id4[a], n)) / L;
            nyq[a] = id4[a] == n / 2;
            y[a] = ystep * static_cast<double>(signed_bin(id4[2 + a], n));
            nyq[2 + a] = id4[2 + a] == n / 2;
        }
        double lam = 0.0;
        int combos = 0;
        for (int c = 0; c < 16; ++c) {
            if ((c & 1) && !nyq[0]) continue;
            if ((c & 2) && !nyq[1]) continue;
            if ((c & 4) && !nyq[2]) continue;
            if ((c & 8) && !nyq[3]) continue;
            const double cx[2] = {(c & 1) ? -xi[0] : xi[0], (c & 2) ? -xi[1] : xi[1]};
            const double cy[2] = {(c & 4) ? -y[0] : y[0], (c & 8) ? -y[1] : y[1]};
            lam += std::exp(-ktilde * ktilde * line(cx, cy));
            ++combos;
        }
        field[flat] *= lam / static_cast<double>(combos);
    }
    fft::c2c(dims4, field.data(), field.data(), 1);
    std::vector<double> oracle(field.size());
    for (std::size_t i = 0; i < field.size(); ++i)
        oracle[i] = field[i].real() / static_cast<double>(field.size());
    const double scale = max_abs(oracle);
    double worst = 0.0;
    for (std::size_t i = 0; i < oracle.size(); ++i)
        worst = std::max(worst, std::abs(mf.grid->w[i] - oracle[i]));
    CHECK(worst <= 1e-5 * scale);
}

TEST_CASE("moment solvers reject inconsistent inputs") {
    const double inf = kInf;
    const auto vk = SpectrumModel::von_karman(1, 0.4, 0.8, 6.0, 0.5);
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] { WhiteNoiseModel(LimitRegime::WignerMoyal, vk, 1.0, 0.0); },
        "needs gamma > 0"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] { WhiteNoiseModel(LimitRegime::Liouville, vk, 1.0, 0.5); },
        "fixes gamma = 0"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] { WhiteNoiseModel(LimitRegime::WignerMoyal, vk, -1.0, 1.0); },
        "ktilde"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            WhiteNoiseModel(LimitRegime::WignerMoyal,
                            SpectrumModel::power_law_bounded(1, 0.6, 0.0, 16.0, 1.0),
                            1.0, 1.0);
        },
        "damping integral diverges"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            WhiteNoiseModel(LimitRegime::Liouville,
                            SpectrumModel::power_law_bounded(1, 0.3, 0.4, inf, 1.0),
                            1.0);
        },
        "second transverse moment"));
    {
        CustomSpectrum spec;
        spec.density = [](const double* k, int nn) {
            double s = 1.0;
            for (int i = 0; i < nn; ++i) s += (i + 1.0) * k[i] * k[i];
            return 1.0 / (s * s * s);
        };
        spec.isotropic = false;
        spec.zeroth_moment_finite = true;
        spec.second_moment_finite = true;
        spec.wm_damping_finite = true;
        spec.bound_constant = 8.0;
        const auto aniso = SpectrumModel::custom(1, 0.5, 1.0, inf, 1.0, spec);
        CHECK(throws_mentioning<std::invalid_argument>(
            [&] { WhiteNoiseModel(LimitRegime::Liouville, aniso, 1.0); },
            "isotropic"));
    }
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            wm_damping_table(SpectrumModel::power_law_bounded(2, 0.3, 0.0, 16.0, 1.0),
                             0.5, 4.0);
        },
        "one transverse dimension"));

    const TransverseGrid g{1, 16, 0.25};
    const WignerDist W0 = sample_dist(g, 0.6, [](const double* x, const double* p) {
        return std::exp(-x[0] * x[0] - p[0] * p[0]);
    });
    const WhiteNoiseModel wm(LimitRegime::WignerMoyal, vk, 1.0, 0.6);
    const WhiteNoiseModel li(LimitRegime::Liouville, vk, 1.0);
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            WignerDist bad = W0;
            bad.gamma = 0.5;
            apply_Q0_wm(bad, wm);
        },
        "gamma does not match"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] { solve_mean_wm(W0, li, 0.5); }, "not Wigner-Moyal"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] { solve_mean_liouville(W0, wm, 0.5); }, "not Liouville"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] { solve_mean_wm(W0, wm, 50.0); }, "transport displacement"));
    {
        BackgroundModel bg;
        bg.mu = [](double, const double*) { return 1.0; };
        const WhiteNoiseModel busy(LimitRegime::WignerMoyal, vk, 1.0, 0.6, bg);
        CHECK(throws_mentioning<std::invalid_argument>(
            [&] { solve_mean_wm(W0, busy, 0.5); }, "background must be trivial"));
    }
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            solve_npoint_liouville({W0}, li, 5, 0.5, 0.1, {}, 100, 0.2, 0.2, 1);
        },
        "order must be between 1 and 4"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            solve_npoint_liouville({W0}, li, 1, 0.5, 0.15, {}, 100, 0.2, 0.2, 1);
        },
        "whole number of dz steps"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            solve_npoint_liouville({W0}, li, 2, 0.5, 0.1, {{0.0, 0.0}}, 100, 0.2, 0.2, 1);
        },
        "probe length"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            solve_npoint_liouville({W0}, li, 1, 0.5, 0.1, {{0.0, 100.0}}, 100, 0.2,
                                   0.2, 1);
        },
        "probe outside"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            WignerDist neg = W0;
            for (double& v : neg.w) v = -1.0;
            solve_npoint_liouville({neg}, li, 1, 0.5, 0.1, {}, 100, 0.2, 0.2, 1);
        },
        "no positive mass"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            const TransverseGrid big{1, 64, 0.25};
            const WignerDist wbig =
                sample_dist(big, 1.0, [](const double* x, const double* p) {
                    return std::exp(-x[0] * x[0] - p[0] * p[0]);
                });
            solve_pair_liouville_grid(wbig, li, 0.1, 4, {});
        },
        "larger than 48"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] { solve_pair_liouville_grid(W0, li, 0.1, 4, {{0.0, 0.0, 3.9, 0.0}}); },
        "probe outside"));
    CHECK(throws_mentioning<std::invalid_argument>(
        [&] {
            BackgroundModel bg;
            bg.v0 = [](double, const double* x) { return 50.0 * x[0]; };
            bg.v0_bound = 200.0;
            const WhiteNoiseModel steep(LimitRegime::Liouville, vk, 1.0, 0.0, bg);
            solve_mean_inhomogeneous(W0, steep, 1.0, 1);
        },
        "eighth of the momentum box"));
}

TEST_CASE("moment kernels are deterministic across threading") {
    const auto m = SpectrumModel::von_karman(1, 0.35, 0.8, 5.0, 0.35);
    const TransverseGrid g{1, 24, 7.5 / 24.0};
    const WignerDist W0 = sample_dist(g, 1.0, [](const double* x, const double* p) {
        return std::exp(-0.5 * x[0] * x[0] / 0.64 - 0.5 * p[0] * p[0] / 0.49);
    });
    const WhiteNoiseModel li(LimitRegime::Liouville, m, 1.0);
    const WhiteNoiseModel wm(LimitRegime::WignerMoyal, m, 1.0, 1.0);

    const WignerDist q1 = apply_Q0_wm(W0, wm, false);
    const WignerDist q2 = apply_Q0_wm(W0, wm, true);
    CHECK(q1.w == q2.w);

    const MomentField s1 = solve_mean_liouville(W0, li, 0.5, false);
    const MomentField s2 = solve_mean_liouville(W0, li, 0.5, true);
    CHECK(s1.grid->w == s2.grid->w);

    const std::vector<std::vector<double>> probes = {{0.0, 0.0, 0.5, 0.2},
                                                     {-0.4, 0.3, 0.1, -0.5}};
    const MomentField p1 = solve_pair_liouville_grid(W0, li, 0.5, 16, probes, false);
    const MomentField p2 = solve_pair_liouville_grid(W0, li, 0.5, 16, probes, true);
    CHECK(p1.values == p2.values);

    const MomentField n1 = solve_npoint_liouville({W0}, li, 2, 0.5, 0.025, probes, 500,
                                                  0.4, 0.4, 77, false);
    const MomentField n2 = solve_npoint_liouville({W0}, li, 2, 0.5, 0.025, probes, 500,
                                                  0.4, 0.4, 77, true);
    CHECK(n1.values == n2.values);
    CHECK(n1.errors == n2.errors);
}
