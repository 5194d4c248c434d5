#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "turbwig/common.hpp"

namespace turbwig {

// Adaptive Gauss-Kronrod 7/15 quadrature. Single-threaded and allocation-free
// on the hot path; the same inputs always produce the same subdivision tree.
namespace quad {

struct Result {
    double value = 0.0;
    double error = 0.0;
    std::size_t evals = 0;
};

namespace detail {

// 15-point Kronrod nodes on [-1,1] (positive half) and weights, with the
// embedded 7-point Gauss weights on the odd-indexed nodes.
inline constexpr double xgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double wgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
void gk15(const F& f, double a, double b, double& value, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * xgk[i]);
        fv[14 - i] = f(c + h * xgk[i]);
    }
    fv[7] = f(c);
    double resk = 0.0, resg = 0.0;
    for (int i = 0; i < 7; ++i) resk += wgk[i] * (fv[i] + fv[14 - i]);
    resk += wgk[7] * fv[7];
    for (int i = 0; i < 3; ++i) resg += wg[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
    resg += wg[3] * fv[7];
    value = resk * h;
    // QUADPACK-style error: Gauss/Kronrod gap sharpened against the scaled
    // mean absolute deviation of the integrand.
    const double reskh = resk * 0.5;
    double resasc = wgk[7] * std::abs(fv[7] - reskh);
    for (int i = 0; i < 7; ++i)
        resasc += wgk[i] * (std::abs(fv[i] - reskh) + std::abs(fv[14 - i] - reskh));
    resasc *= std::abs(h);
    err = std::abs((resk - resg) * h);
    if (resasc != 0.0 && err != 0.0)
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    err = std::max(err, 1e-300);
}

template <class F>
double adapt(const F& f, double a, double b, double abstol, double reltol,
             int depth, Result& acc) {
    double v, e;
    gk15(f, a, b, v, e);
    acc.evals += 15;
    if (e <= abstol || e <= reltol * std::abs(v) || depth >= 48 ||
        acc.evals > 4000000) {
        acc.error += e;
        return v;
    }
    const double m = 0.5 * (a + b);
    return adapt(f, a, m, 0.5 * abstol, reltol, depth + 1, acc) +
           adapt(f, m, b, 0.5 * abstol, reltol, depth + 1, acc);
}

}  // namespace detail

template <class F>
Result integrate(const F& f, double a, double b, double abstol = 1e-10,
                 double reltol = 1e-8) {
    Result r;
    if (a == b) return r;
    r.value = detail::adapt(f, a, b, abstol, reltol, 0, r);
    return r;
}

// Integrate across an ordered list of breakpoints (used to pin oscillation
// nodes of trigonometric/Bessel kernels before adapting inside each cell).
template <class F>
Result integrate_segments(const F& f, const std::vector<double>& pts,
                          double abstol = 1e-10, double reltol = 1e-8) {
    Result r;
    if (pts.size() < 2) return r;
    const double per = abstol / static_cast<double>(pts.size() - 1);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        total += detail::adapt(f, pts[i], pts[i + 1], per, reltol, 0, r);
    r.value = total;
    return r;
}

// Breakpoints a = t0 < t1 < ... <= b at spacing `step` (plus the endpoints).
inline std::vector<double> split_points(double a, double b, double step,
                                        std::size_t max_pts = 300000) {
    std::vector<double> pts{a};
    if (step > 0.0 && b - a > step) {
        const std::size_t n =
            std::min<std::size_t>(static_cast<std::size_t>((b - a) / step), max_pts);
        for (std::size_t j = 1; j <= n; ++j) {
            const double t = a + static_cast<double>(j) * step;
            if (t < b) pts.push_back(t);
        }
    }
    pts.push_back(b);
    return pts;
}

}  // namespace quad

// Cubic-Hermite table of an even function on [0, umax], refined until
// interpolation matches the generator to tolerance, with an exact
// antiderivative of the interpolant. Evaluation is O(log n); evenness makes
// the primitive odd, which callers exploit for signed line integrals.
class EvenTable {
public:
    // `fn` is evaluated on [0, umax]; refinement inserts midpoints wherever the
    // cubic disagrees with fn by more than tol (relative to the table scale).
    EvenTable(const std::function<double(double)>& fn, double umax, double tol,
              std::size_t initial = 129, int max_passes = 12) {
        require(umax > 0.0, "EvenTable: umax must be positive");
        require(initial >= 8, "EvenTable: too few initial nodes");
        u_.resize(initial);
        // Dense geometric nodes near zero where fractional-power behavior
        // concentrates, uniform beyond.
        const std::size_t ngeo = initial / 4;
        const double u_lo = umax * 1e-6;
        for (std::size_t i = 0; i < ngeo; ++i)
            u_[i] = (i == 0) ? 0.0
                             : u_lo * std::pow(umax * 0.05 / u_lo,
                                               double(i - 1) / double(ngeo - 1));
        for (std::size_t i = ngeo; i < initial; ++i)
            u_[i] = umax * 0.05 +
                    (umax - umax * 0.05) * double(i - ngeo) / double(initial - 1 - ngeo);
        u_.back() = umax;
        f_.resize(u_.size());
        for (std::size_t i = 0; i < u_.size(); ++i) f_[i] = fn(u_[i]);
        rebuild();
        for (int pass = 0; pass < max_passes; ++pass) {
            double scale = 0.0;
            for (double v : f_) scale = std::max(scale, std::abs(v));
            if (scale == 0.0) break;
            std::vector<double> nu, nf;
            bool refined = false;
            for (std::size_t i = 0; i + 1 < u_.size(); ++i) {
                nu.push_back(u_[i]);
                nf.push_back(f_[i]);
                const double m = 0.5 * (u_[i] + u_[i + 1]);
                const double fm = fn(m);
                if (std::abs(fm - eval_abs(m)) > tol * scale) {
                    nu.push_back(m);
                    nf.push_back(fm);
                    refined = true;
                }
            }
            nu.push_back(u_.back());
            nf.push_back(f_.back());
            u_ = std::move(nu);
            f_ = std::move(nf);
            rebuild();
            if (!refined) break;
            require_runtime(u_.size() < 4000000, "EvenTable: refinement blew up");
        }
    }

    double umax() const { return u_.back(); }

    double eval(double u) const { return eval_abs(std::abs(u)); }

    // Odd primitive P(u) = sign(u) * \int_0^{|u|} f, so \int_a^b f = P(b)-P(a)
    // for any signed a,b.
    double primitive(double u) const {
        const double s = (u < 0.0) ? -1.0 : 1.0;
        return s * primitive_abs(std::abs(u));
    }

private:
    std::vector<double> u_, f_, d_, prim_;

    void rebuild() {
        const std::size_t n = u_.size();
        d_.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (i == 0) {
                d_[i] = (f_[1] - f_[0]) / (u_[1] - u_[0]);
            } else if (i + 1 == n) {
                d_[i] = (f_[n - 1] - f_[n - 2]) / (u_[n - 1] - u_[n - 2]);
            } else {
                const double hl = u_[i] - u_[i - 1], hr = u_[i + 1] - u_[i];
                // Weighted three-point slope on the nonuniform grid.
                d_[i] = (hr * (f_[i] - f_[i - 1]) / hl + hl * (f_[i + 1] - f_[i]) / hr) /
                        (hl + hr);
            }
        }
        prim_.assign(n, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double h = u_[i + 1] - u_[i];
            prim_[i + 1] = prim_[i] + 0.5 * h * (f_[i] + f_[i + 1]) +
                           h * h / 12.0 * (d_[i] - d_[i + 1]);
        }
    }

    std::size_t cell(double u) const {
        const auto it = std::upper_bound(u_.begin(), u_.end(), u);
        std::size_t i = static_cast<std::size_t>(it - u_.begin());
        if (i == 0) return 0;
        if (i >= u_.size()) return u_.size() - 2;
        return i - 1;
    }

    double eval_abs(double u) const {
        require(u <= u_.back() * (1.0 + 1e-9) + 1e-300,
                "EvenTable: evaluation outside tabulated range");
        u = std::min(u, u_.back());
        const std::size_t i = cell(u);
        const double h = u_[i + 1] - u_[i];
        const double t = (u - u_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * f_[i] + (t3 - 2 * t2 + t) * h * d_[i] +
               (-2 * t3 + 3 * t2) * f_[i + 1] + (t3 - t2) * h * d_[i + 1];
    }

    double primitive_abs(double u) const {
        require(u <= u_.back() * (1.0 + 1e-9) + 1e-300,
                "EvenTable: primitive outside tabulated range");
        u = std::min(u, u_.back());
        const std::size_t i = cell(u);
        const double h = u_[i + 1] - u_[i];
        const double t = (u - u_[i]) / h;
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
        // Exact integral of the Hermite basis from the left node.
        const double b0 = 0.5 * t4 - t3 + t;
        const double b1 = 0.25 * t4 - 2.0 / 3.0 * t3 + 0.5 * t2;
        const double b2 = -0.5 * t4 + t3;
        const double b3 = 0.25 * t4 - t3 / 3.0;
        return prim_[i] +
               h * (b0 * f_[i] + b1 * h * d_[i] + b2 * f_[i + 1] + b3 * h * d_[i + 1]);
    }
};

}  // namespace turbwig
