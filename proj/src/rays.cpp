#include "turbwig/rays.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "turbwig/fft.hpp"

namespace turbwig {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Spectral per-slice transverse gradient of the medium, with periodic cubic
// interpolation in x and the same slice-pair convention as MediumField.
class SliceGradients {
public:
    explicit SliceGradients(const MediumField& f) : grid_(f.grid()) {
        const auto& t = grid_.trans;
        const std::size_t pts = t.points();
        const std::vector<std::size_t> dims(static_cast<std::size_t>(t.dim), t.n);
        g_.assign(grid_.nz * t.dim * pts, 0.0);
        std::vector<cplx> hat(pts), work(pts);
        for (std::size_t iz = 0; iz < grid_.nz; ++iz) {
            for (std::size_t flat = 0; flat < pts; ++flat)
                hat[flat] = cplx(f.value(iz, flat), 0.0);
            fft::c2c(dims, hat.data(), hat.data(), -1);
            for (int ax = 0; ax < t.dim; ++ax) {
                for (std::size_t flat = 0; flat < pts; ++flat) {
                    std::size_t idx[3];
                    t.unflatten(flat, idx);
                    // The unpaired Nyquist mode has no odd derivative; drop it.
                    const double q = (idx[ax] == t.n / 2) ? 0.0 : t.wavenumber(idx[ax]);
                    work[flat] = hat[flat] * cplx(0.0, q);
                }
                fft::c2c(dims, work.data(), work.data(), +1);
                double* out = g_.data() + (iz * t.dim + ax) * pts;
                const double scale = 1.0 / static_cast<double>(pts);
                for (std::size_t flat = 0; flat < pts; ++flat)
                    out[flat] = work[flat].real() * scale;
            }
        }
    }

    // Catmull-Rom tensor interpolation of gradient component `ax` on slice iz.
    double eval(std::size_t iz, int ax, const double* xpos) const {
        const auto& t = grid_.trans;
        const long n = static_cast<long>(t.n);
        long base[3];
        double w[3][4];
        for (int a = 0; a < t.dim; ++a) {
            const double xf = xpos[a] / t.dx + 0.5 * static_cast<double>(t.n);
            const double fl = std::floor(xf);
            const double u = xf - fl;
            const double u2 = u * u, u3 = u2 * u;
            w[a][0] = 0.5 * (-u3 + 2.0 * u2 - u);
            w[a][1] = 0.5 * (3.0 * u3 - 5.0 * u2 + 2.0);
            w[a][2] = 0.5 * (-3.0 * u3 + 4.0 * u2 + u);
            w[a][3] = 0.5 * (u3 - u2);
            base[a] = static_cast<long>(fl) - 1;
        }
        const double* slice = g_.data() + (iz * t.dim + ax) * t.points();
        double sum = 0.0;
        const int corners = 1 << (2 * t.dim);
        for (int c = 0; c < corners; ++c) {
            double wt = 1.0;
            std::size_t flat = 0;
            int cc = c;
            for (int a = 0; a < t.dim; ++a) {
                const int tap = cc & 3;
                cc >>= 2;
                wt *= w[a][tap];
                const long i = ((base[a] + tap) % n + n) % n;
                flat = flat * t.n + static_cast<std::size_t>(i);
            }
            sum += wt * slice[flat];
        }
        return sum;
    }

private:
    MediumGrid grid_;
    std::vector<double> g_;
};

// D(x) as a d x d row-major block, reading the radial tables; beyond the
// tabulated range the tensor must have decayed (checked once per trace).
void diffusion_block(const DiffusionTensor& dt, const double* dxv, int d,
                     bool tail_decayed, double* B) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) r2 += dxv[a] * dxv[a];
    const double r = std::sqrt(r2);
    const double rmax = dt.rmax();
    if (r > rmax) {
        require_runtime(tail_decayed,
                        "rays: tuple separation exceeds the tabulated diffusion "
                        "range before the tensor has decayed; raise rmax");
        for (int a = 0; a < d * d; ++a) B[a] = 0.0;
        return;
    }
    if (r < 1e-14 * (1.0 + rmax)) {
        const double v = dt.trace0() / d;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) B[a * d + b] = (a == b) ? v : 0.0;
        return;
    }
    if (d == 1) {
        B[0] = dt.longitudinal(r);
        return;
    }
    const double L = dt.longitudinal(r), T = dt.transverse(r);
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            B[a * d + b] = ((a == b) ? T : 0.0) + (L - T) * dxv[a] * dxv[b] / r2;
}

bool tensor_tail_decayed(const DiffusionTensor& dt) {
    double tail = std::abs(dt.longitudinal(dt.rmax()));
    if (dt.dim() >= 2) tail = std::max(tail, std::abs(dt.transverse(dt.rmax())));
    return tail <= 1e-3 * dt.trace0() / dt.dim();
}

std::size_t step_count(double z, double dz) {
    require(dz > 0.0 && std::isfinite(dz), "rays: dz must be positive");
    require(z >= 0.0 && std::isfinite(z), "rays: z must be nonnegative");
    const double k = std::round(z / dz);
    require(std::abs(k * dz - z) <= 1e-9 * std::max(1.0, z),
            "rays: z must be a whole number of dz steps");
    return static_cast<std::size_t>(k);
}

// Delete-one-tuple jackknife for linear statistics T = sum_i c_i under the
// mass-restoring rescale T_(i) = (T - c_i) W/(W - w_i). The closed form
// needs only the global A-sums and the contributor moments.
struct JackknifeGlobals {
    std::size_t m = 0;
    double sum_a = 0.0, sum_a2 = 0.0;
    std::vector<double> a;

    explicit JackknifeGlobals(const std::vector<double>& w) {
        m = w.size();
        double total = 0.0;
        for (double v : w) total += v;
        a.resize(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double rest = total - w[i];
            a[i] = (rest > 0.0) ? total / rest : 0.0;
            sum_a += a[i];
            sum_a2 += a[i] * a[i];
        }
    }
};

double jackknife_stderr(const JackknifeGlobals& g, double t, double sum_ca,
                        double sum_ca2, double sum_c2a2) {
    if (g.m < 2) return kInf;
    const double m = static_cast<double>(g.m);
    const double mean = (t * g.sum_a - sum_ca) / m;
    const double sumsq = t * t * g.sum_a2 - 2.0 * t * sum_ca2 + sum_c2a2;
    const double var = (m - 1.0) / m * std::max(0.0, sumsq - m * mean * mean);
    return std::sqrt(var);
}

}  // namespace

void RayEnsemble::validate() const {
    require(dim >= 1 && dim <= 3, "rays: dim must be 1..3");
    require(tuple >= 1, "rays: tuple size must be >= 1");
    const std::size_t nd = weight.size() * static_cast<std::size_t>(tuple) *
                           static_cast<std::size_t>(dim);
    require(x.size() == nd && p.size() == nd, "rays: state size mismatch");
    require(std::isfinite(z), "rays: z must be finite");
    for (double w : weight)
        require(w >= 0.0 && std::isfinite(w), "rays: weights must be nonnegative");
    for (double v : x) require(std::isfinite(v), "rays: positions must be finite");
    for (double v : p) require(std::isfinite(v), "rays: momenta must be finite");
}

RayEnsemble sample_gaussian_rays(int dim, int tuple, std::size_t ntuples,
                                 const std::vector<double>& x0, double sigma_x,
                                 const std::vector<double>& p0, double sigma_p,
                                 std::uint64_t seed, std::uint64_t realization) {
    require(dim >= 1 && dim <= 3, "rays: dim must be 1..3");
    require(tuple >= 1, "rays: tuple size must be >= 1");
    require(ntuples >= 1, "rays: need at least one tuple");
    require(sigma_x >= 0.0 && std::isfinite(sigma_x) && sigma_p >= 0.0 &&
                std::isfinite(sigma_p),
            "rays: spreads must be nonnegative");
    require(x0.empty() || x0.size() == static_cast<std::size_t>(dim),
            "rays: x0 size mismatch");
    require(p0.empty() || p0.size() == static_cast<std::size_t>(dim),
            "rays: p0 size mismatch");
    RayEnsemble e;
    e.dim = dim;
    e.tuple = tuple;
    e.seed = seed;
    e.weight.assign(ntuples, 1.0 / static_cast<double>(ntuples));
    e.x.resize(ntuples * tuple * dim);
    e.p.resize(ntuples * tuple * dim);
    const Philox rng(seed, rng_stream(realization, RngChannel::RayInit));
    for (std::size_t i = 0; i < e.x.size(); ++i) {
        double gx, gp;
        rng.gaussians2(i, gx, gp);
        const int ax = static_cast<int>(i % dim);
        e.x[i] = (x0.empty() ? 0.0 : x0[ax]) + sigma_x * gx;
        e.p[i] = (p0.empty() ? 0.0 : p0[ax]) + sigma_p * gp;
    }
    return e;
}

RayEnsemble offset_tuples(const RayEnsemble& base,
                          const std::vector<double>& offsets) {
    base.validate();
    require(base.tuple == 1, "rays: offsets widen one-ray tuples only");
    require(!offsets.empty() &&
                offsets.size() % static_cast<std::size_t>(base.dim) == 0,
            "rays: offsets must hold a whole number of d-vectors");
    const int extra = static_cast<int>(offsets.size() / base.dim);
    RayEnsemble e;
    e.dim = base.dim;
    e.tuple = 1 + extra;
    e.seed = base.seed;
    e.z = base.z;
    e.weight = base.weight;
    e.x.resize(base.tuples() * e.tuple * e.dim);
    e.p.resize(e.x.size());
    for (std::size_t t = 0; t < base.tuples(); ++t)
        for (int j = 0; j < e.tuple; ++j)
            for (int ax = 0; ax < e.dim; ++ax) {
                const double off =
                    (j == 0) ? 0.0 : offsets[(j - 1) * base.dim + ax];
                e.x_at(t, j, ax) = base.x_at(t, 0, ax) + off;
                e.p_at(t, j, ax) = base.p_at(t, 0, ax);
            }
    return e;
}

RayEnsemble trace_rays_medium(RayEnsemble e, const MediumField& field,
                              const BackgroundModel& bg, double ktilde,
                              double eps, double z, double dz, bool parallel) {
    e.validate();
    require(ktilde > 0.0 && std::isfinite(ktilde), "rays: ktilde must be positive");
    require(eps > 0.0 && std::isfinite(eps), "rays: eps must be positive");
    require(e.dim == field.grid().trans.dim, "rays: medium dimension mismatch");
    const std::size_t nsteps = step_count(z, dz);
    if (nsteps == 0) return e;
    const double eps2 = eps * eps;
    require(dz / eps2 <= field.grid().dz * (1.0 + 1e-9),
            "rays: dz outruns the slice spacing of the scaled sweep; "
            "shrink dz below eps^2 * slice spacing");
    require(e.z >= 0.0 &&
                (e.z + z) / eps2 <= field.grid().zlength() * (1.0 + 1e-9),
            "rays: sweep leaves the z-range of the realization");

    const SliceGradients grads(field);
    const std::size_t nz = field.grid().nz;
    const double dzf = field.grid().dz;
    // Slice pair at every step node; kicks happen at nodes, drifts between.
    std::vector<std::size_t> i0(nsteps + 1), i1(nsteps + 1);
    std::vector<double> zw(nsteps + 1), znode(nsteps + 1);
    for (std::size_t m = 0; m <= nsteps; ++m) {
        znode[m] = e.z + static_cast<double>(m) * dz;
        double s = znode[m] / eps2 / dzf;
        std::size_t a = static_cast<std::size_t>(s);
        if (a >= nz) a = nz - 1;
        i0[m] = a;
        i1[m] = (a + 1) % nz;
        zw[m] = s - static_cast<double>(a);
    }

    const double kick_scale = -ktilde / eps;
    const std::size_t nrays = e.rays();
    const auto body = [&](std::size_t r) {
        double* xr = e.x.data() + r * e.dim;
        double* pr = e.p.data() + r * e.dim;
        double f[3], gv0[3];
        const auto force_at = [&](std::size_t m) {
            for (int ax = 0; ax < e.dim; ++ax) {
                const double gl = grads.eval(i0[m], ax, xr);
                const double gr = grads.eval(i1[m], ax, xr);
                f[ax] = kick_scale * ((1.0 - zw[m]) * gl + zw[m] * gr);
            }
            if (bg.v0) {
                v0_gradient(bg, znode[m], xr, e.dim, gv0);
                for (int ax = 0; ax < e.dim; ++ax) f[ax] -= ktilde * gv0[ax];
            }
        };
        for (std::size_t m = 0; m < nsteps; ++m) {
            force_at(m);
            for (int ax = 0; ax < e.dim; ++ax) pr[ax] += 0.5 * dz * f[ax];
            for (int ax = 0; ax < e.dim; ++ax) xr[ax] += dz * pr[ax] / ktilde;
            force_at(m + 1);
            for (int ax = 0; ax < e.dim; ++ax) pr[ax] += 0.5 * dz * f[ax];
        }
    };
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::size_t r = 0; r < nrays; ++r) body(r);
    } else {
        for (std::size_t r = 0; r < nrays; ++r) body(r);
    }
    e.z += z;
    return e;
}

RayEnsemble trace_rays_medium_serial(RayEnsemble e, const MediumField& field,
                                     const BackgroundModel& bg, double ktilde,
                                     double eps, double z, double dz) {
    return trace_rays_medium(std::move(e), field, bg, ktilde, eps, z, dz, false);
}

RayEnsemble trace_rays_sde(RayEnsemble e, const DiffusionTensor& dt,
                           const BackgroundModel& bg, double ktilde, double z,
                           double dz, std::uint64_t seed, bool parallel) {
    e.validate();
    require(ktilde > 0.0 && std::isfinite(ktilde), "rays: ktilde must be positive");
    require(e.dim == dt.dim(), "rays: diffusion tensor dimension mismatch");
    const int nd = e.tuple * e.dim;
    require(nd <= 16, "rays: tuple phase-space dimension exceeds 16");
    const std::size_t nsteps = step_count(z, dz);
    if (nsteps == 0) return e;
    const bool tail_decayed = tensor_tail_decayed(dt);
    const std::size_t pairs = static_cast<std::size_t>((nd + 1) / 2);

    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                              Eigen::ColMajor, 16, 16>;
    using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 16, 1>;
    const double kick_var0 = ktilde * ktilde * dz;
    const double scalar_sd =
        (nd == 1) ? std::sqrt(kick_var0 * dt.trace0()) : 0.0;

    const auto body = [&](std::size_t t) {
        const Philox rng(seed, rng_stream(t, RngChannel::RayKick));
        double* xt = e.x.data() + t * nd;
        double* pt = e.p.data() + t * nd;
        double xi[16], mu[16], gv0[3], blk[9], dxv[3];
        Mat cov(nd, nd);
        Eigen::SelfAdjointEigenSolver<Mat> es;
        double zc = e.z;
        for (std::size_t m = 0; m < nsteps; ++m) {
            for (int i = 0; i < nd; ++i) xt[i] += 0.5 * dz * pt[i] / ktilde;
            const double zmid = zc + 0.5 * dz;
            for (std::size_t q = 0; q < pairs; ++q) {
                double g0, g1;
                rng.gaussians2(m * pairs + q, g0, g1);
                xi[2 * q] = g0;
                if (2 * q + 1 < static_cast<std::size_t>(nd)) xi[2 * q + 1] = g1;
            }
            if (nd == 1) {
                const double m0 = bg.mu_at(zmid, xt);
                pt[0] += scalar_sd * m0 * xi[0];
            } else {
                for (int j = 0; j < e.tuple; ++j)
                    mu[j] = bg.mu_at(zmid, xt + j * e.dim);
                for (int j = 0; j < e.tuple; ++j)
                    for (int k = j; k < e.tuple; ++k) {
                        for (int ax = 0; ax < e.dim; ++ax)
                            dxv[ax] = xt[j * e.dim + ax] - xt[k * e.dim + ax];
                        diffusion_block(dt, dxv, e.dim, tail_decayed, blk);
                        const double s = kick_var0 * mu[j] * mu[k];
                        for (int a = 0; a < e.dim; ++a)
                            for (int b = 0; b < e.dim; ++b) {
                                cov(j * e.dim + a, k * e.dim + b) =
                                    s * blk[a * e.dim + b];
                                cov(k * e.dim + b, j * e.dim + a) =
                                    s * blk[a * e.dim + b];
                            }
                    }
                es.compute(cov);
                const double top = es.eigenvalues().maxCoeff();
                const double floor_tol = -1e-10 * std::max(top, 1e-300);
                Vec lam = es.eigenvalues();
                for (int i = 0; i < nd; ++i) {
                    require_runtime(lam[i] >= floor_tol,
                                    "rays: tuple block covariance is not positive "
                                    "semidefinite; the spectrum and diffusion "
                                    "tensor are inconsistent");
                    lam[i] = std::sqrt(std::max(0.0, lam[i]));
                }
                Vec kick = es.eigenvectors() *
                           (lam.array() * Eigen::Map<Vec>(xi, nd).array()).matrix();
                for (int i = 0; i < nd; ++i) pt[i] += kick[i];
            }
            if (bg.v0)
                for (int j = 0; j < e.tuple; ++j) {
                    v0_gradient(bg, zmid, xt + j * e.dim, e.dim, gv0);
                    for (int ax = 0; ax < e.dim; ++ax)
                        pt[j * e.dim + ax] -= ktilde * dz * gv0[ax];
                }
            for (int i = 0; i < nd; ++i) xt[i] += 0.5 * dz * pt[i] / ktilde;
            zc += dz;
        }
    };
    const std::size_t nt = e.tuples();
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::size_t t = 0; t < nt; ++t) body(t);
    } else {
        for (std::size_t t = 0; t < nt; ++t) body(t);
    }
    e.z += z;
    return e;
}

RayEnsemble trace_rays_sde_serial(RayEnsemble e, const DiffusionTensor& dt,
                                  const BackgroundModel& bg, double ktilde,
                                  double z, double dz, std::uint64_t seed) {
    return trace_rays_sde(std::move(e), dt, bg, ktilde, z, dz, seed, false);
}

MomentField estimate_phase_space_density(const RayEnsemble& e,
                                         const std::vector<std::vector<double>>& probes,
                                         double bandwidth_x, double bandwidth_p,
                                         bool parallel) {
    e.validate();
    require(bandwidth_x > 0.0 && std::isfinite(bandwidth_x) && bandwidth_p > 0.0 &&
                std::isfinite(bandwidth_p),
            "density estimate: bandwidths must be positive");
    const int nd = e.tuple * e.dim;
    const std::size_t state = 2 * static_cast<std::size_t>(nd);
    for (const auto& pr : probes)
        require(pr.size() == state, "density estimate: probe size mismatch");

    MomentField out;
    out.order = e.tuple;
    out.dim = e.dim;
    out.z = e.z;
    out.probes = probes;
    out.values.assign(probes.size(), 0.0);
    out.errors.assign(probes.size(), kInf);

    const JackknifeGlobals jk(e.weight);
    const double norm = std::pow(2.0 * M_PI * bandwidth_x * bandwidth_p, -nd);
    const double ivx = 1.0 / (bandwidth_x * bandwidth_x);
    const double ivp = 1.0 / (bandwidth_p * bandwidth_p);
    const std::size_t np = probes.size();
    const auto body = [&](std::size_t q) {
        const double* pr = probes[q].data();
        double t = 0.0, sca = 0.0, sca2 = 0.0, sc2a2 = 0.0;
        for (std::size_t i = 0; i < e.tuples(); ++i) {
            double ex = 0.0;
            const double* xt = e.x.data() + i * nd;
            const double* pt = e.p.data() + i * nd;
            for (int j = 0; j < e.tuple; ++j)
                for (int ax = 0; ax < e.dim; ++ax) {
                    const double ux = xt[j * e.dim + ax] - pr[2 * j * e.dim + ax];
                    const double up =
                        pt[j * e.dim + ax] - pr[(2 * j + 1) * e.dim + ax];
                    ex += ux * ux * ivx + up * up * ivp;
                }
            const double c = e.weight[i] * norm * std::exp(-0.5 * ex);
            t += c;
            sca += c * jk.a[i];
            sca2 += c * jk.a[i] * jk.a[i];
            sc2a2 += c * c * jk.a[i] * jk.a[i];
        }
        out.values[q] = t;
        out.errors[q] = jackknife_stderr(jk, t, sca, sca2, sc2a2);
    };
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::size_t q = 0; q < np; ++q) body(q);
    } else {
        for (std::size_t q = 0; q < np; ++q) body(q);
    }
    return out;
}

MomentField histogram_phase_space(const RayEnsemble& e, const TransverseGrid& g,
                                  double gamma) {
    e.validate();
    require(e.tuple == 1, "histogram: one ray per tuple only");
    require(e.dim == g.dim, "histogram: grid dimension mismatch");
    require(gamma > 0.0 && std::isfinite(gamma), "histogram: gamma must be positive");
    const std::size_t cells = g.points() * g.points();
    require(cells <= (std::size_t{1} << 26), "histogram: phase-space grid too large");

    MomentField out;
    out.order = 1;
    out.dim = e.dim;
    out.z = e.z;
    WignerDist w;
    w.grid = g;
    w.gamma = gamma;
    w.z = e.z;
    w.w.assign(cells, 0.0);
    const double dp = w.dp();
    const double cell = w.cell();
    const long n = static_cast<long>(g.n);
    const long half = n / 2;

    // (bin, tuple) pairs, then grouped per bin for the jackknife sums.
    std::vector<std::pair<std::size_t, std::size_t>> hits;
    hits.reserve(e.tuples());
    for (std::size_t t = 0; t < e.tuples(); ++t) {
        std::size_t xflat = 0, pflat = 0;
        bool inside = true;
        for (int ax = 0; ax < e.dim; ++ax) {
            const long ix = static_cast<long>(std::llround(e.x_at(t, 0, ax) / g.dx)) + half;
            const long wrapped = ((ix % n) + n) % n;
            xflat = xflat * g.n + static_cast<std::size_t>(wrapped);
            const long ip = static_cast<long>(std::llround(e.p_at(t, 0, ax) / dp)) + half;
            if (ip < 0 || ip >= n) {
                inside = false;
                break;
            }
            pflat = pflat * g.n + static_cast<std::size_t>(ip);
        }
        if (!inside) {
            out.spilled += e.weight[t];
            continue;
        }
        const std::size_t bin = xflat * g.points() + pflat;
        w.w[bin] += e.weight[t] / cell;
        hits.emplace_back(bin, t);
    }

    out.grid_errors.assign(cells, kInf);
    std::sort(hits.begin(), hits.end());
    const JackknifeGlobals jk(e.weight);
    std::size_t i = 0;
    while (i < hits.size()) {
        std::size_t jx = i;
        const std::size_t bin = hits[i].first;
        double t = 0.0, sca = 0.0, sca2 = 0.0, sc2a2 = 0.0;
        while (jx < hits.size() && hits[jx].first == bin) {
            const std::size_t tu = hits[jx].second;
            const double c = e.weight[tu] / cell;
            t += c;
            sca += c * jk.a[tu];
            sca2 += c * jk.a[tu] * jk.a[tu];
            sc2a2 += c * c * jk.a[tu] * jk.a[tu];
            ++jx;
        }
        out.grid_errors[bin] = jackknife_stderr(jk, t, sca, sca2, sc2a2);
        i = jx;
    }
    out.grid = std::move(w);
    return out;
}

}  // namespace turbwig
