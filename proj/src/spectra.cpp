#include "turbwig/spectra.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace turbwig {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

double uv_factor(double s2, double rho) {
    if (!std::isfinite(rho)) return 1.0;
    const double t = 1.0 + s2 / (rho * rho);
    return 1.0 / (t * t);
}

// Normalization making the VonKarman variance equal the amplitude:
// c(H,n) = Gamma(H + n/2) / (Gamma(H) pi^{n/2}), n = d+1.
double vk_norm(double hurst, int n) {
    return std::tgamma(hurst + 0.5 * n) /
           (std::tgamma(hurst) * std::pow(kPi, 0.5 * n));
}

// Surface area of the unit sphere in n dimensions.
double sphere_area(int n) {
    return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n);
}

// S_n(u) = \int_{S^{n-1}} e^{iu cos t} dOmega: the isotropic plane-wave
// average that turns n-dimensional Fourier transforms into radial integrals.
double sphere_kernel(int n, double u) {
    u = std::abs(u);
    switch (n) {
        case 1:
            return 2.0 * std::cos(u);
        case 2:
            return 2.0 * kPi * std::cyl_bessel_j(0.0, u);
        case 3:
            return (u < 1e-8) ? 4.0 * kPi * (1.0 - u * u / 6.0)
                              : 4.0 * kPi * std::sin(u) / u;
        case 4:
            return (u < 1e-8)
                       ? 2.0 * kPi * kPi * (1.0 - u * u / 8.0)
                       : 4.0 * kPi * kPi * std::cyl_bessel_j(1.0, u) / u;
        default:
            throw std::invalid_argument("sphere_kernel: dimension out of range");
    }
}

// Omega_n - S_n(u), by series for small u to dodge the cancellation.
double sphere_kernel_deficit(int n, double u) {
    u = std::abs(u);
    const double omega = sphere_area(n);
    if (u < 1e-4) {
        const double u2 = u * u;
        return omega * u2 / (2.0 * n) * (1.0 - u2 / (4.0 * (n + 2.0)));
    }
    return omega - sphere_kernel(n, u);
}

// Angular weights for the momentum-diffusion tensor in d transverse dims:
// longitudinal A_d(u) = -S_d''(u), transverse B_d(u) = (S_d + S_d'')/(d-1).
double long_kernel(int d, double u) {
    u = std::abs(u);
    switch (d) {
        case 1:
            return 2.0 * std::cos(u);
        case 2:
            if (u < 1e-6) return 2.0 * kPi * (0.5 - 3.0 * u * u / 16.0);
            return 2.0 * kPi *
                   (std::cyl_bessel_j(0.0, u) - std::cyl_bessel_j(1.0, u) / u);
        case 3: {
            if (u < 1e-4) return 4.0 * kPi * (1.0 / 3.0 - u * u / 10.0);
            const double s = std::sin(u), c = std::cos(u);
            return 4.0 * kPi * (s / u + 2.0 * c / (u * u) - 2.0 * s / (u * u * u));
        }
        default:
            throw std::invalid_argument("long_kernel: dimension out of range");
    }
}

double trans_kernel(int d, double u) {
    u = std::abs(u);
    switch (d) {
        case 2:
            if (u < 1e-6) return 2.0 * kPi * (0.5 - u * u / 16.0);
            return 2.0 * kPi * std::cyl_bessel_j(1.0, u) / u;
        case 3: {
            if (u < 1e-4) return 4.0 * kPi * (1.0 / 3.0 - u * u / 30.0);
            const double s = std::sin(u), c = std::cos(u);
            return 4.0 * kPi * (2.0 * s / (u * u * u) - 2.0 * c / (u * u));
        }
        default:
            throw std::invalid_argument("trans_kernel: dimension out of range");
    }
}

// Radial density with its exact large-k behaviour. For the built-in forms
// phi(k) = c_tail k^{-decay} (1 + O(k^{-2})) beyond the feature scales, which
// lets the tail of every radial integral split into an analytic leading term
// plus a fast-decaying correction. Custom densities only promise the
// envelope, so they get a plain power substitution instead.
struct RadialIntegrand {
    std::function<double(double)> phi;
    double c_tail = 0.0;
    double decay = 0.0;
    bool exact_tail = false;
    double eta = 0.0, rho = 0.0;
};

// Kernel of a radial integral in the variable u = k r. `at_inf` is its limit
// as u -> inf and `osc` the oscillatory remainder fn - at_inf (null if none).
struct RadialKernel {
    std::function<double(double)> fn;
    double at_inf = 0.0;
    std::function<double(double)> osc;
};

// Sum of asymptotically alternating block integrals by repeated averaging of
// the partial sums; returns the accelerated value and a difference-based
// error estimate.
double euler_sum(const std::vector<double>& terms, double& err) {
    std::vector<double> row(terms.size());
    double s = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        s += terms[i];
        row[i] = s;
    }
    double val = row.back();
    double prev = val;
    err = std::abs(terms.back());
    while (row.size() > 1) {
        for (std::size_t i = 0; i + 1 < row.size(); ++i)
            row[i] = 0.5 * (row[i] + row[i + 1]);
        row.pop_back();
        const double cur = row.back();
        const double d = std::abs(cur - prev);
        if (d < err) {
            err = d;
            val = cur;
        }
        prev = cur;
    }
    return val;
}

// \int_0^inf phi(k) k^wpow kern(k r) dk.
//
// Head: adaptive quadrature up to K past every feature scale and well into
// the kernel's asymptotic regime. Constant kernel tail: analytic power
// integral plus the k = K/t correction (exact for built-ins). Oscillatory
// tail: half-period blocks summed with Euler acceleration, which converges
// even when the envelope decays too slowly for absolute truncation.
double radial_integral(const RadialIntegrand& ri, int wpow, const RadialKernel& kern,
                       double r, double abstol, double reltol) {
    const bool osc = static_cast<bool>(kern.osc) && r > 0.0;
    const double margin = ri.decay - wpow - 1;
    require(margin > 1e-3, "radial_integral: integrand decays too slowly to converge");
    if (!ri.exact_tail)
        require(margin > 0.1,
                "radial_integral: custom density tail too close to divergence");

    double K = 8.0 * std::max({ri.eta, 1.0, std::isfinite(ri.rho) ? ri.rho : 0.0});
    if (osc) K = std::max(K, 64.0 / r);

    std::vector<double> pts{0.0};
    if (ri.eta > 0.0 && ri.eta < K) pts.push_back(ri.eta);
    if (std::isfinite(ri.rho) && ri.rho < K) pts.push_back(ri.rho);
    std::sort(pts.begin(), pts.end());
    if (osc) {
        const double step = std::max(kPi / r, K / 4096.0);
        for (double t = pts.back() + step; t < K; t += step) pts.push_back(t);
    }
    pts.push_back(K);

    const auto f = [&](double k) {
        return ri.phi(k) * std::pow(k, wpow) * kern.fn(k * r);
    };
    double total = quad::integrate_segments(f, pts, 0.4 * abstol, reltol).value;

    if (kern.at_inf != 0.0) {
        if (ri.exact_tail) {
            total += kern.at_inf * ri.c_tail * std::pow(K, -margin) / margin;
            const auto corr = [&](double t) {
                const double k = K / t;
                const double dphi = ri.phi(k) - ri.c_tail * std::pow(k, -ri.decay);
                return kern.at_inf * dphi * std::pow(k, wpow) * K / (t * t);
            };
            total += quad::integrate(corr, 0.0, 1.0, 0.2 * abstol, reltol).value;
        } else {
            const double alpha = std::min(1.0, 0.5 * margin);
            const auto sub = [&](double t) {
                const double k = K * std::pow(t, -1.0 / alpha);
                if (!(k < 1e100)) return 0.0;
                return kern.at_inf * ri.phi(k) * std::pow(k, wpow) * (K / alpha) *
                       std::pow(t, -1.0 / alpha - 1.0);
            };
            total += quad::integrate(sub, 0.0, 1.0, 0.2 * abstol, reltol).value;
        }
    }

    if (osc) {
        const auto fo = [&](double k) {
            return ri.phi(k) * std::pow(k, wpow) * kern.osc(k * r);
        };
        const double tau = kPi / r;
        double a = K;
        std::vector<double> blocks;
        double val = 0.0, err = std::numeric_limits<double>::infinity();
        for (int chunk = 0; chunk < 8; ++chunk) {
            for (int j = 0; j < 16; ++j) {
                blocks.push_back(
                    quad::integrate(fo, a, a + tau, 0.005 * abstol, reltol).value);
                a += tau;
            }
            val = euler_sum(blocks, err);
            if (err < 0.2 * abstol) break;
        }
        total += val;
    }
    return total;
}

RadialKernel unit_kernel() {
    return RadialKernel{[](double) { return 1.0; }, 1.0, nullptr};
}

RadialKernel fourier_kernel(int n) {
    return RadialKernel{[n](double u) { return sphere_kernel(n, u); }, 0.0,
                        [n](double u) { return sphere_kernel(n, u); }};
}

RadialKernel deficit_kernel(int n) {
    return RadialKernel{[n](double u) { return sphere_kernel_deficit(n, u); },
                        sphere_area(n),
                        [n](double u) { return -sphere_kernel(n, u); }};
}

RadialKernel longitudinal_kernel(int d) {
    return RadialKernel{[d](double u) { return long_kernel(d, u); }, 0.0,
                        [d](double u) { return long_kernel(d, u); }};
}

RadialKernel transverse_kernel(int d) {
    return RadialKernel{[d](double u) { return trans_kernel(d, u); }, 0.0,
                        [d](double u) { return trans_kernel(d, u); }};
}

// Matern profile M(nu, u) = 2^{1-nu}/Gamma(nu) u^nu K_nu(u), M(nu, 0) = 1.
double matern(double nu, double u) {
    if (u < 1e-8) return 1.0;
    if (u > 705.0) return 0.0;
    return std::pow(2.0, 1.0 - nu) / std::tgamma(nu) * std::pow(u, nu) *
           std::cyl_bessel_k(nu, u);
}

}  // namespace

void SpectrumModel::validate() const {
    require(dim_ >= 1 && dim_ <= 3, "spectrum: dim must be 1..3");
    require(hurst_ > 0.0 && hurst_ < 1.0, "spectrum: Hurst exponent must lie in (0,1)");
    require(eta_ >= 0.0 && std::isfinite(eta_), "spectrum: eta must be finite and >= 0");
    require(rho_ > 0.0, "spectrum: rho must be positive (may be inf)");
    require(!std::isfinite(rho_) || rho_ > eta_, "spectrum: rho must exceed eta");
    require(amplitude_ >= 0.0 && std::isfinite(amplitude_),
            "spectrum: amplitude must be finite and >= 0");
    if (form_ == SpectrumForm::VonKarman)
        require(eta_ > 0.0,
                "spectrum: VonKarman normalization requires eta > 0 "
                "(use PowerLawBounded for eta = 0)");
    if (form_ == SpectrumForm::Custom)
        require(custom_ && custom_->density, "spectrum: custom density missing");
}

SpectrumModel SpectrumModel::von_karman(int dim, double hurst, double eta,
                                        double rho, double amplitude) {
    SpectrumModel m;
    m.form_ = SpectrumForm::VonKarman;
    m.dim_ = dim;
    m.hurst_ = hurst;
    m.eta_ = eta;
    m.rho_ = rho;
    m.amplitude_ = amplitude;
    m.validate();
    return m;
}

SpectrumModel SpectrumModel::power_law_bounded(int dim, double hurst, double eta,
                                               double rho, double amplitude) {
    SpectrumModel m;
    m.form_ = SpectrumForm::PowerLawBounded;
    m.dim_ = dim;
    m.hurst_ = hurst;
    m.eta_ = eta;
    m.rho_ = rho;
    m.amplitude_ = amplitude;
    m.validate();
    return m;
}

SpectrumModel SpectrumModel::custom(int dim, double hurst, double eta, double rho,
                                    double amplitude, CustomSpectrum spec) {
    SpectrumModel m;
    m.form_ = SpectrumForm::Custom;
    m.dim_ = dim;
    m.hurst_ = hurst;
    m.eta_ = eta;
    m.rho_ = rho;
    m.amplitude_ = amplitude;
    m.custom_ = std::make_shared<CustomSpectrum>(std::move(spec));
    m.validate();
    return m;
}

bool SpectrumModel::isotropic() const {
    return form_ != SpectrumForm::Custom || custom_->isotropic;
}

const CustomSpectrum& SpectrumModel::custom_spec() const {
    require(form_ == SpectrumForm::Custom && custom_, "spectrum: not a custom model");
    return *custom_;
}

double SpectrumModel::eval_radial(double s) const {
    require(isotropic(), "spectrum: radial evaluation needs an isotropic model");
    if (form_ == SpectrumForm::Custom) {
        std::vector<double> kv(dim_ + 1, 0.0);
        kv[0] = s;
        return custom_->density(kv.data(), dim_ + 1);
    }
    const int n = dim_ + 1;
    const double s2 = s * s;
    const double base =
        std::pow(eta_ * eta_ + s2, -(hurst_ + 0.5 * n)) * uv_factor(s2, rho_);
    if (form_ == SpectrumForm::VonKarman)
        return amplitude_ * vk_norm(hurst_, n) * std::pow(eta_, 2.0 * hurst_) * base;
    return amplitude_ * base;
}

double SpectrumModel::eval(double xi, const double* k) const {
    if (form_ == SpectrumForm::Custom) {
        std::vector<double> kv(dim_ + 1);
        kv[0] = xi;
        for (int a = 0; a < dim_; ++a) kv[a + 1] = k[a];
        return custom_->density(kv.data(), dim_ + 1);
    }
    double s2 = xi * xi;
    for (int a = 0; a < dim_; ++a) s2 += k[a] * k[a];
    return eval_radial(std::sqrt(s2));
}

double SpectrumModel::bound_constant() const {
    switch (form_) {
        case SpectrumForm::VonKarman:
            return amplitude_ * vk_norm(hurst_, dim_ + 1) * std::pow(eta_, 2.0 * hurst_);
        case SpectrumForm::PowerLawBounded:
            return amplitude_;
        case SpectrumForm::Custom:
            return custom_->bound_constant;
    }
    return 0.0;
}

bool SpectrumModel::zeroth_moment_finite() const {
    if (form_ == SpectrumForm::Custom) return custom_->zeroth_moment_finite;
    return eta_ > 0.0;
}

bool SpectrumModel::second_moment_finite() const {
    if (form_ == SpectrumForm::Custom) return custom_->second_moment_finite;
    const bool infrared = eta_ > 0.0 || hurst_ < 0.5;
    const bool ultraviolet = std::isfinite(rho_) || hurst_ > 0.5;
    return infrared && ultraviolet;
}

bool SpectrumModel::wm_damping_finite() const {
    if (form_ == SpectrumForm::Custom) return custom_->wm_damping_finite;
    return eta_ > 0.0 || hurst_ < 0.5;
}

std::string SpectrumModel::config_block() const {
    std::ostringstream os;
    os << "spectrum.form = ";
    switch (form_) {
        case SpectrumForm::VonKarman: os << "von_karman"; break;
        case SpectrumForm::PowerLawBounded: os << "power_law_bounded"; break;
        case SpectrumForm::Custom: os << "custom:" << custom_->label; break;
    }
    os << "\nspectrum.dim = " << dim_;
    os << "\nspectrum.hurst = " << fmt_g17(hurst_);
    os << "\nspectrum.eta = " << fmt_g17(eta_);
    os << "\nspectrum.rho = " << (std::isfinite(rho_) ? fmt_g17(rho_) : "inf");
    os << "\nspectrum.amplitude = " << fmt_g17(amplitude_) << "\n";
    return os.str();
}

SpectrumModel SpectrumModel::from_config_block(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    for (const char* key :
         {"spectrum.form", "spectrum.dim", "spectrum.hurst", "spectrum.eta",
          "spectrum.rho", "spectrum.amplitude"})
        require(kv.count(key) != 0, std::string("spectrum config: missing key ") + key);
    const std::string form = kv["spectrum.form"];
    require(form.rfind("custom", 0) != 0,
            "spectrum config: custom densities cannot be built from config");
    const int dim = std::stoi(kv["spectrum.dim"]);
    const double hurst = std::stod(kv["spectrum.hurst"]);
    const double eta = std::stod(kv["spectrum.eta"]);
    const double rho = (kv["spectrum.rho"] == "inf")
                           ? std::numeric_limits<double>::infinity()
                           : std::stod(kv["spectrum.rho"]);
    const double amplitude = std::stod(kv["spectrum.amplitude"]);
    if (form == "von_karman") return von_karman(dim, hurst, eta, rho, amplitude);
    if (form == "power_law_bounded")
        return power_law_bounded(dim, hurst, eta, rho, amplitude);
    throw std::invalid_argument("spectrum config: unknown form '" + form + "'");
}

double eval_spectrum(const SpectrumModel& m, const std::vector<double>& kvec) {
    require(static_cast<int>(kvec.size()) == m.dim() + 1,
            "eval_spectrum: wavevector must have d+1 components");
    return m.eval(kvec[0], kvec.data() + 1);
}

double transverse_spectrum(const SpectrumModel& m, const std::vector<double>& q) {
    require(static_cast<int>(q.size()) == m.dim(),
            "transverse_spectrum: argument must have d components");
    return 2.0 * kPi * m.eval(0.0, q.data());
}

namespace {

RadialIntegrand full_radial(const SpectrumModel& m) {
    RadialIntegrand ri;
    ri.phi = [m](double s) { return m.eval_radial(s); };
    ri.decay = 2.0 * m.hurst() + (m.dim() + 1) + (std::isfinite(m.rho()) ? 4.0 : 0.0);
    ri.exact_tail = m.form() != SpectrumForm::Custom;
    ri.c_tail = m.bound_constant() *
                (std::isfinite(m.rho()) ? std::pow(m.rho(), 4.0) : 1.0);
    ri.eta = m.eta();
    ri.rho = m.rho();
    return ri;
}

RadialIntegrand transverse_radial(const SpectrumModel& m) {
    RadialIntegrand ri = full_radial(m);
    const auto base = ri.phi;
    ri.phi = [base](double s) { return 2.0 * kPi * base(s); };
    ri.c_tail *= 2.0 * kPi;
    return ri;
}

// Effective amplitude once the VonKarman normalization is stripped: both
// built-in forms with rho = inf are the Matern density
// A_eff c(H,n) eta^{2H} (eta^2+|kvec|^2)^{-H-n/2}, whose Fourier transforms
// have closed Bessel forms.
double matern_amplitude(const SpectrumModel& m) {
    if (m.form() == SpectrumForm::VonKarman) return m.amplitude();
    return m.amplitude() / (vk_norm(m.hurst(), m.dim() + 1) *
                            std::pow(m.eta(), 2.0 * m.hurst()));
}

bool closed_form_applies(const SpectrumModel& m) {
    return m.form() != SpectrumForm::Custom && !std::isfinite(m.rho()) &&
           m.eta() > 0.0;
}

// C(0) = \int 2 pi Phi(0,q) dq for the Matern case.
double matern_m0(const SpectrumModel& m) {
    return 2.0 * kPi * matern_amplitude(m) * std::tgamma(m.hurst() + 0.5) /
           (std::tgamma(m.hurst()) * std::sqrt(kPi) * m.eta());
}

// Iterated-quadrature covariance for anisotropic custom densities; evenness
// reduces the domain to the positive orthant with cosine kernels.
double covariance_anisotropic(const SpectrumModel& m, const std::vector<double>& x) {
    const int n = m.dim() + 1;
    require(n <= 3, "covariance_function: anisotropic quadrature limited to d <= 2");
    require(std::isfinite(m.rho()),
            "covariance_function: anisotropic quadrature needs rho < inf");
    const double K = 16.0 * std::max({1.0, m.eta(), m.rho()});
    std::vector<double> kv(n, 0.0);
    std::function<double(int)> level = [&](int axis) -> double {
        const double tol = (axis == 0) ? 1e-8 : 1e-10;
        const auto f = [&](double k) {
            kv[axis] = k;
            const double c = std::cos(k * x[axis]);
            if (axis + 1 == n) return 2.0 * c * m.eval(kv[0], kv.data() + 1);
            return 2.0 * c * level(axis + 1);
        };
        const double period =
            (std::abs(x[axis]) > 1e-12) ? kPi / std::abs(x[axis]) : K;
        const auto pts = quad::split_points(0.0, K, std::max(period, K / 512.0));
        return quad::integrate_segments(f, pts, tol, 1e-7).value;
    };
    return level(0);
}

}  // namespace

double covariance_function(const SpectrumModel& m, const std::vector<double>& xvec) {
    require(static_cast<int>(xvec.size()) == m.dim() + 1,
            "covariance_function: separation must have d+1 components");
    require(m.eta() > 0.0, "covariance_function: variance diverges for eta = 0");
    if (!m.isotropic()) return covariance_anisotropic(m, xvec);
    double r2 = 0.0;
    for (double v : xvec) r2 += v * v;
    const double r = std::sqrt(r2);
    const int n = m.dim() + 1;
    if (closed_form_applies(m))
        return matern_amplitude(m) * matern(m.hurst(), m.eta() * r);
    const auto ri = full_radial(m);
    if (r < 1e-12)
        return sphere_area(n) *
               radial_integral(ri, n - 1, unit_kernel(), 0.0, 1e-10, 1e-8);
    return radial_integral(ri, n - 1, fourier_kernel(n), r, 1e-10, 1e-8);
}

double structure_function(const SpectrumModel& m, double r) {
    require(m.isotropic(), "structure_function: model must be isotropic");
    require(r >= 0.0 && std::isfinite(r), "structure_function: r must be finite and >= 0");
    if (r == 0.0) return 0.0;
    const int n = m.dim() + 1;
    if (closed_form_applies(m) && m.eta() * r > 1e-4)
        return 2.0 * matern_amplitude(m) * (1.0 - matern(m.hurst(), m.eta() * r));
    const auto ri = full_radial(m);
    return 2.0 * radial_integral(ri, n - 1, deficit_kernel(n), r, 1e-10, 1e-8);
}

double transverse_moment0(const SpectrumModel& m) {
    require(m.zeroth_moment_finite(),
            "transverse_moment0: integral of 2 pi Phi(0,.) diverges "
            "(infrared cutoff eta = 0)");
    require(m.isotropic(), "transverse_moment0: model must be isotropic");
    const int d = m.dim();
    return sphere_area(d) * radial_integral(transverse_radial(m), d - 1,
                                            unit_kernel(), 0.0, 1e-11, 1e-9);
}

double transverse_moment2(const SpectrumModel& m) {
    require(m.second_moment_finite(),
            "transverse_moment2: |q|^2-weighted integral of 2 pi Phi(0,.) diverges "
            "(need eta > 0 or H < 1/2 infrared, rho < inf or H > 1/2 ultraviolet)");
    require(m.isotropic(), "transverse_moment2: model must be isotropic");
    const int d = m.dim();
    return sphere_area(d) * radial_integral(transverse_radial(m), d + 1,
                                            unit_kernel(), 0.0, 1e-11, 1e-9);
}

double transverse_covariance(const SpectrumModel& m, double s) {
    require(m.zeroth_moment_finite(),
            "transverse_covariance: integral diverges (eta = 0)");
    require(m.isotropic(), "transverse_covariance: model must be isotropic");
    s = std::abs(s);
    if (closed_form_applies(m))
        return matern_m0(m) * matern(m.hurst() + 0.5, m.eta() * s);
    const int d = m.dim();
    const auto ri = transverse_radial(m);
    if (s < 1e-12)
        return sphere_area(d) *
               radial_integral(ri, d - 1, unit_kernel(), 0.0, 1e-11, 1e-9);
    return radial_integral(ri, d - 1, fourier_kernel(d), s, 1e-11, 1e-9);
}

EvenTable transverse_covariance_table(const SpectrumModel& m, double smax,
                                      double tol) {
    require(m.zeroth_moment_finite(),
            "transverse_covariance: integral diverges (eta = 0)");
    require(m.isotropic(), "transverse_covariance: model must be isotropic");
    const auto fn = [m](double s) { return transverse_covariance(m, s); };
    return EvenTable(fn, smax, tol);
}

DiffusionTensor::DiffusionTensor(const SpectrumModel& m, double rmax, double tol)
    : dim_(m.dim()) {
    require(m.second_moment_finite(),
            "diffusion_tensor: |q|^2-weighted integral of 2 pi Phi(0,.) diverges "
            "(need eta > 0 or H < 1/2 infrared, rho < inf or H > 1/2 ultraviolet)");
    require(m.isotropic(), "diffusion_tensor: model must be isotropic");
    require(rmax > 0.0 && std::isfinite(rmax), "diffusion_tensor: rmax must be finite");
    trace0_ = transverse_moment2(m);
    const auto ri = transverse_radial(m);
    const int d = dim_;
    const double t0 = trace0_;
    const auto fl = [ri, d, t0](double r) {
        if (r < 1e-12) return t0 / d;
        return radial_integral(ri, d + 1, longitudinal_kernel(d), r, 1e-11, 1e-9);
    };
    dl_ = std::make_unique<EvenTable>(fl, rmax, tol);
    if (d >= 2) {
        const auto ft = [ri, d, t0](double r) {
            if (r < 1e-12) return t0 / d;
            return radial_integral(ri, d + 1, transverse_kernel(d), r, 1e-11, 1e-9);
        };
        dt_ = std::make_unique<EvenTable>(ft, rmax, tol);
    }
}

double DiffusionTensor::rmax() const { return dl_->umax(); }

double DiffusionTensor::longitudinal(double r) const { return dl_->eval(r); }

double DiffusionTensor::transverse(double r) const {
    require(dim_ >= 2, "diffusion_tensor: transverse profile needs d >= 2");
    return dt_->eval(r);
}

std::vector<double> DiffusionTensor::at0() const {
    std::vector<double> out(dim_ * dim_, 0.0);
    for (int a = 0; a < dim_; ++a) out[a * dim_ + a] = trace0_ / dim_;
    return out;
}

std::vector<double> DiffusionTensor::at(const std::vector<double>& x) const {
    require(static_cast<int>(x.size()) == dim_, "diffusion_tensor: bad point size");
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double r = std::sqrt(r2);
    std::vector<double> out(dim_ * dim_, 0.0);
    if (r < 1e-14 * (1.0 + rmax())) return at0();
    if (dim_ == 1) {
        out[0] = dl_->eval(r);
        return out;
    }
    const double L = dl_->eval(r), T = dt_->eval(r);
    for (int a = 0; a < dim_; ++a) {
        out[a * dim_ + a] = T;
        for (int b = 0; b < dim_; ++b)
            out[a * dim_ + b] += (L - T) * (x[a] / r) * (x[b] / r);
    }
    return out;
}

}  // namespace turbwig
