#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "turbwig/common.hpp"
#include "turbwig/quad.hpp"

namespace turbwig {

// Spectral density of the refractive-index fluctuation field over the full
// (d+1)-dimensional wavevector (xi, k): xi conjugate to the propagation axis,
// k to the d transverse axes.
//
// Built-in forms:
//   VonKarman       amplitude * c(H,d) * eta^{2H} (eta^2+|kvec|^2)^{-H-(d+1)/2} * uv
//                   normalized so the field variance equals `amplitude`
//                   (H = 1/2, eta = 1, rho = inf gives covariance e^{-r});
//                   requires eta > 0.
//   PowerLawBounded amplitude * (eta^2+|kvec|^2)^{-H-(d+1)/2} * uv, raw
//                   amplitude, eta >= 0 allowed (pure inertial power law).
//   Custom          caller-supplied density with declared properties.
// uv is the ultraviolet roll-off (1 + |kvec|^2/rho^2)^{-2}; rho may be inf.
enum class SpectrumForm { VonKarman, PowerLawBounded, Custom };

struct CustomSpectrum {
    // Density over (xi, k_1..k_d); must be even in every argument and >= 0.
    std::function<double(const double*, int)> density;
    bool isotropic = false;
    // Declared integrability of the transverse moments (2*pi*Phi(0,q) dq and
    // |q|^2-weighted), since they cannot be decided numerically.
    bool zeroth_moment_finite = false;
    bool second_moment_finite = false;
    bool wm_damping_finite = false;
    double bound_constant = 0.0;  // K in the power-law envelope check
    std::string label = "custom";
};

class SpectrumModel {
public:
    static SpectrumModel von_karman(int dim, double hurst, double eta, double rho,
                                    double amplitude);
    static SpectrumModel power_law_bounded(int dim, double hurst, double eta,
                                           double rho, double amplitude);
    static SpectrumModel custom(int dim, double hurst, double eta, double rho,
                                double amplitude, CustomSpectrum spec);

    SpectrumForm form() const { return form_; }
    int dim() const { return dim_; }
    double hurst() const { return hurst_; }
    double eta() const { return eta_; }
    double rho() const { return rho_; }
    double amplitude() const { return amplitude_; }
    bool isotropic() const;

    // Density at full wavevector (xi, k[0..d-1]).
    double eval(double xi, const double* k) const;
    // Isotropic forms as a function of |kvec|.
    double eval_radial(double s) const;

    // K such that Phi <= K (eta^2+|kvec|^2)^{-H-(d+1)/2} (1+|k|^2/rho^2)^{-2}.
    double bound_constant() const;

    // Integrability of the transverse moments that gate the limit models.
    bool zeroth_moment_finite() const;   // \int 2pi Phi(0,q) dq
    bool second_moment_finite() const;   // \int 2pi Phi(0,q) |q|^2 dq
    bool wm_damping_finite() const;      // \int 2pi Phi(0,q)(1-cos(..)) dq

    std::string config_block() const;
    static SpectrumModel from_config_block(const std::string& text);
    std::uint64_t hash() const { return fnv1a64(config_block()); }

    const CustomSpectrum& custom_spec() const;

private:
    SpectrumModel() = default;
    SpectrumForm form_ = SpectrumForm::VonKarman;
    int dim_ = 1;
    double hurst_ = 0.5, eta_ = 1.0, rho_ = 0.0, amplitude_ = 1.0;
    std::shared_ptr<CustomSpectrum> custom_;
    void validate() const;
};

// Density at a full (d+1)-dimensional wavevector.
double eval_spectrum(const SpectrumModel& m, const std::vector<double>& kvec);

// Effective transverse spectral density 2*pi*Phi(0, q): the longitudinal
// integral of the covariance, i.e. the density driving every white-noise
// object below. For rho = inf this is the pointwise-limit density.
double transverse_spectrum(const SpectrumModel& m, const std::vector<double>& q);

// Covariance B(xvec) = \int e^{i kvec.xvec} Phi dkvec over the full space.
// Closed Bessel form for VonKarman with rho = inf, quadrature otherwise.
double covariance_function(const SpectrumModel& m, const std::vector<double>& xvec);

// Isotropic structure function D(r) = 2(B(0) - B(r)) via the radial integral
// 2 \int Phi(k) [Omega_n - S_n(kr)] k^{n-1} dk, n = d+1.
double structure_function(const SpectrumModel& m, double r);

// Transverse moments of 2*pi*Phi(0,.): m0 = \int Phi_eff dq and
// m2 = \int Phi_eff |q|^2 dq. Throw with the failed condition when divergent.
double transverse_moment0(const SpectrumModel& m);
double transverse_moment2(const SpectrumModel& m);

// Momentum-diffusion tensor D(x) = \int e^{iq.x} Phi_eff(q) q (x) q dq and the
// scalar transverse covariance C(x) = \int e^{iq.x} Phi_eff(q) dq. Tabulated
// radially once so SDE stepping and grid solvers can evaluate in O(log n).
class DiffusionTensor {
public:
    DiffusionTensor(const SpectrumModel& m, double rmax, double tol = 1e-9);

    int dim() const { return dim_; }
    double rmax() const;
    double trace0() const { return trace0_; }          // tr D(0)
    std::vector<double> at0() const;                   // D(0), row-major d x d
    std::vector<double> at(const std::vector<double>& x) const;  // D(x)
    // Longitudinal/transverse profiles (isotropic decomposition).
    double longitudinal(double r) const;
    double transverse(double r) const;

private:
    int dim_;
    double trace0_;
    std::unique_ptr<EvenTable> dl_, dt_;
};

// Transverse covariance C(s) on [0, smax] (isotropic radial profile).
EvenTable transverse_covariance_table(const SpectrumModel& m, double smax,
                                      double tol = 1e-9);
double transverse_covariance(const SpectrumModel& m, double s);

}  // namespace turbwig
