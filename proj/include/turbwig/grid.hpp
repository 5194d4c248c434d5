#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "turbwig/common.hpp"

namespace turbwig {

// Uniform periodic transverse grid: `dim` axes of `n` points each, spacing
// `dx`, box centered on the origin (x_j = (j - n/2) dx, so index 0 sits at
// -L/2). Fourier bins carry the usual signed wavenumbers 2*pi*m/L.
struct TransverseGrid {
    int dim = 1;
    std::size_t n = 0;
    double dx = 0.0;

    TransverseGrid() = default;
    TransverseGrid(int dim_, std::size_t n_, double dx_) : dim(dim_), n(n_), dx(dx_) {
        require(dim >= 1 && dim <= 3, "grid: dim must be 1..3");
        require(n >= 2 && n % 2 == 0, "grid: need an even point count >= 2");
        require(dx > 0.0 && std::isfinite(dx), "grid: dx must be positive");
    }

    double length() const { return static_cast<double>(n) * dx; }
    std::size_t points() const {
        std::size_t t = 1;
        for (int a = 0; a < dim; ++a) t *= n;
        return t;
    }
    double cell_volume() const { return std::pow(dx, dim); }

    double coord(std::size_t i) const {
        return (static_cast<double>(i) - static_cast<double>(n / 2)) * dx;
    }
    double wavenumber(std::size_t i) const {
        return 2.0 * M_PI * static_cast<double>(fft_signed_index(i, n)) / length();
    }
    double nyquist() const { return M_PI / dx; }

    // Decompose/compose flat row-major indices over the dim axes.
    void unflatten(std::size_t flat, std::size_t* idx) const {
        for (int a = dim - 1; a >= 0; --a) {
            idx[a] = flat % n;
            flat /= n;
        }
    }
    std::size_t flatten(const std::size_t* idx) const {
        std::size_t f = 0;
        for (int a = 0; a < dim; ++a) f = f * n + idx[a];
        return f;
    }

    bool operator==(const TransverseGrid& o) const {
        return dim == o.dim && n == o.n && dx == o.dx;
    }
};

}  // namespace turbwig
