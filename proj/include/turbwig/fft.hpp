#pragma once

#include <cstddef>
#include <vector>

#include "turbwig/common.hpp"

namespace turbwig::fft {

// Unnormalized c2c DFT: sign=-1 computes sum_j f_j e^{-2pi i jk/n} per axis,
// sign=+1 the conjugate sum. Backed by FFTW with deterministic (estimate-only,
// unaligned) plans shared through a mutex-guarded cache, so results are
// identical run-to-run and thread-count independent. in == out is allowed.
void c2c(const std::vector<std::size_t>& dims, const cplx* in, cplx* out, int sign);

inline void c2c_1d(std::size_t n, const cplx* in, cplx* out, int sign) {
    c2c({n}, in, out, sign);
}

}  // namespace turbwig::fft
