#include "turbwig/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace turbwig::fft {

namespace {

// Plans are created once per (dims, sign, placement) with FFTW_ESTIMATE so the
// chosen algorithm depends only on the transform shape, never on timing, and
// FFTW_UNALIGNED so the same plan executes on any caller buffer.
class PlanCache {
public:
    fftw_plan get(const std::vector<std::size_t>& dims, int sign, bool inplace) {
        const Key key{dims, sign, inplace};
        std::lock_guard<std::mutex> lk(mu_);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;

        std::size_t total = 1;
        std::vector<int> n;
        n.reserve(dims.size());
        for (std::size_t d : dims) {
            require(d > 0, "fft: zero-length axis");
            n.push_back(static_cast<int>(d));
            total *= d;
        }
        fftw_complex* a = fftw_alloc_complex(total);
        fftw_complex* b = inplace ? a : fftw_alloc_complex(total);
        fftw_plan p = fftw_plan_dft(static_cast<int>(n.size()), n.data(), a, b, sign,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!inplace) fftw_free(b);
        fftw_free(a);
        require_runtime(p != nullptr, "fft: plan creation failed");
        plans_.emplace(key, p);
        return p;
    }

private:
    using Key = std::tuple<std::vector<std::size_t>, int, bool>;
    std::mutex mu_;
    std::map<Key, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

}  // namespace

void c2c(const std::vector<std::size_t>& dims, const cplx* in, cplx* out, int sign) {
    require(sign == 1 || sign == -1, "fft: sign must be +1 or -1");
    fftw_plan p = cache().get(dims, sign == -1 ? FFTW_FORWARD : FFTW_BACKWARD,
                              in == out);
    // fftw_execute_dft is safe to call concurrently on distinct buffers.
    fftw_execute_dft(p,
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

}  // namespace turbwig::fft
