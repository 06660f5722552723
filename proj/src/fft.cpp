#include "relstar/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace relstar {

namespace {
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

Fourier::Fourier(int n) : n_(n) {
    if (n < 2) throw std::invalid_argument("Fourier: extent must be >= 2");
    norm_ = 1.0 / std::sqrt(double(size()));
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_complex* bin = fftw_alloc_complex(size());
    fftw_complex* bout = fftw_alloc_complex(size());
    if (!bin || !bout) throw std::bad_alloc();
    // out-of-place plans; FFTW_UNALIGNED makes them valid on any caller
    // buffer via the new-array execute interface
    plan_fwd_ = fftw_plan_dft_3d(n, n, n, bin, bout, FFTW_FORWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    plan_bwd_ = fftw_plan_dft_3d(n, n, n, bin, bout, FFTW_BACKWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(bin);
    fftw_free(bout);
    if (!plan_fwd_ || !plan_bwd_) throw std::runtime_error("Fourier: planning failed");
}

Fourier::~Fourier() {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

void Fourier::forward(const Complex* in, Complex* out) const {
    fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_),
                     reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
    const std::ptrdiff_t m = size();
    for (std::ptrdiff_t i = 0; i < m; ++i) out[i] *= norm_;
}

void Fourier::backward(const Complex* in, Complex* out) const {
    fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_),
                     reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
    const std::ptrdiff_t m = size();
    for (std::ptrdiff_t i = 0; i < m; ++i) out[i] *= norm_;
}

Field Fourier::forward(const Field& in) const {
    Field out(in.size());
    forward(in.data(), out.data());
    return out;
}

Field Fourier::backward(const Field& in) const {
    Field out(in.size());
    backward(in.data(), out.data());
    return out;
}

}  // namespace relstar
