#pragma once

#include <complex>
#include <Eigen/Dense>

namespace relstar {

using Complex = std::complex<double>;
using Field = Eigen::VectorXcd;
using RealField = Eigen::VectorXd;

// Unitary 3-d DFT on an n^3 cube, x index fastest.  Both directions carry a
// 1/n^(3/2) factor so that round trips are exact up to round-off and plain
// l2 sums of squares are preserved (Parseval).  Plans are created with
// FFTW_ESTIMATE so repeated runs pick the same algorithm; execution is
// thread-safe on distinct buffers, planning is serialized internally.
class Fourier {
  public:
    explicit Fourier(int n);
    ~Fourier();
    Fourier(const Fourier&) = delete;
    Fourier& operator=(const Fourier&) = delete;

    int extent() const { return n_; }
    std::ptrdiff_t size() const { return std::ptrdiff_t(n_) * n_ * n_; }

    // out-of-place transforms; in and out must not alias
    void forward(const Complex* in, Complex* out) const;
    void backward(const Complex* in, Complex* out) const;

    Field forward(const Field& in) const;
    Field backward(const Field& in) const;

  private:
    int n_;
    void* plan_fwd_;
    void* plan_bwd_;
    double norm_;
};

}  // namespace relstar
