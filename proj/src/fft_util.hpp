#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

namespace ti::detail {

inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

/// Real 1-D transform pair of fixed size. FFTW conventions: forward r2c is
/// unnormalized, inverse() divides by n. Each instance owns its buffers, so
/// separate instances may run on separate threads; plan creation/destruction
/// is serialized (FFTW requirement).
class Fft1D {
 public:
  explicit Fft1D(long n) : n_(n) {
    rbuf_ = fftw_alloc_real(static_cast<std::size_t>(n));
    cbuf_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), rbuf_, cbuf_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), cbuf_, rbuf_, FFTW_ESTIMATE);
  }
  ~Fft1D() {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(rbuf_);
    fftw_free(cbuf_);
  }
  Fft1D(const Fft1D&) = delete;
  Fft1D& operator=(const Fft1D&) = delete;

  long n() const { return n_; }
  long modes() const { return n_ / 2 + 1; }

  void forward(const double* in, std::complex<double>* out) {
    for (long i = 0; i < n_; ++i) rbuf_[i] = in[i];
    fftw_execute(fwd_);
    for (long k = 0; k < modes(); ++k) out[k] = {cbuf_[k][0], cbuf_[k][1]};
  }

  void inverse(const std::complex<double>* in, double* out) {
    for (long k = 0; k < modes(); ++k) {
      cbuf_[k][0] = in[k].real();
      cbuf_[k][1] = in[k].imag();
    }
    fftw_execute(inv_);
    const double scale = 1.0 / static_cast<double>(n_);
    for (long i = 0; i < n_; ++i) out[i] = rbuf_[i] * scale;
  }

  /// Hermitian synthesis u_j = sum_k c_k exp(2 pi i j k / n) without the 1/n
  /// factor, i.e. coefficients in forward-transform-over-n units.
  void synthesize(const std::complex<double>* in, double* out) {
    for (long k = 0; k < modes(); ++k) {
      cbuf_[k][0] = in[k].real();
      cbuf_[k][1] = in[k].imag();
    }
    fftw_execute(inv_);
    for (long i = 0; i < n_; ++i) out[i] = rbuf_[i];
  }

 private:
  long n_;
  double* rbuf_;
  fftw_complex* cbuf_;
  fftw_plan fwd_, inv_;
};

}  // namespace ti::detail
