#include <cmath>
#include <complex>
#include <stdexcept>

#include "tintegrate/pde.hpp"
#include "tintegrate/rng.hpp"
#include "fft_util.hpp"

namespace ti {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

void Grid1D::validate() const {
  if (n < 8) throw std::invalid_argument("Grid1D needs at least 8 points");
  if (length <= 0.0) throw std::invalid_argument("Grid1D length must be positive");
}

void Grid3D::validate() const {
  if (nx < 4 || ny < 4 || nz < 4) throw std::invalid_argument("Grid3D needs at least 4^3 cells");
}

void GRFSpec::validate() const {
  if (sigma <= 0 || tau <= 0 || gamma <= 0)
    throw std::invalid_argument("GRF parameters sigma, tau, gamma must be positive");
}

Tensor sample_grf_1d_periodic(const GRFSpec& spec, const Grid1D& grid, long count) {
  spec.validate();
  grid.validate();
  if (!grid.periodic) throw std::invalid_argument("GRF sampling requires a periodic grid");
  if (count < 1) throw std::invalid_argument("GRF sample count must be >= 1");

  const long n = grid.n;
  const long half = n / 2;
  const bool has_nyquist = (n % 2 == 0);

  // Coefficient standard deviation per mode k (in forward-FFT/n units).
  std::vector<double> std_k(static_cast<std::size_t>(half) + 1, 0.0);
  for (long k = 0; k <= half; ++k) {
    const double w = kTwoPi * static_cast<double>(k) / grid.length;
    if (spec.family == GRFSpec::Family::kSpectral1D) {
      std_k[k] = spec.sigma * std::pow(spec.tau * spec.tau + w * w, -spec.gamma / 2.0);
    } else {
      if (k == 0) continue;  // mean-zero: zero the constant mode
      std_k[k] = spec.sigma * std::pow(w * w + spec.tau * spec.tau, -spec.gamma / 2.0);
    }
  }

  detail::Fft1D fft(n);
  std::vector<std::complex<double>> coef(static_cast<std::size_t>(fft.modes()));
  Tensor out({count, n});
  Rng rng(spec.seed);
  const double inv_sqrt2 = 0.70710678118654752440;
  for (long s = 0; s < count; ++s) {
    coef[0] = {spec.family == GRFSpec::Family::kSpectral1D ? std_k[0] * rng.normal() : 0.0, 0.0};
    for (long k = 1; k <= half; ++k) {
      if (has_nyquist && k == half) {
        coef[k] = {std_k[k] * rng.normal(), 0.0};  // Nyquist coefficient is real
      } else {
        coef[k] = {std_k[k] * inv_sqrt2 * rng.normal(), std_k[k] * inv_sqrt2 * rng.normal()};
      }
    }
    fft.synthesize(coef.data(), out.data() + s * n);
  }
  return out;
}

Tensor soliton_wave(double k, double d, const Grid1D& grid) {
  grid.validate();
  const double P = grid.length;
  Tensor u({grid.n});
  for (long j = 0; j < grid.n; ++j) {
    double v = std::fmod(grid.x(j) + P / 2.0 - P * d, P);
    if (v < 0.0) v += P;
    const double arg = k * (v - P / 2.0);
    const double sech = 1.0 / std::cosh(arg);
    u.at(j) = 2.0 * k * k * sech * sech;
  }
  return u;
}

Tensor soliton_ic(const SolitonSpec& spec, const Grid1D& grid) {
  if (std::abs(grid.length - spec.period) > 1e-12)
    throw std::invalid_argument("soliton period must equal the grid length");
  Tensor u = soliton_wave(spec.k1, spec.d1, grid);
  Tensor u2 = soliton_wave(spec.k2, spec.d2, grid);
  axpy(u, 1.0, u2);
  return u;
}

SolitonSpec sample_soliton_spec(std::uint64_t seed) {
  Rng rng(seed);
  SolitonSpec s;
  s.k1 = rng.uniform(0.3, 0.7);
  s.k2 = rng.uniform(0.3, 0.7);
  s.d1 = rng.uniform(0.0, 1.0);
  s.d2 = rng.uniform(0.0, 1.0);
  return s;
}

Tensor blob_ic_3d(const BlobSpec3D& spec, const Grid3D& grid) {
  grid.validate();
  Tensor t0 = Tensor::zeros({grid.nx, grid.ny, grid.nz});
  const double s2 = 2.0 * spec.sigma * spec.sigma;
  for (long i = 0; i < grid.nx; ++i)
    for (long j = 0; j < grid.ny; ++j) {
      if (grid.masked(i, j)) continue;
      for (long k = 0; k < grid.nz; ++k) {
        const double r2 = (i - spec.xc) * (i - spec.xc) + (j - spec.yc) * (j - spec.yc) +
                          (k - spec.zc) * (k - spec.zc);
        t0.at(grid.idx(i, j, k)) = spec.amplitude * std::exp(-r2 / s2);
      }
    }
  return t0;
}

BlobSpec3D sample_blob_spec(const Grid3D& grid, double sigma, double lo, double hi,
                            std::uint64_t seed) {
  grid.validate();
  if (lo < sigma) throw std::invalid_argument("blob center range violates the sigma margin");
  // The center must stay a sigma away from every face of the L, including the
  // internal faces at the removed quadrant (x,y index nx/2, ny/2).
  const double hix = std::min(hi, static_cast<double>(grid.nx) / 2.0 - 1.0 - sigma);
  const double hiy = std::min(hi, static_cast<double>(grid.ny) / 2.0 - 1.0 - sigma);
  const double hiz = std::min(hi, static_cast<double>(grid.nz) - 1.0 - sigma);
  if (hix < lo || hiy < lo || hiz < lo)
    throw std::invalid_argument("blob center range is empty for this grid");
  Rng rng(seed);
  BlobSpec3D b;
  b.sigma = sigma;
  b.amplitude = rng.uniform(0.0, 1.0);
  b.xc = rng.uniform(lo, hix);
  b.yc = rng.uniform(lo, hiy);
  b.zc = rng.uniform(lo, hiz);
  return b;
}

}  // namespace ti
