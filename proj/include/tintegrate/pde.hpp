#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tintegrate/tensor.hpp"

namespace ti {

struct Grid1D {
  long n = 0;
  double length = 1.0;
  bool periodic = true;

  double dx() const { return periodic ? length / n : length / (n - 1); }
  double x(long j) const { return static_cast<double>(j) * dx(); }
  void validate() const;
};

/// Unit-cube grid with the upper-right XY quadrant removed (cells whose
/// center has x >= 1/2 and y >= 1/2), L-shaped cross-section extruded in z.
struct Grid3D {
  long nx = 0, ny = 0, nz = 0;

  double dx() const { return 1.0 / (nx - 1); }
  double dy() const { return 1.0 / (ny - 1); }
  double dz() const { return 1.0 / (nz - 1); }
  double x(long i) const { return i * dx(); }
  double y(long j) const { return j * dy(); }
  double z(long k) const { return k * dz(); }
  long cells() const { return nx * ny * nz; }
  long idx(long i, long j, long k) const { return (i * ny + j) * nz + k; }

  bool masked(long i, long j) const { return x(i) >= 0.5 && y(j) >= 0.5; }
  /// Interior unmasked cell, i.e. updated by the explicit stencil.
  bool interior(long i, long j, long k) const {
    return i > 0 && i < nx - 1 && j > 0 && j < ny - 1 && k > 0 && k < nz - 1 && !masked(i, j);
  }
  void validate() const;
};

struct GRFSpec {
  enum class Family { kSpectral1D, kLaplacian1D };
  Family family = Family::kSpectral1D;
  double sigma = 1.0, tau = 1.0, gamma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Spectral synthesis of periodic Gaussian random fields, [count x n].
///
/// Fourier coefficients are independent complex Gaussians scaled by
/// sqrt(S(k)) with S(k) = sigma^2 (tau^2 + (2 pi k/L)^2)^(-gamma) for the
/// spectral family, or by sigma (lambda_k + tau^2)^(-gamma/2) with
/// lambda_k = (2 pi k/L)^2 for the Laplacian covariance family (whose k = 0
/// coefficient is zeroed, making the fields mean-zero).
Tensor sample_grf_1d_periodic(const GRFSpec& spec, const Grid1D& grid, long count);

struct SolitonSpec {
  double k1 = 0.5, k2 = 0.5;
  double d1 = 0.25, d2 = 0.75;
  double period = 10.0;
};

/// One periodic soliton profile 2k^2 sech^2(k(((x + P/2 - P d) mod P) - P/2)).
Tensor soliton_wave(double k, double d, const Grid1D& grid);
/// Sum of the spec's two solitons. Requires grid.length == spec.period.
Tensor soliton_ic(const SolitonSpec& spec, const Grid1D& grid);
/// Uniform draw with k in [0.3, 0.7] and d in [0, 1].
SolitonSpec sample_soliton_spec(std::uint64_t seed);

struct BlobSpec3D {
  double amplitude = 1.0;
  double xc = 0, yc = 0, zc = 0;  // grid-index coordinates
  double sigma = 4.0;             // grid points
};

/// Gaussian blob IC on the active part of the L-shaped grid (zero on masked
/// cells), isotropic in index space.
Tensor blob_ic_3d(const BlobSpec3D& spec, const Grid3D& grid);
/// Amplitude uniform in [0,1], center uniform in [lo, hi]^3 (index space,
/// cropped so the margin to every face is at least sigma).
BlobSpec3D sample_blob_spec(const Grid3D& grid, double sigma, double lo, double hi,
                            std::uint64_t seed);

// ---- reference solvers; all return [(n_saves + 1) x space] with frame 0 = IC

/// Viscous Burgers u_t + u u_x = nu u_xx, periodic. Pseudo-spectral with 2/3
/// dealiasing, diffusion via integrating factor, RK4 in time.
Tensor solve_burgers1d(const Tensor& u0, double nu, const Grid1D& grid, double dt_solver,
                       double t_final, double dt_save);

/// KdV u_t + eta u u_x + gamma u_xxx = 0, periodic. Pseudo-spectral with the
/// dispersive term handled by an integrating factor, midpoint in time. With
/// eta=6, gamma=1 the profile 2k^2 sech^2(k(x - 4k^2 t)) is an exact solution.
Tensor solve_kdv1d(const Tensor& u0, double eta, double gamma, const Grid1D& grid,
                   double dt_solver, double t_final, double dt_save);

/// Kuramoto-Sivashinsky u_t = -u u_x - u_xx - u_xxxx, periodic. ETDRK4 with
/// the phi-functions evaluated by 32-point contour quadrature on a unit
/// circle around each eigenvalue of dt*(k^2 - k^4).
Tensor solve_ks1d_etdrk4(const Tensor& u0, const Grid1D& grid, double dt_solver, double t_final,
                         double dt_save);

/// Largest stable explicit step 1 / (2 alpha (1/dx^2 + 1/dy^2 + 1/dz^2)).
double heat3d_stable_dt(const Grid3D& grid, double alpha);

/// Heat equation on the L-shaped block, 7-point CD2 Laplacian, explicit
/// stepping; Dirichlet T = 0 on every face, masked cells held at zero.
/// Rejects dt_solver above the von Neumann bound.
Tensor solve_heat3d(const Tensor& t0, double alpha, const Grid3D& grid, double dt_solver,
                    double t_final, double dt_save);

}  // namespace ti
