#include <cmath>
#include <complex>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "tintegrate/errors.hpp"
#include "tintegrate/pde.hpp"
#include "fft_util.hpp"

namespace ti {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
using cplx = std::complex<double>;

long save_steps(double t_final, double dt_save) {
  const long n = static_cast<long>(std::llround(t_final / dt_save));
  if (n < 1 || std::abs(n * dt_save - t_final) > 1e-9 * t_final)
    throw ConfigError("dt_save must divide t_final");
  return n;
}

long substeps(double dt_save, double dt_solver) {
  const long n = static_cast<long>(std::llround(dt_save / dt_solver));
  if (n < 1 || std::abs(n * dt_solver - dt_save) > 1e-9 * dt_save)
    throw ConfigError("dt_solver must divide dt_save");
  return n;
}

void check_frame(const double* u, long n, double t, const char* pde) {
  for (long i = 0; i < n; ++i) {
    if (!std::isfinite(u[i]) || std::abs(u[i]) > 1e6)
      throw BlowupError(std::string(pde) + " solution blew up at t=" + std::to_string(t), t, 0);
  }
}

/// Shared pseudo-spectral state: wavenumbers and the 2/3 dealiasing cutoff.
struct SpectralGrid {
  explicit SpectralGrid(const Grid1D& grid) : fft(grid.n) {
    grid.validate();
    if (!grid.periodic) throw std::invalid_argument("spectral solver requires a periodic grid");
    const long modes = fft.modes();
    w.resize(static_cast<std::size_t>(modes));
    keep.resize(static_cast<std::size_t>(modes));
    const long cut = grid.n / 3;
    for (long k = 0; k < modes; ++k) {
      w[k] = kTwoPi * static_cast<double>(k) / grid.length;
      keep[k] = (k <= cut);
    }
  }

  /// Dealiased spectrum of -u u_x = -(u^2/2)_x given physical-space u.
  void advection_term(const std::vector<double>& u, std::vector<cplx>& out) {
    std::vector<double> u2(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) u2[i] = u[i] * u[i];
    out.resize(w.size());
    fft.forward(u2.data(), out.data());
    for (std::size_t k = 0; k < w.size(); ++k)
      out[k] = keep[k] ? cplx(0.0, -0.5 * w[k]) * out[k] : cplx(0.0, 0.0);
  }

  detail::Fft1D fft;
  std::vector<double> w;
  std::vector<char> keep;
};
}  // namespace

Tensor solve_burgers1d(const Tensor& u0, double nu, const Grid1D& grid, double dt_solver,
                       double t_final, double dt_save) {
  if (u0.numel() != grid.n) throw std::invalid_argument("u0 does not match the grid");
  if (nu <= 0.0) throw ConfigError("burgers viscosity must be positive");
  SpectralGrid sg(grid);
  const long n_save = save_steps(t_final, dt_save);
  const long n_sub = substeps(dt_save, dt_solver);

  const double w_cut = sg.w[static_cast<std::size_t>(grid.n / 3)];
  if (dt_solver * std::max(u0.max_abs(), 1e-12) * w_cut > 2.0)
    throw ConfigError("dt_solver violates the advective CFL bound for this IC");

  const long modes = sg.fft.modes();
  std::vector<double> e_full(modes), e_half(modes);
  for (long k = 0; k < modes; ++k) {
    const double lk = -nu * sg.w[k] * sg.w[k];
    e_full[k] = std::exp(lk * dt_solver);
    e_half[k] = std::exp(lk * dt_solver / 2.0);
  }

  std::vector<cplx> v(modes), v2(modes), v3(modes), v4(modes), n1(modes), n2(modes), n3(modes),
      n4(modes);
  std::vector<double> u(grid.n);
  sg.fft.forward(u0.data(), v.data());

  Tensor traj({n_save + 1, grid.n});
  std::memcpy(traj.data(), u0.data(), sizeof(double) * static_cast<std::size_t>(grid.n));

  auto nonlinear = [&](const std::vector<cplx>& spec, std::vector<cplx>& out) {
    sg.fft.inverse(spec.data(), u.data());
    sg.advection_term(u, out);
  };

  for (long s = 0; s < n_save; ++s) {
    for (long q = 0; q < n_sub; ++q) {
      const double h = dt_solver;
      nonlinear(v, n1);
      for (long k = 0; k < modes; ++k) v2[k] = e_half[k] * (v[k] + 0.5 * h * n1[k]);
      nonlinear(v2, n2);
      for (long k = 0; k < modes; ++k) v3[k] = e_half[k] * v[k] + 0.5 * h * n2[k];
      nonlinear(v3, n3);
      for (long k = 0; k < modes; ++k) v4[k] = e_full[k] * v[k] + h * e_half[k] * n3[k];
      nonlinear(v4, n4);
      for (long k = 0; k < modes; ++k)
        v[k] = e_full[k] * v[k] +
               (h / 6.0) * (e_full[k] * n1[k] + 2.0 * e_half[k] * (n2[k] + n3[k]) + n4[k]);
    }
    sg.fft.inverse(v.data(), traj.data() + (s + 1) * grid.n);
    check_frame(traj.data() + (s + 1) * grid.n, grid.n, (s + 1) * dt_save, "burgers1d");
  }
  return traj;
}

Tensor solve_kdv1d(const Tensor& u0, double eta, double gamma, const Grid1D& grid,
                   double dt_solver, double t_final, double dt_save) {
  if (u0.numel() != grid.n) throw std::invalid_argument("u0 does not match the grid");
  SpectralGrid sg(grid);
  const long n_save = save_steps(t_final, dt_save);
  const long n_sub = substeps(dt_save, dt_solver);

  const long modes = sg.fft.modes();
  // u_t = -eta u u_x - gamma u_xxx: dispersion symbol i gamma w^3 handled by
  // an integrating factor, the advection term stepped by explicit midpoint.
  std::vector<cplx> tau_half(modes);
  for (long k = 0; k < modes; ++k) {
    const double phase = gamma * sg.w[k] * sg.w[k] * sg.w[k] * dt_solver / 2.0;
    tau_half[k] = cplx(std::cos(phase), std::sin(phase));
  }

  std::vector<cplx> v(modes), vm(modes), n1(modes), n2(modes);
  std::vector<double> u(grid.n);
  sg.fft.forward(u0.data(), v.data());

  Tensor traj({n_save + 1, grid.n});
  std::memcpy(traj.data(), u0.data(), sizeof(double) * static_cast<std::size_t>(grid.n));

  auto nonlinear = [&](const std::vector<cplx>& spec, std::vector<cplx>& out) {
    sg.fft.inverse(spec.data(), u.data());
    sg.advection_term(u, out);
    for (long k = 0; k < modes; ++k) out[k] *= eta;
  };

  for (long s = 0; s < n_save; ++s) {
    for (long q = 0; q < n_sub; ++q) {
      const double h = dt_solver;
      nonlinear(v, n1);
      for (long k = 0; k < modes; ++k) vm[k] = tau_half[k] * (v[k] + 0.5 * h * n1[k]);
      nonlinear(vm, n2);
      for (long k = 0; k < modes; ++k) v[k] = tau_half[k] * (tau_half[k] * v[k] + h * n2[k]);
    }
    sg.fft.inverse(v.data(), traj.data() + (s + 1) * grid.n);
    check_frame(traj.data() + (s + 1) * grid.n, grid.n, (s + 1) * dt_save, "kdv1d");
  }
  return traj;
}

Tensor solve_ks1d_etdrk4(const Tensor& u0, const Grid1D& grid, double dt_solver, double t_final,
                         double dt_save) {
  if (u0.numel() != grid.n) throw std::invalid_argument("u0 does not match the grid");
  SpectralGrid sg(grid);
  const long n_save = save_steps(t_final, dt_save);
  const long n_sub = substeps(dt_save, dt_solver);
  const long modes = sg.fft.modes();

  // phi-functions of dt*(w^2 - w^4) by 32-point contour quadrature on a unit
  // circle around each eigenvalue (Kassam & Trefethen construction).
  const int M = 32;
  std::vector<double> e_full(modes), e_half(modes), q(modes), f1(modes), f2(modes), f3(modes);
  for (long k = 0; k < modes; ++k) {
    const double w2 = sg.w[k] * sg.w[k];
    const double lk = w2 - w2 * w2;
    const double z = dt_solver * lk;
    e_full[k] = std::exp(z);
    e_half[k] = std::exp(z / 2.0);
    cplx sq = 0, s1 = 0, s2 = 0, s3 = 0;
    for (int m = 1; m <= M; ++m) {
      const double th = 3.14159265358979323846 * (m - 0.5) / M;
      const cplx lr = z + cplx(std::cos(th), std::sin(th));
      const cplx elr = std::exp(lr);
      const cplx lr3 = lr * lr * lr;
      sq += (std::exp(lr / 2.0) - 1.0) / lr;
      s1 += (-4.0 - lr + elr * (4.0 - 3.0 * lr + lr * lr)) / lr3;
      s2 += (2.0 + lr + elr * (-2.0 + lr)) / lr3;
      s3 += (-4.0 - 3.0 * lr - lr * lr + elr * (4.0 - lr)) / lr3;
    }
    q[k] = dt_solver * sq.real() / M;
    f1[k] = dt_solver * s1.real() / M;
    f2[k] = dt_solver * s2.real() / M;
    f3[k] = dt_solver * s3.real() / M;
  }

  std::vector<cplx> v(modes), a(modes), b(modes), c(modes), nv(modes), na(modes), nb(modes),
      nc(modes);
  std::vector<double> u(grid.n);
  sg.fft.forward(u0.data(), v.data());

  Tensor traj({n_save + 1, grid.n});
  std::memcpy(traj.data(), u0.data(), sizeof(double) * static_cast<std::size_t>(grid.n));

  auto nonlinear = [&](const std::vector<cplx>& spec, std::vector<cplx>& out) {
    sg.fft.inverse(spec.data(), u.data());
    sg.advection_term(u, out);
  };

  for (long s = 0; s < n_save; ++s) {
    for (long sub = 0; sub < n_sub; ++sub) {
      nonlinear(v, nv);
      for (long k = 0; k < modes; ++k) a[k] = e_half[k] * v[k] + q[k] * nv[k];
      nonlinear(a, na);
      for (long k = 0; k < modes; ++k) b[k] = e_half[k] * v[k] + q[k] * na[k];
      nonlinear(b, nb);
      for (long k = 0; k < modes; ++k) c[k] = e_half[k] * a[k] + q[k] * (2.0 * nb[k] - nv[k]);
      nonlinear(c, nc);
      for (long k = 0; k < modes; ++k)
        v[k] = e_full[k] * v[k] + f1[k] * nv[k] + 2.0 * f2[k] * (na[k] + nb[k]) + f3[k] * nc[k];
    }
    sg.fft.inverse(v.data(), traj.data() + (s + 1) * grid.n);
    check_frame(traj.data() + (s + 1) * grid.n, grid.n, (s + 1) * dt_save, "ks1d");
  }
  return traj;
}

double heat3d_stable_dt(const Grid3D& grid, double alpha) {
  grid.validate();
  const double s = 1.0 / (grid.dx() * grid.dx()) + 1.0 / (grid.dy() * grid.dy()) +
                   1.0 / (grid.dz() * grid.dz());
  return 1.0 / (2.0 * alpha * s);
}

Tensor solve_heat3d(const Tensor& t0, double alpha, const Grid3D& grid, double dt_solver,
                    double t_final, double dt_save) {
  grid.validate();
  if (t0.numel() != grid.cells()) throw std::invalid_argument("T0 does not match the grid");
  const double bound = heat3d_stable_dt(grid, alpha);
  if (dt_solver > bound * (1.0 + 1e-12))
    throw ConfigError("heat3d dt_solver " + std::to_string(dt_solver) +
                      " violates the von Neumann bound; required dt <= " + std::to_string(bound));
  const long n_save = save_steps(t_final, dt_save);
  const long n_sub = substeps(dt_save, dt_solver);

  const double cx = alpha * dt_solver / (grid.dx() * grid.dx());
  const double cy = alpha * dt_solver / (grid.dy() * grid.dy());
  const double cz = alpha * dt_solver / (grid.dz() * grid.dz());

  std::vector<double> cur(t0.vec());
  // Masked and boundary cells stay exactly zero (Dirichlet on every face).
  for (long i = 0; i < grid.nx; ++i)
    for (long j = 0; j < grid.ny; ++j)
      for (long k = 0; k < grid.nz; ++k)
        if (!grid.interior(i, j, k)) cur[static_cast<std::size_t>(grid.idx(i, j, k))] = 0.0;

  std::vector<double> nxt(cur.size(), 0.0);
  Tensor traj({n_save + 1, grid.cells()});
  std::memcpy(traj.data(), cur.data(), sizeof(double) * cur.size());

  const long sy = grid.nz;
  const long sx = grid.ny * grid.nz;
  for (long s = 0; s < n_save; ++s) {
    for (long sub = 0; sub < n_sub; ++sub) {
      for (long i = 1; i < grid.nx - 1; ++i)
        for (long j = 1; j < grid.ny - 1; ++j) {
          if (grid.masked(i, j)) continue;
          const long base = grid.idx(i, j, 0);
          for (long k = 1; k < grid.nz - 1; ++k) {
            const long c = base + k;
            nxt[c] = cur[c] + cx * (cur[c + sx] - 2.0 * cur[c] + cur[c - sx]) +
                     cy * (cur[c + sy] - 2.0 * cur[c] + cur[c - sy]) +
                     cz * (cur[c + 1] - 2.0 * cur[c] + cur[c - 1]);
          }
        }
      std::swap(cur, nxt);
    }
    std::memcpy(traj.data() + (s + 1) * grid.cells(), cur.data(), sizeof(double) * cur.size());
    check_frame(traj.data() + (s + 1) * grid.cells(), grid.cells(), (s + 1) * dt_save, "heat3d");
  }
  return traj;
}

}  // namespace ti
