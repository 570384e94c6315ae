#include "tintegrate/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "tintegrate/errors.hpp"
#include "tintegrate/rng.hpp"

namespace ti {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "dataset files are defined little-endian");

long DatasetConfig::n_t() const { return static_cast<long>(std::llround(t_final / dt_save)); }

long DatasetConfig::space() const { return is_3d() ? grid3d.cells() : grid1d.n; }

void DatasetConfig::validate() const {
  if (pde != "burgers1d" && pde != "kdv1d" && pde != "ks1d" && pde != "heat3d")
    throw ConfigError("unknown pde tag: " + pde);
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (dt_save <= 0 || t_final <= 0 || dt_solver <= 0) throw ConfigError("time parameters must be positive");
  if (t_train <= 0 || t_train > t_final) throw ConfigError("t_train must lie in (0, t_final]");
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw ConfigError("train_fraction must lie in (0, 1)");
  if (is_3d())
    grid3d.validate();
  else
    grid1d.validate();
}

json DatasetConfig::to_json() const {
  json j;
  j["pde"] = pde;
  j["n_samples"] = n_samples;
  j["seed"] = seed;
  j["train_fraction"] = train_fraction;
  j["t_final"] = t_final;
  j["dt_save"] = dt_save;
  j["t_train"] = t_train;
  j["dt_solver"] = dt_solver;
  if (is_3d()) {
    j["grid"] = {{"kind", "grid3d"}, {"nx", grid3d.nx}, {"ny", grid3d.ny}, {"nz", grid3d.nz}};
    j["solver"] = {{"alpha", alpha_diff},
                   {"blob_sigma", blob_sigma},
                   {"blob_lo", blob_lo},
                   {"blob_hi", blob_hi}};
  } else {
    j["grid"] = {{"kind", "grid1d"},
                 {"n", grid1d.n},
                 {"length", grid1d.length},
                 {"periodic", grid1d.periodic}};
    if (pde == "burgers1d")
      j["solver"] = {{"nu", nu},
                     {"grf_sigma", grf.sigma},
                     {"grf_tau", grf.tau},
                     {"grf_gamma", grf.gamma},
                     {"grf_family", "spectral"}};
    else if (pde == "kdv1d")
      j["solver"] = {{"eta", eta}, {"gamma", gamma_kdv}};
    else
      j["solver"] = {{"grf_sigma", grf.sigma},
                     {"grf_tau", grf.tau},
                     {"grf_gamma", grf.gamma},
                     {"grf_family", "laplacian"}};
  }
  return j;
}

DatasetConfig DatasetConfig::from_json(const json& j) {
  DatasetConfig c;
  c.pde = j.at("pde").get<std::string>();
  c.n_samples = j.at("n_samples").get<long>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.train_fraction = j.at("train_fraction").get<double>();
  c.t_final = j.at("t_final").get<double>();
  c.dt_save = j.at("dt_save").get<double>();
  c.t_train = j.at("t_train").get<double>();
  c.dt_solver = j.at("dt_solver").get<double>();
  const json& g = j.at("grid");
  if (g.at("kind") == "grid3d") {
    c.grid3d = {g.at("nx").get<long>(), g.at("ny").get<long>(), g.at("nz").get<long>()};
  } else {
    c.grid1d.n = g.at("n").get<long>();
    c.grid1d.length = g.at("length").get<double>();
    c.grid1d.periodic = g.at("periodic").get<bool>();
  }
  const json& s = j.at("solver");
  if (c.pde == "burgers1d") {
    c.nu = s.at("nu").get<double>();
    c.grf.family = GRFSpec::Family::kSpectral1D;
    c.grf.sigma = s.at("grf_sigma").get<double>();
    c.grf.tau = s.at("grf_tau").get<double>();
    c.grf.gamma = s.at("grf_gamma").get<double>();
  } else if (c.pde == "kdv1d") {
    c.eta = s.at("eta").get<double>();
    c.gamma_kdv = s.at("gamma").get<double>();
  } else if (c.pde == "ks1d") {
    c.grf.family = GRFSpec::Family::kLaplacian1D;
    c.grf.sigma = s.at("grf_sigma").get<double>();
    c.grf.tau = s.at("grf_tau").get<double>();
    c.grf.gamma = s.at("grf_gamma").get<double>();
  } else {
    c.alpha_diff = s.at("alpha").get<double>();
    c.blob_sigma = s.at("blob_sigma").get<double>();
    c.blob_lo = s.at("blob_lo").get<double>();
    c.blob_hi = s.at("blob_hi").get<double>();
  }
  return c;
}

DatasetConfig DatasetConfig::defaults(const std::string& pde, bool paper_scale) {
  DatasetConfig c;
  c.pde = pde;
  if (pde == "burgers1d") {
    c.grid1d = {101, 1.0, true};
    c.t_final = 1.0;
    c.dt_save = 0.01;
    c.t_train = 0.5;
    c.dt_solver = 2e-4;
    c.nu = 0.01;
    c.grf = {GRFSpec::Family::kSpectral1D, 25.0, 5.0, 4.0, 0};
    c.n_samples = paper_scale ? 2500 : 250;
  } else if (pde == "kdv1d") {
    c.grid1d = {100, 10.0, true};
    c.t_final = 5.0;
    c.dt_save = 0.025;
    c.t_train = 2.5;
    c.dt_solver = 2.5e-4;
    c.eta = 6.0;
    c.gamma_kdv = 1.0;
    c.n_samples = paper_scale ? 1000 : 125;
  } else if (pde == "ks1d") {
    c.grid1d = {128, 6.0 * 3.14159265358979323846, true};
    c.t_final = 30.0;
    c.dt_save = 0.1;
    c.t_train = 15.0;
    c.dt_solver = 0.1;
    c.grf = {GRFSpec::Family::kLaplacian1D, 1.0, 2.0, 1.0, 0};
    c.n_samples = paper_scale ? 3000 : 125;
  } else if (pde == "heat3d") {
    c.grid3d = paper_scale ? Grid3D{32, 32, 16} : Grid3D{16, 16, 8};
    c.t_final = 1.0;
    c.dt_save = 0.01;
    c.t_train = 0.33;
    c.alpha_diff = 1.0;
    c.blob_sigma = paper_scale ? 4.0 : 2.0;
    c.blob_lo = paper_scale ? 4.0 : 2.0;
    c.blob_hi = paper_scale ? 11.0 : 5.0;
    // largest solver step that divides dt_save and respects the bound
    const double bound = 0.9 * heat3d_stable_dt(c.grid3d, c.alpha_diff);
    const long sub = static_cast<long>(std::ceil(c.dt_save / bound));
    c.dt_solver = c.dt_save / static_cast<double>(sub);
    c.n_samples = paper_scale ? 1000 : 60;
  } else {
    throw ConfigError("unknown pde tag: " + pde);
  }
  return c;
}

long TrajectoryDataset::n_train() const {
  return static_cast<long>(std::floor(config.train_fraction * static_cast<double>(config.n_samples)));
}

long TrajectoryDataset::train_boundary_frame() const {
  return static_cast<long>(std::floor(config.t_train / config.dt_save + 1e-9));
}

Tensor TrajectoryDataset::state(long sample, long frame) const {
  const long sp = space();
  Tensor s({1, sp});
  std::memcpy(s.data(), u.data() + (sample * (n_t() + 1) + frame) * sp,
              sizeof(double) * static_cast<std::size_t>(sp));
  return s;
}

Tensor TrajectoryDataset::states(const std::vector<long>& samples, long frame) const {
  const long sp = space();
  Tensor s({static_cast<long>(samples.size()), sp});
  for (std::size_t i = 0; i < samples.size(); ++i)
    std::memcpy(s.data() + static_cast<long>(i) * sp,
                u.data() + (samples[i] * (n_t() + 1) + frame) * sp,
                sizeof(double) * static_cast<std::size_t>(sp));
  return s;
}

Tensor TrajectoryDataset::space_coords() const {
  if (!config.is_3d()) {
    Tensor c({config.grid1d.n, 1});
    for (long j = 0; j < config.grid1d.n; ++j) c.at(j, 0) = config.grid1d.x(j);
    return c;
  }
  const Grid3D& g = config.grid3d;
  Tensor c({g.cells(), 3});
  for (long i = 0; i < g.nx; ++i)
    for (long j = 0; j < g.ny; ++j)
      for (long k = 0; k < g.nz; ++k) {
        const long idx = g.idx(i, j, k);
        c.at(idx, 0) = g.x(i);
        c.at(idx, 1) = g.y(j);
        c.at(idx, 2) = g.z(k);
      }
  return c;
}

std::vector<long> TrajectoryDataset::active_cells() const {
  std::vector<long> act;
  if (!config.is_3d()) {
    act.resize(static_cast<std::size_t>(space()));
    for (long i = 0; i < space(); ++i) act[static_cast<std::size_t>(i)] = i;
    return act;
  }
  const Grid3D& g = config.grid3d;
  for (long i = 0; i < g.nx; ++i)
    for (long j = 0; j < g.ny; ++j)
      for (long k = 0; k < g.nz; ++k)
        if (!g.masked(i, j)) act.push_back(g.idx(i, j, k));
  return act;
}

TrajectoryDataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  TrajectoryDataset ds;
  ds.config = config;
  const long frames = config.n_t() + 1;
  const long sp = config.space();
  ds.u = Tensor({config.n_samples, frames, sp});
  ds.ic_params.resize(static_cast<std::size_t>(config.n_samples));

  for (long i = 0; i < config.n_samples; ++i) {
    const std::uint64_t ic_seed = derive_seed(config.seed, "ic", static_cast<std::uint64_t>(i));
    Tensor traj;
    try {
      if (config.pde == "burgers1d") {
        GRFSpec g = config.grf;
        g.seed = ic_seed;
        Tensor ic = sample_grf_1d_periodic(g, config.grid1d, 1);
        ds.ic_params[i] = {{"type", "grf"}, {"seed", ic_seed}};
        traj = solve_burgers1d(Tensor({config.grid1d.n}, ic.vec()), config.nu, config.grid1d,
                               config.dt_solver, config.t_final, config.dt_save);
      } else if (config.pde == "kdv1d") {
        SolitonSpec s = sample_soliton_spec(ic_seed);
        s.period = config.grid1d.length;
        ds.ic_params[i] = {{"type", "soliton"}, {"k1", s.k1}, {"k2", s.k2}, {"d1", s.d1}, {"d2", s.d2}};
        traj = solve_kdv1d(soliton_ic(s, config.grid1d), config.eta, config.gamma_kdv,
                           config.grid1d, config.dt_solver, config.t_final, config.dt_save);
      } else if (config.pde == "ks1d") {
        GRFSpec g = config.grf;
        g.seed = ic_seed;
        Tensor ic = sample_grf_1d_periodic(g, config.grid1d, 1);
        ds.ic_params[i] = {{"type", "grf"}, {"seed", ic_seed}};
        traj = solve_ks1d_etdrk4(Tensor({config.grid1d.n}, ic.vec()), config.grid1d,
                                 config.dt_solver, config.t_final, config.dt_save);
      } else {
        BlobSpec3D b = sample_blob_spec(config.grid3d, config.blob_sigma, config.blob_lo,
                                        config.blob_hi, ic_seed);
        ds.ic_params[i] = {{"type", "blob"}, {"amplitude", b.amplitude}, {"xc", b.xc},
                           {"yc", b.yc},    {"zc", b.zc},              {"sigma", b.sigma}};
        traj = solve_heat3d(blob_ic_3d(b, config.grid3d), config.alpha_diff, config.grid3d,
                            config.dt_solver, config.t_final, config.dt_save);
      }
    } catch (const BlowupError& e) {
      throw BlowupError("sample " + std::to_string(i) + ": " + e.what(), e.time, i);
    }
    std::memcpy(ds.u.data() + i * frames * sp, traj.data(),
                sizeof(double) * static_cast<std::size_t>(frames * sp));
  }
  return ds;
}

void save_dataset(const TrajectoryDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json manifest = ds.config.to_json();
  manifest["n_t"] = ds.n_t();
  manifest["dtype"] = "f64";
  manifest["byte_order"] = "little";
  manifest["layout"] = "[sample][time][space]";
  if (ds.config.is_3d())
    manifest["space_shape"] = {ds.config.grid3d.nx, ds.config.grid3d.ny, ds.config.grid3d.nz};
  else
    manifest["space_shape"] = {ds.config.grid1d.n};
  manifest["ic_params"] = ds.ic_params;

  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw MissingInputError("cannot write manifest in " + dir);
  mf << manifest.dump(2) << "\n";
  mf.close();

  std::ofstream bf(fs::path(dir) / "u.bin", std::ios::binary);
  if (!bf) throw MissingInputError("cannot write u.bin in " + dir);
  bf.write(reinterpret_cast<const char*>(ds.u.data()),
           static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(ds.u.numel())));
}

TrajectoryDataset load_dataset(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw MissingInputError("dataset manifest not found in " + dir);
  json manifest = json::parse(mf);

  TrajectoryDataset ds;
  ds.config = DatasetConfig::from_json(manifest);
  for (const json& p : manifest.at("ic_params")) ds.ic_params.push_back(p);

  const long frames = ds.n_t() + 1;
  ds.u = Tensor({ds.config.n_samples, frames, ds.space()});
  std::ifstream bf(fs::path(dir) / "u.bin", std::ios::binary);
  if (!bf) throw MissingInputError("dataset u.bin not found in " + dir);
  bf.read(reinterpret_cast<char*>(ds.u.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(ds.u.numel())));
  if (bf.gcount() != static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(ds.u.numel())))
    throw MissingInputError("u.bin size does not match the manifest in " + dir);
  return ds;
}

}  // namespace ti
