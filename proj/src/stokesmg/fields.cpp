#include "fields.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace stokesmg {

void StokesVector::set_zero() {
  std::fill(u.data.begin(), u.data.end(), 0.0);
  std::fill(p.data.begin(), p.data.end(), 0.0);
}

StokesVector make_stokes_vector(const GridLevel& level) {
  StokesVector x;
  x.u.level = x.p.level = level.level;
  x.u.data.assign(3 * level.n_nodes(), 0.0);
  x.p.data.assign(level.n_nodes(), 0.0);
  return x;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  STOKESMG_REQUIRE(x.size() == y.size(), NumericsError, "axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void axpy(double alpha, const StokesVector& x, StokesVector& y) {
  STOKESMG_REQUIRE(x.level() == y.level(), NumericsError, "axpy: level mismatch");
  axpy(alpha, x.u.data, y.u.data);
  axpy(alpha, x.p.data, y.p.data);
}

double dot(std::span<const double> x, std::span<const double> y) {
  STOKESMG_REQUIRE(x.size() == y.size(), NumericsError, "dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double dot(const StokesVector& x, const StokesVector& y) {
  STOKESMG_REQUIRE(x.level() == y.level(), NumericsError, "dot: level mismatch");
  return dot(std::span<const double>(x.u.data), std::span<const double>(y.u.data)) +
         dot(std::span<const double>(x.p.data), std::span<const double>(y.p.data));
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

double h_norm(const StokesVector& x, double h_ell) {
  STOKESMG_REQUIRE(h_ell > 0.0, NumericsError, "h_norm: nonpositive mesh size");
  const double nu2 = dot(std::span<const double>(x.u.data), std::span<const double>(x.u.data));
  const double np2 = dot(std::span<const double>(x.p.data), std::span<const double>(x.p.data));
  return std::sqrt(nu2 + h_ell * h_ell * np2);
}

void mean_zero_project_inplace(std::span<double> p, std::span<const double> weights) {
  STOKESMG_REQUIRE(p.size() == weights.size(), NumericsError,
                   "mean_zero_project: size mismatch");
  double wsum = 0.0, wp = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    STOKESMG_REQUIRE(weights[i] > 0.0, NumericsError, "mean_zero_project: nonpositive weight");
    wsum += weights[i];
    wp += weights[i] * p[i];
  }
  STOKESMG_REQUIRE(wsum > 0.0, NumericsError, "mean_zero_project: zero total weight");
  const double mean = wp / wsum;
  for (auto& v : p) v -= mean;
}

PressureField mean_zero_project(const PressureField& p, std::span<const double> weights) {
  PressureField out = p;
  mean_zero_project_inplace(out.data, weights);
  return out;
}

void mean_zero_uniform_inplace(std::span<double> p) {
  if (p.empty()) return;
  double s = 0.0;
  for (double v : p) s += v;
  const double mean = s / static_cast<double>(p.size());
  for (auto& v : p) v -= mean;
}

StokesVector random_initial(const GridHierarchy& hierarchy, int level, std::uint64_t seed) {
  const GridLevel& lv = hierarchy.lv(level);
  StokesVector x = make_stokes_vector(lv);
  const std::size_t nu = x.u.data.size();
  for (std::size_t i = 0; i < nu; ++i) x.u.data[i] = uniform01(seed, i);
  const double scale = 1.0 / lv.h_min;
  for (std::size_t i = 0; i < x.p.data.size(); ++i)
    x.p.data[i] = scale * uniform01(seed, nu + i);
  return x;
}

VelocityField nodal_interpolate(const GridHierarchy& hierarchy, int level,
                                const std::function<Vec3(const Vec3&)>& f) {
  const GridLevel& lv = hierarchy.lv(level);
  VelocityField out;
  out.level = level;
  out.data.resize(3 * lv.n_nodes());
  for (std::size_t i = 0; i < lv.n_nodes(); ++i) {
    const Vec3 v = f(lv.pos[i]);
    out.data[3 * i] = v.x;
    out.data[3 * i + 1] = v.y;
    out.data[3 * i + 2] = v.z;
  }
  return out;
}

PressureField nodal_interpolate_scalar(const GridHierarchy& hierarchy, int level,
                                       const std::function<double(const Vec3&)>& f) {
  const GridLevel& lv = hierarchy.lv(level);
  PressureField out;
  out.level = level;
  out.data.resize(lv.n_nodes());
  for (std::size_t i = 0; i < lv.n_nodes(); ++i) out.data[i] = f(lv.pos[i]);
  return out;
}

namespace {
constexpr std::uint32_t kFieldMagic = 0x53'4d'47'46;  // "SMGF"
}

void dump_field(const std::string& path, int level, std::span<const double> data) {
  std::ofstream out(path, std::ios::binary);
  STOKESMG_REQUIRE(out.good(), NumericsError, "cannot open " + path + " for writing");
  const std::uint32_t magic = kFieldMagic;
  const std::uint32_t lvl = static_cast<std::uint32_t>(level);
  const std::uint64_t count = data.size();
  out.write(reinterpret_cast<const char*>(&magic), 4);
  out.write(reinterpret_cast<const char*>(&lvl), 4);
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  STOKESMG_REQUIRE(out.good(), NumericsError, "write failed: " + path);
}

std::pair<int, std::vector<double>> load_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  STOKESMG_REQUIRE(in.good(), NumericsError, "cannot open " + path);
  std::uint32_t magic = 0, lvl = 0;
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&magic), 4);
  in.read(reinterpret_cast<char*>(&lvl), 4);
  in.read(reinterpret_cast<char*>(&count), 8);
  STOKESMG_REQUIRE(in.good() && magic == kFieldMagic, NumericsError,
                   "bad field file header: " + path);
  std::vector<double> data(count);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  STOKESMG_REQUIRE(in.good(), NumericsError, "truncated field file: " + path);
  return {static_cast<int>(lvl), std::move(data)};
}

}  // namespace stokesmg
