#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mesh.hpp"

namespace stokesmg {

// Nodal velocity values, 3 per node, node-major layout [3*i + component].
struct VelocityField {
  int level = 0;
  std::vector<double> data;
};

// Nodal pressure values, 1 per node.
struct PressureField {
  int level = 0;
  std::vector<double> data;
};

struct StokesVector {
  VelocityField u;
  PressureField p;

  int level() const { return u.level; }
  void set_zero();
};

StokesVector make_stokes_vector(const GridLevel& level);

// y += alpha * x
void axpy(double alpha, const StokesVector& x, StokesVector& y);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

double dot(const StokesVector& x, const StokesVector& y);
double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);

// Mesh-dependent norm (|u|_2^2 + h^2 |p|_2^2)^(1/2).
double h_norm(const StokesVector& x, double h_ell);

// Projects onto the weighted mean-zero subspace: sum_i w_i p_i = 0.
PressureField mean_zero_project(const PressureField& p, std::span<const double> weights);
void mean_zero_project_inplace(std::span<double> p, std::span<const double> weights);

// Plain arithmetic-mean removal (uniform weights).
void mean_zero_uniform_inplace(std::span<double> p);

// Random start vector: velocity entries uniform in [0,1], pressure entries
// uniform in [0, 1/h_min]. Deterministic in (seed, level), independent of
// evaluation order.
StokesVector random_initial(const GridHierarchy& hierarchy, int level, std::uint64_t seed);

VelocityField nodal_interpolate(const GridHierarchy& hierarchy, int level,
                                const std::function<Vec3(const Vec3&)>& f);
PressureField nodal_interpolate_scalar(const GridHierarchy& hierarchy, int level,
                                       const std::function<double(const Vec3&)>& f);

// Little-endian doubles with a 16-byte header (magic, level, count).
void dump_field(const std::string& path, int level, std::span<const double> data);
std::pair<int, std::vector<double>> load_field(const std::string& path);

}  // namespace stokesmg
