#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gte/mechanism.hpp"

namespace gte {

// f: R^J -> R^m, written into `out` (length m).
using VectorFn = std::function<void(std::span<const double> p, std::span<double> out)>;

struct Jacobian {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major rows x cols
  std::vector<std::string> warnings;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Central differences (f(p + h_j e_j) - f(p - h_j e_j)) / 2h_j for each j in
// `columns` (all coordinates when empty). A step leaving `box` falls back to a
// one-sided difference with a warning, or throws InvalidArgument when
// `allow_one_sided` is false. Columns not listed are left at zero.
Jacobian fd_jacobian(const VectorFn& f, std::size_t m, std::span<const double> p,
                     std::span<const double> h, const CutoffBox* box = nullptr,
                     bool allow_one_sided = true, std::span<const std::size_t> columns = {});

struct Sensitivity {
  std::vector<double> nu;              // 1 x J, zero outside the active set
  std::vector<std::size_t> active;     // coordinates the system was solved on
  double condition = 1.0;              // of the active block of grad z
  bool ridged = false;
  std::vector<std::string> warnings;
};

// nu = grad_y' (grad_z)^{-1} restricted to `active`. grad_y has length J,
// grad_z is J x J. A near-singular block gets ridge 1e-8 * |trace| / J; if the
// condition number is still above 1e12 SingularJacobian is thrown.
Sensitivity solve_sensitivity(std::span<const double> grad_y, const Jacobian& grad_z,
                              std::span<const std::size_t> active);

// Differentiates an aggregate A(p) = (y(p), z_1(p)..z_J(p)) at p and solves
// for nu on the active coordinates.
Sensitivity estimate_sensitivity(const VectorFn& aggregate, std::span<const double> p,
                                 std::span<const double> h, const CutoffBox& box,
                                 std::span<const std::size_t> active, bool allow_one_sided = true);

}  // namespace gte
