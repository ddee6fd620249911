#include "gte/finite_diff.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "gte/error.hpp"

namespace gte {

namespace {
constexpr double kNearSingular = 1e8;
constexpr double kSingular = 1e12;

double condition_number(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 1.0;
  const double smallest = sv(sv.size() - 1);
  if (!(smallest > 0.0)) return std::numeric_limits<double>::infinity();
  return sv(0) / smallest;
}
}  // namespace

Jacobian fd_jacobian(const VectorFn& f, std::size_t m, std::span<const double> p,
                     std::span<const double> h, const CutoffBox* box, bool allow_one_sided,
                     std::span<const std::size_t> columns) {
  const std::size_t J = p.size();
  if (h.size() != J) fail(ErrorCode::LengthMismatch, "step vector length differs from point dimension");
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  if (cols.empty()) {
    cols.resize(J);
    std::iota(cols.begin(), cols.end(), 0);
  }
  Jacobian jac;
  jac.rows = m;
  jac.cols = J;
  jac.values.assign(m * J, 0.0);

  std::vector<double> point(p.begin(), p.end());
  std::vector<double> fp(m), fm(m), f0;
  for (std::size_t j : cols) {
    if (!(h[j] > 0.0)) fail(ErrorCode::InvalidArgument, "finite-difference step must be positive");
    double up = p[j] + h[j];
    double down = p[j] - h[j];
    if (box && !box->empty()) {
      const bool up_out = up > box->hi[j];
      const bool down_out = down < box->lo[j];
      if (up_out || down_out) {
        if (!allow_one_sided) {
          fail(ErrorCode::InvalidArgument, "finite-difference step leaves the cutoff box at item " +
                                               std::to_string(j + 1));
        }
        if (up_out && down_out) {
          fail(ErrorCode::InvalidArgument, "cutoff box narrower than the finite-difference step");
        }
        if (f0.empty()) {
          f0.resize(m);
          f(p, f0);
        }
        if (up_out) up = p[j];
        if (down_out) down = p[j];
        jac.warnings.push_back("one-sided difference at item " + std::to_string(j + 1));
      }
    }
    point[j] = up;
    f(point, fp);
    point[j] = down;
    f(point, fm);
    point[j] = p[j];
    const double span = up - down;
    for (std::size_t r = 0; r < m; ++r) jac.values[r * J + j] = (fp[r] - fm[r]) / span;
  }
  return jac;
}

Sensitivity solve_sensitivity(std::span<const double> grad_y, const Jacobian& grad_z,
                              std::span<const std::size_t> active) {
  const std::size_t J = grad_z.cols;
  if (grad_y.size() != J || grad_z.rows != J) {
    fail(ErrorCode::DimensionMismatch, "sensitivity system has inconsistent dimensions");
  }
  Sensitivity s;
  s.nu.assign(J, 0.0);
  s.active.assign(active.begin(), active.end());
  const auto a = static_cast<Eigen::Index>(active.size());
  if (a == 0) return s;

  Eigen::MatrixXd Z(a, a);
  Eigen::RowVectorXd g(a);
  for (Eigen::Index r = 0; r < a; ++r) {
    g(r) = grad_y[active[r]];
    for (Eigen::Index c = 0; c < a; ++c) Z(r, c) = grad_z(active[r], active[c]);
  }
  s.condition = condition_number(Z);
  if (s.condition > kNearSingular) {
    const double ridge = 1e-8 * std::abs(Z.trace()) / static_cast<double>(a);
    // Ridge along the sign of the diagonal so it moves away from zero.
    for (Eigen::Index r = 0; r < a; ++r) Z(r, r) += Z(r, r) < 0.0 ? -ridge : ridge;
    s.ridged = true;
    s.condition = condition_number(Z);
    s.warnings.push_back("demand Jacobian near-singular; ridge added");
    if (!(s.condition <= kSingular)) {
      fail(ErrorCode::SingularJacobian, "demand Jacobian condition number exceeds 1e12");
    }
  }
  // nu Z = g  <=>  Z' nu' = g'
  const Eigen::VectorXd nu = Z.transpose().fullPivLu().solve(g.transpose());
  for (Eigen::Index r = 0; r < a; ++r) s.nu[active[r]] = nu(r);
  return s;
}

Sensitivity estimate_sensitivity(const VectorFn& aggregate, std::span<const double> p,
                                 std::span<const double> h, const CutoffBox& box,
                                 std::span<const std::size_t> active, bool allow_one_sided) {
  const std::size_t J = p.size();
  if (active.empty()) {
    Sensitivity s;
    s.nu.assign(J, 0.0);
    return s;
  }
  Jacobian full = fd_jacobian(aggregate, J + 1, p, h, &box, allow_one_sided, active);
  std::vector<double> gy(J);
  Jacobian gz;
  gz.rows = J;
  gz.cols = J;
  gz.values.assign(J * J, 0.0);
  for (std::size_t c = 0; c < J; ++c) {
    gy[c] = full(0, c);
    for (std::size_t r = 0; r < J; ++r) gz.values[r * J + c] = full(r + 1, c);
  }
  Sensitivity s = solve_sensitivity(gy, gz, active);
  s.warnings.insert(s.warnings.begin(), full.warnings.begin(), full.warnings.end());
  return s;
}

}  // namespace gte
