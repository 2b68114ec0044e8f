// Independent reference computations used by the test suites. Everything in
// this header is deliberately written without reusing the library's
// assembly or solver code paths, so a test comparing against an oracle here
// checks two independent routes.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "frax/geometry.hpp"

namespace oracles {

using frax::Vec2;

/// Degree-5 Dunavant quadrature on a triangle (7 points), used as the
/// independent route for integrals the assembly computes with lower-order
/// exact rules.
template <typename F>
double triangle_quadrature(const Vec2& a, const Vec2& b, const Vec2& c, F&& integrand) {
  struct Node {
    double l1, l2, l3, w;
  };
  static const std::array<Node, 7> nodes = {{
      {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225},
      {0.059715871789770, 0.470142064105115, 0.470142064105115, 0.132394152788506},
      {0.470142064105115, 0.059715871789770, 0.470142064105115, 0.132394152788506},
      {0.470142064105115, 0.470142064105115, 0.059715871789770, 0.132394152788506},
      {0.797426985353087, 0.101286507323456, 0.101286507323456, 0.125939180544827},
      {0.101286507323456, 0.797426985353087, 0.101286507323456, 0.125939180544827},
      {0.101286507323456, 0.101286507323456, 0.797426985353087, 0.125939180544827},
  }};
  const double area = 0.5 * frax::cross(b - a, c - a);
  double sum = 0.0;
  for (const Node& n : nodes) {
    Vec2 x = n.l1 * a + n.l2 * b + n.l3 * c;
    sum += n.w * integrand(x);
  }
  return sum * area;
}

/// 5-point Gauss-Legendre rule on the segment [a,b].
template <typename F>
double segment_quadrature(const Vec2& a, const Vec2& b, F&& integrand) {
  static const std::array<double, 5> xs = {-0.906179845938664, -0.538469310105683, 0.0,
                                           0.538469310105683, 0.906179845938664};
  static const std::array<double, 5> ws = {0.236926885056189, 0.478628670499366, 0.568888888888889,
                                           0.478628670499366, 0.236926885056189};
  const double len = frax::distance(a, b);
  double sum = 0.0;
  for (int q = 0; q < 5; ++q) {
    double t = 0.5 * (1.0 + xs[q]);
    sum += ws[q] * integrand(a + t * (b - a));
  }
  return sum * 0.5 * len;
}

/// RT0 basis on a triangle in the same outward-unit-flux normalization the
/// library documents: phi_i = |e_i| / (2|K|) (x - P_i), e_i opposite P_i.
inline Vec2 rt0_basis(const std::array<Vec2, 3>& corner, int i, const Vec2& x) {
  const double area =
      0.5 * frax::cross(corner[1] - corner[0], corner[2] - corner[0]);
  const double elen = frax::distance(corner[(i + 1) % 3], corner[(i + 2) % 3]);
  return (elen / (2.0 * area)) * (x - corner[i]);
}

/// Dense Gaussian elimination with partial pivoting.
inline std::vector<double> dense_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < n; ++r) {
      double factor = a[r][col] / a[col][col];
      for (int c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r][c] * x[c];
    x[r] = s / a[r][r];
  }
  return x;
}

/// All distinct conductive endpoints and pairwise crossing points of a
/// network, deduplicated within tol: the brute-force route for the
/// partition property of the intersection sets.
inline std::vector<Vec2> conductive_points_brute_force(const frax::FractureNetwork& network,
                                                       double tol) {
  std::vector<Vec2> pts;
  auto push = [&](const Vec2& p) {
    for (const Vec2& q : pts)
      if (frax::distance(p, q) <= tol) return;
    pts.push_back(p);
  };
  for (std::size_t i = 0; i < network.size(); ++i) {
    if (!network[i].conductive()) continue;
    push(network[i].a);
    push(network[i].b);
    for (std::size_t j = 0; j < network.size(); ++j) {
      if (j == i) continue;
      auto p = frax::segment_intersection(network[i].a, network[i].b, network[j].a, network[j].b, tol);
      if (p) push(*p);
    }
  }
  return pts;
}

/// Implicit upwind step for a 1D chain of cells with given inter-cell
/// fluxes: the scalar oracle for the hybridized transport scheme.
/// volumes[i], porosity[i]; flux[i] is the flow from cell i-1 into cell i
/// (flux[0] is the inflow with concentration c_in, flux[n] the outflow).
inline std::vector<double> implicit_upwind_1d_step(const std::vector<double>& c_old,
                                                   const std::vector<double>& volumes,
                                                   const std::vector<double>& porosity,
                                                   const std::vector<double>& flux, double c_in,
                                                   double dt) {
  const int n = static_cast<int>(c_old.size());
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  std::vector<double> rhs(n, 0.0);
  for (int i = 0; i < n; ++i) {
    a[i][i] = porosity[i] * volumes[i] / dt + flux[i + 1];
    rhs[i] = porosity[i] * volumes[i] / dt * c_old[i];
    if (i == 0) rhs[i] += flux[0] * c_in;
    else a[i][i - 1] -= flux[i];
  }
  return dense_solve(a, rhs);
}

}  // namespace oracles
