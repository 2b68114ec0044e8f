#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "frax/errors.hpp"
#include "frax/linsolve.hpp"
#include "frax/mesh.hpp"

namespace frax {

/// Darcy flow problem on a fitted mesh. Conductive fractures enter through
/// the fracture mesh (fracture_mesh may be null when there are none);
/// blocking fractures enter as line-integral resistance terms and need no
/// mesh conformity. The source is piecewise constant per cell (empty means
/// zero). Dirichlet data is evaluated at facet midpoints / skeleton
/// vertices, Neumann data at facet midpoints.
struct FlowProblem {
  const SimplicialMesh* mesh = nullptr;
  const FractureMesh* fracture_mesh = nullptr;
  FractureNetwork blocking;
  std::vector<double> source;
  std::function<double(Vec2)> dirichlet_data;
  std::function<double(Vec2)> neumann_data;
  double alpha = 1e6;

  double source_on(int cell) const { return source.empty() ? 0.0 : source[cell]; }
  int n_segments() const { return fracture_mesh ? fracture_mesh->n_segments() : 0; }
  int n_skeleton_vertices() const { return fracture_mesh ? fracture_mesh->n_skeleton_vertices() : 0; }
};

/// Local RT0 x P0 saddle system of one cell in the outward-flux basis
/// phi_i = |e_i| / (2|K|) (x - P_i): A is the weighted velocity mass matrix
/// plus the blocking line term, B the divergence coupling (the facet
/// lengths), C the facet-trace coupling (diagonal, equal to B).
struct LocalCellSystem {
  Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
  Eigen::Vector3d B = Eigen::Vector3d::Zero();
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  double load = 0.0;
};

/// Local 1D mixed system of one fracture segment in tangential endpoint
/// coordinates beta = (u_c . tau at tail, at head); M carries the mass term
/// and the cb penalty, G couples to (facet pressure, tail vertex pressure,
/// head vertex pressure).
struct LocalSegmentSystem {
  Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
  Eigen::Matrix<double, 2, 3> G = Eigen::Matrix<double, 2, 3>::Zero();
};

namespace detail {

struct CellGeometry {
  std::array<Vec2, 3> corner;   // P_i, opposite local facet i
  std::array<double, 3> edge_length;
  double area = 0.0;

  static CellGeometry of(const SimplicialMesh& mesh, int k) {
    CellGeometry g;
    for (int i = 0; i < 3; ++i) g.corner[i] = mesh.vertices[mesh.cells[k][i]];
    for (int i = 0; i < 3; ++i) g.edge_length[i] = distance(g.corner[(i + 1) % 3], g.corner[(i + 2) % 3]);
    g.area = mesh.cell_area(k);
    return g;
  }

  Vec2 basis(int i, const Vec2& x) const {
    return (edge_length[i] / (2.0 * area)) * (x - corner[i]);
  }

  Vec2 centroid() const { return (corner[0] + corner[1] + corner[2]) / 3.0; }
};

/// Clips the segment [a,b] against the closed triangle; returns the clipped
/// parameter interval in [0,1] if it has positive length. Endpoints within
/// tol of an edge line count as on the edge, so a segment running along a
/// facet is kept by both incident cells (ownership is resolved separately).
inline std::optional<std::pair<double, double>> clip_segment_to_triangle(
    const Vec2& a, const Vec2& b, const std::array<Vec2, 3>& tri, double tol) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 3 && lo < hi; ++i) {
    const Vec2 u = tri[(i + 1) % 3];
    const Vec2 v = tri[(i + 2) % 3];
    const double eps = tol * distance(u, v);
    // inside = nonnegative cross against the CCW edge
    double c0 = cross(v - u, a - u);
    double c1 = cross(v - u, b - u);
    if (std::abs(c0) <= eps) c0 = 0.0;
    if (std::abs(c1) <= eps) c1 = 0.0;
    if (c0 < 0.0 && c1 < 0.0) return std::nullopt;
    if (c0 < 0.0 && c1 > 0.0) lo = std::max(lo, c0 / (c0 - c1));
    else if (c0 > 0.0 && c1 < 0.0) hi = std::min(hi, c0 / (c0 - c1));
    else if (c0 == 0.0 && c1 < 0.0) hi = std::min(hi, 0.0);
    else if (c1 == 0.0 && c0 < 0.0) lo = std::max(lo, 1.0);
  }
  if (hi - lo <= 0.0) return std::nullopt;
  return std::make_pair(lo, hi);
}

}  // namespace detail

/// Assembles the local cell system: exact degree-2 quadrature (edge
/// midpoints) for the RT0 mass term, and per blocking-fracture piece
/// S = Omega_b cap K a 2-point Gauss rule for (eps/K_b)(u.n)(v.n), exact
/// since the normal traces are linear along the line. A piece that lies on
/// a shared facet is integrated only by the facet's first incident cell.
inline LocalCellSystem assemble_cell(int k, const FlowProblem& problem, double tol = -1.0) {
  const SimplicialMesh& mesh = *problem.mesh;
  if (tol < 0.0) tol = mesh.geometry_tolerance();
  const detail::CellGeometry g = detail::CellGeometry::of(mesh, k);
  const SymTensor2& km = mesh.cell_permeability[k];
  require(km.spd(), ErrorCode::SingularTensor, "matrix permeability must be SPD");
  const SymTensor2 km_inv = km.inverse();

  LocalCellSystem sys;
  // Edge-midpoint rule, weights |K|/3: exact for the quadratic integrand.
  for (int q = 0; q < 3; ++q) {
    const Vec2 xq = 0.5 * (g.corner[(q + 1) % 3] + g.corner[(q + 2) % 3]);
    std::array<Vec2, 3> phi;
    for (int i = 0; i < 3; ++i) phi[i] = g.basis(i, xq);
    for (int i = 0; i < 3; ++i) {
      const Vec2 kphi = km_inv.apply(phi[i]);
      for (int j = 0; j < 3; ++j) sys.A(i, j) += (g.area / 3.0) * dot(kphi, phi[j]);
    }
  }

  for (const Fracture& frac : problem.blocking) {
    if (frac.conductive()) continue;
    auto piece = detail::clip_segment_to_triangle(frac.a, frac.b, g.corner, tol);
    if (!piece) continue;
    const Vec2 pa = frac.a + piece->first * (frac.b - frac.a);
    const Vec2 pb = frac.a + piece->second * (frac.b - frac.a);
    const double piece_len = distance(pa, pb);
    if (piece_len <= tol) continue;

    // Ownership of a piece lying on a facet: only the first incident cell
    // integrates it, so the fracture is counted once.
    bool owned = true;
    for (int i = 0; i < 3 && owned; ++i) {
      const Vec2 u = g.corner[(i + 1) % 3];
      const Vec2 v = g.corner[(i + 2) % 3];
      if (point_segment_distance(pa, u, v) <= tol && point_segment_distance(pb, u, v) <= tol) {
        int f = mesh.cell_facets[k][i];
        if (mesh.facet_cells[f][0] != k) owned = false;
      }
    }
    if (!owned) continue;

    const Vec2 n = frac.unit_normal();
    const double weight = frac.thickness / frac.normal_conductivity;
    // 2-point Gauss on the piece.
    const double gp = 0.5 / std::sqrt(3.0);
    for (double s : {0.5 - gp, 0.5 + gp}) {
      const Vec2 xq = pa + s * (pb - pa);
      std::array<double, 3> tr;
      for (int i = 0; i < 3; ++i) tr[i] = dot(g.basis(i, xq), n);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) sys.A(i, j) += weight * (piece_len / 2.0) * tr[i] * tr[j];
    }
  }
  sys.A = 0.5 * (sys.A + sys.A.transpose().eval());

  for (int i = 0; i < 3; ++i) sys.B(i) = g.edge_length[i];
  sys.C = sys.B.asDiagonal();
  sys.load = problem.source_on(k) * g.area;
  return sys;
}

/// Assembles the local fracture-segment system; endpoints classified cb get
/// the penalty alpha/(eps K_c) on their diagonal.
inline LocalSegmentSystem assemble_fracture_segment(int s, const FlowProblem& problem) {
  const FractureMesh& fm = *problem.fracture_mesh;
  const FractureSegment& seg = fm.segments[s];
  const double L = seg.length;
  const double k = seg.eps_kc;
  require(k > 0.0, ErrorCode::InvalidArgument, "eps*K_c must be positive");

  LocalSegmentSystem sys;
  sys.M << L / (3.0 * k), L / (6.0 * k), L / (6.0 * k), L / (3.0 * k);
  const SkeletonVertexClass c0 = fm.vertex_class[fm.skeleton_index_of.at(seg.v0)];
  const SkeletonVertexClass c1 = fm.vertex_class[fm.skeleton_index_of.at(seg.v1)];
  if (c0 == SkeletonVertexClass::CB) sys.M(0, 0) += problem.alpha / k;
  if (c1 == SkeletonVertexClass::CB) sys.M(1, 1) += problem.alpha / k;
  // Columns: facet pressure, tail vertex pressure, head vertex pressure.
  sys.G << 1.0, -1.0, 0.0,
          -1.0, 0.0, 1.0;
  return sys;
}

/// Skeleton unknown layout: free facet pressures followed by free fracture
/// vertex pressures; Dirichlet DOFs carry their prescribed values.
struct DofLayout {
  std::vector<int> facet_dof;      // facet -> free index, or -1 when fixed
  std::vector<double> facet_value; // prescribed value on fixed facets, 0 otherwise
  std::vector<int> vertex_dof;     // skeleton vertex -> free index, or -1
  std::vector<double> vertex_value;
  int n_free_facets = 0;
  int n_free_vertices = 0;

  int n_free() const { return n_free_facets + n_free_vertices; }
};

inline DofLayout build_dof_layout(const FlowProblem& problem) {
  const SimplicialMesh& mesh = *problem.mesh;
  DofLayout layout;
  layout.facet_dof.assign(mesh.n_facets(), -1);
  layout.facet_value.assign(mesh.n_facets(), 0.0);
  int next = 0;
  bool has_dirichlet = false;
  for (int f = 0; f < mesh.n_facets(); ++f) {
    if (mesh.facet_boundary_tag[f] == BoundaryTag::Dirichlet) {
      has_dirichlet = true;
      require(static_cast<bool>(problem.dirichlet_data), ErrorCode::InvalidArgument,
              "Dirichlet facets present but no dirichlet_data given");
      layout.facet_value[f] = problem.dirichlet_data(mesh.facet_midpoint(f));
    } else {
      layout.facet_dof[f] = next++;
    }
  }
  layout.n_free_facets = next;

  const int nsv = problem.n_skeleton_vertices();
  layout.vertex_dof.assign(nsv, -1);
  layout.vertex_value.assign(nsv, 0.0);
  for (int v = 0; v < nsv; ++v) {
    if (problem.fracture_mesh->vertex_class[v] == SkeletonVertexClass::CM_D) {
      has_dirichlet = true;
      layout.vertex_value[v] =
          problem.dirichlet_data(mesh.vertices[problem.fracture_mesh->skeleton_vertices[v]]);
    } else {
      layout.vertex_dof[v] = next++;
    }
  }
  layout.n_free_vertices = next - layout.n_free_facets;
  require(has_dirichlet, ErrorCode::NoDirichlet,
          "well-posedness requires a nonempty Dirichlet boundary");
  return layout;
}

/// Statically condensed skeleton system together with the per-cell and
/// per-segment factors needed to recover the interior fields.
struct CondensedSystem {
  SparseMatrix matrix;  // SPD over the free skeleton DOFs
  std::vector<double> rhs;
  DofLayout layout;

  struct CellFactor {
    Eigen::Matrix3d a_inv;
    Eigen::Vector3d b;
    double load = 0.0;
  };
  struct SegmentFactor {
    Eigen::Matrix2d m_inv;
  };
  std::vector<CellFactor> cells;
  std::vector<SegmentFactor> segments;

  int n_free() const { return layout.n_free(); }
};

/// Eliminates (u_h, p_h) cell by cell and u_h^c segment by segment,
/// assembling the SPD system in the free skeleton pressures. Dirichlet
/// values are substituted into the right-hand side; Neumann data enters the
/// facet rows with a positive sign, so the multiplier equation reproduces
/// u.n = q_N on those facets.
inline CondensedSystem condense(const FlowProblem& problem) {
  require(problem.mesh != nullptr, ErrorCode::InvalidArgument, "problem has no mesh");
  const SimplicialMesh& mesh = *problem.mesh;
  CondensedSystem sys;
  sys.layout = build_dof_layout(problem);
  const int n = sys.layout.n_free();
  sys.rhs.assign(n, 0.0);
  SparseBuilder builder(n, n);
  builder.reserve(9 * mesh.n_cells() + 9 * problem.n_segments());

  const double tol = mesh.geometry_tolerance();
  sys.cells.resize(mesh.n_cells());
  for (int k = 0; k < mesh.n_cells(); ++k) {
    LocalCellSystem local = assemble_cell(k, problem, tol);
    CondensedSystem::CellFactor& factor = sys.cells[k];
    factor.a_inv = local.A.inverse();
    factor.a_inv = 0.5 * (factor.a_inv + factor.a_inv.transpose().eval());
    factor.b = local.B;
    factor.load = local.load;

    const Eigen::Vector3d ainv_b = factor.a_inv * local.B;
    const double d = local.B.dot(ainv_b);
    // Schur complement of the local saddle system onto the facet traces:
    // S = C (A^-1 - A^-1 B B^T A^-1 / d) C, rhs gets w * load / d with
    // w = C A^-1 B.
    Eigen::Vector3d w;
    Eigen::Matrix3d s;
    for (int i = 0; i < 3; ++i) w(i) = local.B(i) * ainv_b(i);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        s(i, j) = local.B(i) * factor.a_inv(i, j) * local.B(j) - w(i) * w(j) / d;

    std::array<int, 3> dof;
    std::array<double, 3> fixed;
    for (int i = 0; i < 3; ++i) {
      int f = mesh.cell_facets[k][i];
      dof[i] = sys.layout.facet_dof[f];
      fixed[i] = sys.layout.facet_value[f];
    }
    for (int i = 0; i < 3; ++i) {
      if (dof[i] < 0) continue;
      sys.rhs[dof[i]] += w(i) * factor.load / d;
      for (int j = 0; j < 3; ++j) {
        if (dof[j] >= 0) builder.add(dof[i], dof[j], s(i, j));
        else sys.rhs[dof[i]] -= s(i, j) * fixed[j];
      }
    }
  }

  if (problem.fracture_mesh) {
    const FractureMesh& fm = *problem.fracture_mesh;
    sys.segments.resize(fm.n_segments());
    for (int s = 0; s < fm.n_segments(); ++s) {
      LocalSegmentSystem local = assemble_fracture_segment(s, problem);
      sys.segments[s].m_inv = local.M.inverse();
      sys.segments[s].m_inv = 0.5 * (sys.segments[s].m_inv + sys.segments[s].m_inv.transpose().eval());
      const Eigen::Matrix3d block = local.G.transpose() * sys.segments[s].m_inv * local.G;

      const FractureSegment& seg = fm.segments[s];
      const int sv0 = fm.skeleton_index_of.at(seg.v0);
      const int sv1 = fm.skeleton_index_of.at(seg.v1);
      std::array<int, 3> dof = {sys.layout.facet_dof[seg.facet], sys.layout.vertex_dof[sv0],
                                sys.layout.vertex_dof[sv1]};
      std::array<double, 3> fixed = {sys.layout.facet_value[seg.facet], sys.layout.vertex_value[sv0],
                                     sys.layout.vertex_value[sv1]};
      for (int i = 0; i < 3; ++i) {
        if (dof[i] < 0) continue;
        for (int j = 0; j < 3; ++j) {
          if (dof[j] >= 0) builder.add(dof[i], dof[j], block(i, j));
          else sys.rhs[dof[i]] -= block(i, j) * fixed[j];
        }
      }
    }
  }

  // Neumann data: the facet row carries +int q_N, moved to the right-hand
  // side of S p = b.
  if (problem.neumann_data) {
    for (int f = 0; f < mesh.n_facets(); ++f) {
      if (mesh.facet_boundary_tag[f] != BoundaryTag::Neumann) continue;
      int dof = sys.layout.facet_dof[f];
      if (dof >= 0) sys.rhs[dof] -= problem.neumann_data(mesh.facet_midpoint(f)) * mesh.facet_length(f);
    }
  }

  sys.matrix = builder.build(/*symmetric=*/true);
  return sys;
}

/// Discrete flow fields. Velocity coefficients are outward normal fluxes
/// per cell facet (basis phi_i); fracture_flux stores the tangential
/// velocity component at the two segment endpoints (tail, head), so the
/// in-plane outward flux is -beta[0] at the tail and +beta[1] at the head.
struct FlowSolution {
  std::vector<std::array<double, 3>> velocity;
  std::vector<double> pressure;
  std::vector<double> facet_pressure;
  std::vector<std::array<double, 2>> fracture_flux;
  std::vector<double> fracture_vertex_pressure;
  std::vector<Vec2> pstar_gradient;  // postprocessed pressure: p + g.(x - centroid)
  bool has_postprocessed = false;

  Vec2 velocity_at(const SimplicialMesh& mesh, int k, const Vec2& x) const {
    const detail::CellGeometry g = detail::CellGeometry::of(mesh, k);
    Vec2 u{0.0, 0.0};
    for (int i = 0; i < 3; ++i) u += velocity[k][i] * g.basis(i, x);
    return u;
  }

  double pstar_at(const SimplicialMesh& mesh, int k, const Vec2& x) const {
    return pressure[k] + dot(pstar_gradient[k], x - mesh.cell_centroid(k));
  }

  /// Signed normal flux of the facet w.r.t. the facet's global normal,
  /// taken from the first incident cell.
  double facet_flux(const SimplicialMesh& mesh, int f) const {
    int k = mesh.facet_cells[f][0];
    for (int i = 0; i < 3; ++i)
      if (mesh.cell_facets[k][i] == f) return velocity[k][i];
    raise(ErrorCode::InvalidArgument, "facet_flux: facet not found in cell");
  }
};

/// Back-substitution of the skeleton solution into the local factors.
inline FlowSolution recover(const FlowProblem& problem, const CondensedSystem& sys,
                            const std::vector<double>& skeleton) {
  const SimplicialMesh& mesh = *problem.mesh;
  FlowSolution sol;
  sol.facet_pressure.resize(mesh.n_facets());
  for (int f = 0; f < mesh.n_facets(); ++f) {
    int dof = sys.layout.facet_dof[f];
    sol.facet_pressure[f] = dof >= 0 ? skeleton[dof] : sys.layout.facet_value[f];
  }
  const int nsv = problem.n_skeleton_vertices();
  sol.fracture_vertex_pressure.resize(nsv);
  for (int v = 0; v < nsv; ++v) {
    int dof = sys.layout.vertex_dof[v];
    sol.fracture_vertex_pressure[v] = dof >= 0 ? skeleton[dof] : sys.layout.vertex_value[v];
  }

  sol.velocity.resize(mesh.n_cells());
  sol.pressure.resize(mesh.n_cells());
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const CondensedSystem::CellFactor& factor = sys.cells[k];
    Eigen::Vector3d p_hat;
    for (int i = 0; i < 3; ++i) p_hat(i) = sol.facet_pressure[mesh.cell_facets[k][i]];
    const Eigen::Vector3d ainv_b = factor.a_inv * factor.b;
    const double d = factor.b.dot(ainv_b);
    const Eigen::Vector3d c_p_hat = factor.b.cwiseProduct(p_hat);  // C p_hat
    const double p = (factor.load + ainv_b.dot(c_p_hat)) / d;
    const Eigen::Vector3d u = factor.a_inv * (factor.b * p - c_p_hat);
    sol.pressure[k] = p;
    for (int i = 0; i < 3; ++i) sol.velocity[k][i] = u(i);
  }

  if (problem.fracture_mesh) {
    const FractureMesh& fm = *problem.fracture_mesh;
    sol.fracture_flux.resize(fm.n_segments());
    for (int s = 0; s < fm.n_segments(); ++s) {
      const FractureSegment& seg = fm.segments[s];
      LocalSegmentSystem local = assemble_fracture_segment(s, problem);
      Eigen::Vector3d mu;
      mu(0) = sol.facet_pressure[seg.facet];
      mu(1) = sol.fracture_vertex_pressure[fm.skeleton_index_of.at(seg.v0)];
      mu(2) = sol.fracture_vertex_pressure[fm.skeleton_index_of.at(seg.v1)];
      const Eigen::Vector2d beta = -(sys.segments[s].m_inv * (local.G * mu));
      sol.fracture_flux[s] = {beta(0), beta(1)};
    }
  }
  return sol;
}

/// Local pressure postprocessing: on each cell the linear p* satisfies
/// (grad p*, grad q) = -(K^-1 u_h, grad q) and has mean p_h, which reduces
/// to grad p* = -K^-1 (mean of u_h over the cell).
inline void postprocess_pressure(const FlowProblem& problem, FlowSolution& sol) {
  const SimplicialMesh& mesh = *problem.mesh;
  sol.pstar_gradient.resize(mesh.n_cells());
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const detail::CellGeometry g = detail::CellGeometry::of(mesh, k);
    const Vec2 xc = g.centroid();
    Vec2 u_mean{0.0, 0.0};
    for (int i = 0; i < 3; ++i)
      u_mean += sol.velocity[k][i] * (g.edge_length[i] / (2.0 * g.area)) * (xc - g.corner[i]);
    const SymTensor2 km_inv = mesh.cell_permeability[k].inverse();
    sol.pstar_gradient[k] = -1.0 * km_inv.apply(u_mean);
  }
  sol.has_postprocessed = true;
}

/// Per-cell mass defect int_dK u.n - int_K f; identically zero up to
/// roundoff for any recovered solution.
inline std::vector<double> local_mass_residual(const FlowProblem& problem, const FlowSolution& sol) {
  const SimplicialMesh& mesh = *problem.mesh;
  std::vector<double> res(mesh.n_cells());
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const detail::CellGeometry g = detail::CellGeometry::of(mesh, k);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += sol.velocity[k][i] * g.edge_length[i];
    res[k] = s - problem.source_on(k) * g.area;
  }
  return res;
}

/// Maximum relative residuals of the five discrete equations evaluated on a
/// recovered solution; the scale is the largest term magnitude encountered.
struct FlowResiduals {
  double darcy = 0.0;          // velocity equation rows
  double mass = 0.0;           // cell mass conservation rows
  double flux_continuity = 0.0;  // facet rows
  double fracture_darcy = 0.0;   // segment rows
  double fracture_balance = 0.0; // skeleton vertex rows

  double max() const {
    return std::max({darcy, mass, flux_continuity, fracture_darcy, fracture_balance});
  }
};

inline FlowResiduals flow_residuals(const FlowProblem& problem, const FlowSolution& sol) {
  const SimplicialMesh& mesh = *problem.mesh;
  FlowResiduals res;
  double scale = 1e-300;

  const double tol = mesh.geometry_tolerance();
  std::vector<double> facet_row(mesh.n_facets(), 0.0);
  for (int k = 0; k < mesh.n_cells(); ++k) {
    LocalCellSystem local = assemble_cell(k, problem, tol);
    Eigen::Vector3d u, p_hat;
    for (int i = 0; i < 3; ++i) {
      u(i) = sol.velocity[k][i];
      p_hat(i) = sol.facet_pressure[mesh.cell_facets[k][i]];
    }
    const Eigen::Vector3d r1 =
        local.A * u - local.B * sol.pressure[k] + local.B.cwiseProduct(p_hat);
    for (int i = 0; i < 3; ++i) {
      res.darcy = std::max(res.darcy, std::abs(r1(i)));
      scale = std::max({scale, std::abs((local.A * u)(i)), std::abs(local.B(i) * sol.pressure[k])});
    }
    const double r2 = local.B.dot(u) - local.load;
    res.mass = std::max(res.mass, std::abs(r2));
    for (int i = 0; i < 3; ++i)
      facet_row[mesh.cell_facets[k][i]] -= u(i) * mesh.facet_length(mesh.cell_facets[k][i]);
    // outward-basis coefficient u(i) is u.n_K; the multiplier row collects
    // -<u.n, q> over both sides
  }

  std::vector<double> vertex_row(problem.n_skeleton_vertices(), 0.0);
  if (problem.fracture_mesh) {
    const FractureMesh& fm = *problem.fracture_mesh;
    for (int s = 0; s < fm.n_segments(); ++s) {
      const FractureSegment& seg = fm.segments[s];
      LocalSegmentSystem local = assemble_fracture_segment(s, problem);
      Eigen::Vector2d beta{sol.fracture_flux[s][0], sol.fracture_flux[s][1]};
      Eigen::Vector3d mu;
      mu(0) = sol.facet_pressure[seg.facet];
      mu(1) = sol.fracture_vertex_pressure[fm.skeleton_index_of.at(seg.v0)];
      mu(2) = sol.fracture_vertex_pressure[fm.skeleton_index_of.at(seg.v1)];
      const Eigen::Vector2d r4 = local.M * beta + local.G * mu;
      res.fracture_darcy = std::max({res.fracture_darcy, std::abs(r4(0)), std::abs(r4(1))});
      scale = std::max({scale, std::abs((local.M * beta)(0)), std::abs(mu(0))});
      facet_row[seg.facet] += beta(1) - beta(0);  // divergence of the in-plane flux
      vertex_row[fm.skeleton_index_of.at(seg.v0)] += beta(0);
      vertex_row[fm.skeleton_index_of.at(seg.v1)] -= beta(1);
    }
  }

  for (int f = 0; f < mesh.n_facets(); ++f) {
    if (mesh.facet_boundary_tag[f] == BoundaryTag::Dirichlet) continue;
    double row = facet_row[f];
    if (mesh.facet_boundary_tag[f] == BoundaryTag::Neumann && problem.neumann_data)
      row += problem.neumann_data(mesh.facet_midpoint(f)) * mesh.facet_length(f);
    res.flux_continuity = std::max(res.flux_continuity, std::abs(row));
  }
  if (problem.fracture_mesh) {
    for (int v = 0; v < problem.n_skeleton_vertices(); ++v) {
      if (problem.fracture_mesh->vertex_class[v] == SkeletonVertexClass::CM_D) continue;
      res.fracture_balance = std::max(res.fracture_balance, std::abs(vertex_row[v]));
    }
  }

  res.darcy /= scale;
  res.mass /= scale;
  res.flux_continuity /= scale;
  res.fracture_darcy /= scale;
  res.fracture_balance /= scale;
  return res;
}

enum class FlowSolverKind { Cholesky, JacobiCG };

struct FlowRunReport {
  SolveReport solve;
  int n_free_facet_dofs = 0;
  int n_free_vertex_dofs = 0;
  int n_global_dofs = 0;
};

/// Condense, solve the skeleton system and recover; the default solver is
/// the sparse direct Cholesky, with Jacobi-preconditioned CG as the
/// alternative for large meshes.
inline std::pair<FlowSolution, FlowRunReport> solve_flow(const FlowProblem& problem,
                                                         FlowSolverKind kind = FlowSolverKind::Cholesky,
                                                         double cg_tol = 1e-12) {
  CondensedSystem sys = condense(problem);
  std::pair<std::vector<double>, SolveReport> solved =
      kind == FlowSolverKind::Cholesky
          ? cholesky_solve(sys.matrix, sys.rhs)
          : cg_solve(sys.matrix, sys.rhs, cg_tol, 100000, Preconditioner::Jacobi);
  FlowRunReport report;
  report.solve = solved.second;
  report.n_free_facet_dofs = sys.layout.n_free_facets;
  report.n_free_vertex_dofs = sys.layout.n_free_vertices;
  report.n_global_dofs = sys.layout.n_free();
  FlowSolution sol = recover(problem, sys, solved.first);
  postprocess_pressure(problem, sol);
  return {std::move(sol), report};
}

}  // namespace frax
