#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "frax/errors.hpp"
#include "frax/geometry.hpp"

namespace frax {

/// Symmetric 2x2 tensor (per-cell permeability).
struct SymTensor2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;

  static SymTensor2 identity(double scale = 1.0) { return {scale, 0.0, scale}; }

  double det() const { return xx * yy - xy * xy; }
  bool spd() const { return xx > 0.0 && det() > 0.0; }

  SymTensor2 inverse() const {
    double d = det();
    require(std::abs(d) > 0.0, ErrorCode::SingularTensor, "permeability tensor is singular");
    return {yy / d, -xy / d, xx / d};
  }

  Vec2 apply(const Vec2& v) const { return {xx * v.x + xy * v.y, xy * v.x + yy * v.y}; }
};

/// Deterministic 64-bit generator (splitmix64) with an explicit
/// bits-to-double mapping, so generated meshes are identical across
/// platforms and standard library versions.
class DeterministicRng {
public:
  explicit DeterministicRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Uniform in [lo,hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }

private:
  std::uint64_t state_;
};

/// Conforming triangle mesh with facet skeleton. Cells are positively
/// oriented; facet f stores its vertex pair ordered so that
/// perp(b - a) points away from facet_cells[f][0] (toward the higher-index
/// cell, or out of the domain on the boundary).
struct SimplicialMesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<SymTensor2> cell_permeability;

  // Derived topology, rebuilt by finalize().
  std::vector<std::array<int, 2>> facets;
  std::vector<std::array<int, 3>> cell_facets;  // local facet i is opposite local vertex i
  std::vector<std::array<int, 2>> facet_cells;  // {lower cell, higher cell or -1}
  std::vector<BoundaryTag> facet_boundary_tag;
  std::vector<int> facet_fracture;  // fracture id or -1

  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_facets() const { return static_cast<int>(facets.size()); }

  Vec2 vertex(int v) const { return vertices[v]; }

  double cell_area(int k) const {
    const auto& c = cells[k];
    return 0.5 * cross(vertices[c[1]] - vertices[c[0]], vertices[c[2]] - vertices[c[0]]);
  }

  Vec2 cell_centroid(int k) const {
    const auto& c = cells[k];
    return (vertices[c[0]] + vertices[c[1]] + vertices[c[2]]) / 3.0;
  }

  double facet_length(int f) const { return distance(vertices[facets[f][0]], vertices[facets[f][1]]); }

  Vec2 facet_midpoint(int f) const { return 0.5 * (vertices[facets[f][0]] + vertices[facets[f][1]]); }

  /// Unit normal pointing from facet_cells[f][0] toward facet_cells[f][1]
  /// (outward on the boundary).
  Vec2 facet_normal(int f) const {
    return normalized(perp(vertices[facets[f][1]] - vertices[facets[f][0]]));
  }

  /// +1 when facet_normal(f) is outward for cell k, -1 otherwise.
  double outward_sign(int k, int f) const { return facet_cells[f][0] == k ? 1.0 : -1.0; }

  bool is_boundary_facet(int f) const { return facet_cells[f][1] < 0; }

  double total_area() const {
    double a = 0.0;
    for (int k = 0; k < n_cells(); ++k) a += cell_area(k);
    return a;
  }

  double diameter() const {
    double xmin = std::numeric_limits<double>::max(), xmax = -xmin;
    double ymin = xmin, ymax = xmax;
    for (const Vec2& v : vertices) {
      xmin = std::min(xmin, v.x); xmax = std::max(xmax, v.x);
      ymin = std::min(ymin, v.y); ymax = std::max(ymax, v.y);
    }
    return std::hypot(xmax - xmin, ymax - ymin);
  }

  double geometry_tolerance() const { return default_geometry_tolerance(diameter()); }

  /// Rebuilds facets and incidence from vertices/cells; tags reset to
  /// untagged unless carried over by the caller.
  void finalize() {
    const int nc = n_cells();
    if (cell_permeability.empty()) cell_permeability.assign(nc, SymTensor2::identity());
    require(static_cast<int>(cell_permeability.size()) == nc, ErrorCode::InvalidArgument,
            "cell_permeability size mismatch");
    facets.clear();
    cell_facets.assign(nc, {-1, -1, -1});
    facet_cells.clear();
    std::map<std::pair<int, int>, int> facet_of;
    for (int k = 0; k < nc; ++k) {
      for (int i = 0; i < 3; ++i) {
        int a = cells[k][(i + 1) % 3];
        int b = cells[k][(i + 2) % 3];
        auto key = std::minmax(a, b);
        auto it = facet_of.find(key);
        if (it == facet_of.end()) {
          int f = static_cast<int>(facets.size());
          facet_of.emplace(key, f);
          facets.push_back({a, b});  // direction of first (lower) cell's traversal
          facet_cells.push_back({k, -1});
          cell_facets[k][i] = f;
        } else {
          int f = it->second;
          require(facet_cells[f][1] < 0, ErrorCode::InvalidArgument,
                  "facet shared by more than two cells");
          facet_cells[f][1] = k;
          cell_facets[k][i] = f;
        }
      }
    }
    facet_boundary_tag.assign(facets.size(), BoundaryTag::None);
    facet_fracture.assign(facets.size(), -1);
  }

  /// Structural validity: positive orientation, facet incidence counts and
  /// absence of duplicate vertices within tol.
  void validate(double tol = -1.0) const {
    if (tol < 0.0) tol = geometry_tolerance();
    for (int k = 0; k < n_cells(); ++k)
      require(cell_area(k) > 0.0, ErrorCode::InvalidArgument, "cell with nonpositive area");
    for (int f = 0; f < n_facets(); ++f)
      require(facet_cells[f][0] >= 0, ErrorCode::InvalidArgument, "facet without incident cell");
    // Duplicate detection via lexicographic sweep.
    std::vector<int> order(vertices.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (vertices[a].x != vertices[b].x) return vertices[a].x < vertices[b].x;
      return vertices[a].y < vertices[b].y;
    });
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      std::size_t j = i + 1;
      while (j < order.size() && vertices[order[j]].x - vertices[order[i]].x <= tol) {
        require(distance(vertices[order[i]], vertices[order[j]]) > tol, ErrorCode::InvalidArgument,
                "duplicate vertices within tolerance");
        ++j;
      }
    }
  }
};

/// Continuous piecewise-linear level set sampled at mesh vertices.
struct LevelSetField {
  std::vector<double> values;

  /// Signed distance to the supporting line of the fracture.
  static LevelSetField from_fracture(const SimplicialMesh& mesh, const Fracture& frac) {
    LevelSetField phi;
    phi.values.resize(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
      phi.values[v] = signed_line_distance(mesh.vertices[v], frac.a, frac.b);
    return phi;
  }

  /// Vertices closer to the zero set than `magnitude` are pushed to
  /// +magnitude so that no vertex value is exactly zero.
  void perturb(double magnitude) {
    for (double& v : values)
      if (std::abs(v) < magnitude) v = magnitude;
  }

  bool has_zero() const {
    for (double v : values)
      if (v == 0.0) return true;
    return false;
  }
};

inline void derive_boundary_tags(SimplicialMesh& mesh, const DomainBoundary& boundary,
                                 double tol = -1.0) {
  if (tol < 0.0) tol = mesh.geometry_tolerance();
  for (int f = 0; f < mesh.n_facets(); ++f) {
    if (!mesh.is_boundary_facet(f)) continue;
    BoundaryTag tag = boundary.classify_point(mesh.facet_midpoint(f), tol);
    require(tag != BoundaryTag::None, ErrorCode::InvalidArgument,
            "boundary facet midpoint not on the domain polygon");
    mesh.facet_boundary_tag[f] = tag;
  }
}

/// Tags every facet that lies on a fracture segment with the fracture's
/// index in the network (later fractures win on the rare shared facet).
inline void tag_fracture_facets(SimplicialMesh& mesh, const FractureNetwork& network,
                                double tol = -1.0) {
  if (tol < 0.0) tol = mesh.geometry_tolerance();
  mesh.facet_fracture.assign(mesh.n_facets(), -1);
  for (std::size_t i = 0; i < network.size(); ++i) {
    const Fracture& frac = network[i];
    for (int f = 0; f < mesh.n_facets(); ++f) {
      const Vec2 a = mesh.vertices[mesh.facets[f][0]];
      const Vec2 b = mesh.vertices[mesh.facets[f][1]];
      if (point_segment_distance(a, frac.a, frac.b) <= tol &&
          point_segment_distance(b, frac.a, frac.b) <= tol)
        mesh.facet_fracture[f] = static_cast<int>(i);
    }
  }
}

/// Red refinement: every triangle is split into four through its edge
/// midpoints. Boundary and fracture facet tags are inherited by the child
/// facets; children of cell k are cells 4k..4k+3.
inline SimplicialMesh refine_uniform(const SimplicialMesh& mesh) {
  SimplicialMesh fine;
  fine.vertices = mesh.vertices;
  const int nv = mesh.n_vertices();
  fine.vertices.resize(nv + mesh.n_facets());
  for (int f = 0; f < mesh.n_facets(); ++f) fine.vertices[nv + f] = mesh.facet_midpoint(f);

  fine.cells.reserve(4 * mesh.n_cells());
  fine.cell_permeability.reserve(4 * mesh.n_cells());
  for (int k = 0; k < mesh.n_cells(); ++k) {
    const auto& c = mesh.cells[k];
    int m0 = nv + mesh.cell_facets[k][0];  // midpoint of edge opposite vertex 0
    int m1 = nv + mesh.cell_facets[k][1];
    int m2 = nv + mesh.cell_facets[k][2];
    fine.cells.push_back({c[0], m2, m1});
    fine.cells.push_back({c[1], m0, m2});
    fine.cells.push_back({c[2], m1, m0});
    fine.cells.push_back({m0, m1, m2});
    for (int i = 0; i < 4; ++i) fine.cell_permeability.push_back(mesh.cell_permeability[k]);
  }
  fine.finalize();

  // Child facets (a,m) and (m,b) of a tagged parent facet (a,b) inherit.
  std::map<std::pair<int, int>, int> fine_facet;
  for (int f = 0; f < fine.n_facets(); ++f)
    fine_facet[std::minmax(fine.facets[f][0], fine.facets[f][1])] = f;
  for (int f = 0; f < mesh.n_facets(); ++f) {
    if (mesh.facet_boundary_tag[f] == BoundaryTag::None && mesh.facet_fracture[f] < 0) continue;
    int a = mesh.facets[f][0], b = mesh.facets[f][1], m = nv + f;
    for (auto key : {std::minmax(a, m), std::minmax(m, b)}) {
      auto it = fine_facet.find(key);
      require(it != fine_facet.end(), ErrorCode::InvalidArgument, "refinement lost a facet");
      fine.facet_boundary_tag[it->second] = mesh.facet_boundary_tag[f];
      fine.facet_fracture[it->second] = mesh.facet_fracture[f];
    }
  }
  return fine;
}

namespace detail {

struct CellSoup {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<SymTensor2> perm;
};

inline int find_vertex_near(const CellSoup& soup, const Vec2& p, double tol) {
  for (std::size_t v = 0; v < soup.vertices.size(); ++v)
    if (distance(soup.vertices[v], p) <= tol) return static_cast<int>(v);
  return -1;
}

/// Splits cells adjacent to point p: p strictly inside a cell triggers a
/// 3-way split, p in the interior of an edge splits both incident cells.
inline void insert_point(CellSoup& soup, const Vec2& p, double tol) {
  if (find_vertex_near(soup, p, tol) >= 0) return;
  int pid = static_cast<int>(soup.vertices.size());

  // Edge containment first: collect every cell whose edge holds p.
  std::vector<std::array<int, 3>> out_cells;
  std::vector<SymTensor2> out_perm;
  bool on_edge = false;
  for (std::size_t k = 0; k < soup.cells.size(); ++k) {
    const auto& c = soup.cells[k];
    int split_edge = -1;
    for (int i = 0; i < 3 && split_edge < 0; ++i) {
      const Vec2 u = soup.vertices[c[(i + 1) % 3]];
      const Vec2 v = soup.vertices[c[(i + 2) % 3]];
      if (point_segment_distance(p, u, v) <= tol) split_edge = i;
    }
    if (split_edge >= 0) {
      on_edge = true;
      int w = c[split_edge];
      int u = c[(split_edge + 1) % 3];
      int v = c[(split_edge + 2) % 3];
      out_cells.push_back({u, pid, w});
      out_cells.push_back({pid, v, w});
      out_perm.push_back(soup.perm[k]);
      out_perm.push_back(soup.perm[k]);
    } else {
      out_cells.push_back(c);
      out_perm.push_back(soup.perm[k]);
    }
  }
  if (on_edge) {
    soup.vertices.push_back(p);
    soup.cells = std::move(out_cells);
    soup.perm = std::move(out_perm);
    return;
  }

  // Strict interior of some cell.
  for (std::size_t k = 0; k < soup.cells.size(); ++k) {
    const auto& c = soup.cells[k];
    const Vec2 A = soup.vertices[c[0]], B = soup.vertices[c[1]], C = soup.vertices[c[2]];
    double s0 = cross(B - A, p - A);
    double s1 = cross(C - B, p - B);
    double s2 = cross(A - C, p - C);
    if (s0 > 0.0 && s1 > 0.0 && s2 > 0.0) {
      soup.vertices.push_back(p);
      SymTensor2 km = soup.perm[k];
      std::array<int, 3> cc = c;
      soup.cells[k] = {cc[0], cc[1], pid};
      soup.cells.push_back({cc[1], cc[2], pid});
      soup.cells.push_back({cc[2], cc[0], pid});
      soup.perm.push_back(km);
      soup.perm.push_back(km);
      return;
    }
  }
  raise(ErrorCode::InvalidArgument, "fracture endpoint lies outside the mesh");
}

}  // namespace detail

/// Cuts the mesh along a fracture segment so that the output mesh contains
/// the segment in its facet union (the 2D analog of the level-set
/// immersing procedure: tips are inserted as vertices, cut edges get a cut
/// vertex at the level-set zero, a triangle crossed through two edges
/// splits into three with the quadrilateral part divided across its
/// shorter diagonal). Existing vertices are never moved; per-cell
/// permeability is inherited from the parent cell. Boundary tags are
/// carried over; fracture facet tags should be re-derived afterwards via
/// tag_fracture_facets.
inline SimplicialMesh immerse_fracture(const SimplicialMesh& mesh, const Fracture& frac,
                                       double tol = -1.0) {
  if (tol < 0.0) tol = mesh.geometry_tolerance();
  const double diam = mesh.diameter();
  const double perturb_magnitude = 1e-12 * diam;
  const double tol_area = 1e-14 * mesh.total_area();

  // Boundary facets are remembered geometrically to re-tag the result.
  struct TaggedSegment {
    Vec2 a, b;
    BoundaryTag tag;
  };
  std::vector<TaggedSegment> old_boundary;
  for (int f = 0; f < mesh.n_facets(); ++f)
    if (mesh.is_boundary_facet(f) && mesh.facet_boundary_tag[f] != BoundaryTag::None)
      old_boundary.push_back({mesh.vertices[mesh.facets[f][0]], mesh.vertices[mesh.facets[f][1]],
                              mesh.facet_boundary_tag[f]});
  std::vector<std::pair<Vec2, Vec2>> old_fracture_facets;
  std::vector<int> old_fracture_ids;
  for (int f = 0; f < mesh.n_facets(); ++f)
    if (mesh.facet_fracture[f] >= 0) {
      old_fracture_facets.push_back({mesh.vertices[mesh.facets[f][0]], mesh.vertices[mesh.facets[f][1]]});
      old_fracture_ids.push_back(mesh.facet_fracture[f]);
    }

  detail::CellSoup soup{mesh.vertices, mesh.cells, mesh.cell_permeability};

  // Step 0: make both tips mesh vertices.
  detail::insert_point(soup, frac.a, tol);
  detail::insert_point(soup, frac.b, tol);

  // Step (i): level set of the supporting line, perturbed away from zero.
  const Vec2 tangent = frac.tangent();
  const double len = frac.length();
  std::vector<double> phi(soup.vertices.size());
  for (std::size_t v = 0; v < soup.vertices.size(); ++v)
    phi[v] = signed_line_distance(soup.vertices[v], frac.a, frac.b);
  for (double& p : phi)
    if (std::abs(p) < perturb_magnitude) p = perturb_magnitude;

  auto tangential = [&](const Vec2& p) { return dot(p - frac.a, tangent); };
  auto on_segment = [&](const Vec2& p) {
    double t = tangential(p);
    return std::abs(signed_line_distance(p, frac.a, frac.b)) <= tol && t >= -tol && t <= len + tol;
  };

  // Step (ii): cut edges have opposite level-set signs and a zero inside
  // the segment extent. A zero landing within tol of an edge endpoint is
  // merged into that vertex instead of creating a near-duplicate.
  std::map<std::pair<int, int>, int> cut_of_edge;  // edge -> new cut vertex
  for (std::size_t k = 0; k < soup.cells.size(); ++k) {
    for (int i = 0; i < 3; ++i) {
      int u = soup.cells[k][(i + 1) % 3];
      int v = soup.cells[k][(i + 2) % 3];
      auto key = std::minmax(u, v);
      if (cut_of_edge.count(key)) continue;
      if (phi[u] * phi[v] >= 0.0) continue;
      double theta = phi[u] / (phi[u] - phi[v]);
      Vec2 x = soup.vertices[u] + theta * (soup.vertices[v] - soup.vertices[u]);
      double t = tangential(x);
      if (t < -tol || t > len + tol) continue;
      if (distance(x, soup.vertices[u]) <= tol || distance(x, soup.vertices[v]) <= tol) continue;
      int xid = static_cast<int>(soup.vertices.size());
      soup.vertices.push_back(x);
      phi.push_back(perturb_magnitude);  // the cut vertex sits on the zero set
      cut_of_edge.emplace(key, xid);
    }
  }

  // Steps (iii)/(iv), 2D analog: split the cut cells.
  std::vector<std::array<int, 3>> new_cells;
  std::vector<SymTensor2> new_perm;
  new_cells.reserve(soup.cells.size() + 2 * cut_of_edge.size());
  auto emit = [&](int a, int b, int c, const SymTensor2& km) {
    double area =
        0.5 * cross(soup.vertices[b] - soup.vertices[a], soup.vertices[c] - soup.vertices[a]);
    require(area > tol_area, ErrorCode::DegenerateCut, "cut produced a degenerate sub-triangle");
    new_cells.push_back({a, b, c});
    new_perm.push_back(km);
  };

  for (std::size_t k = 0; k < soup.cells.size(); ++k) {
    const auto& c = soup.cells[k];
    const SymTensor2& km = soup.perm[k];
    int cut[3] = {-1, -1, -1};  // cut vertex on the edge opposite corner i
    int n_cut = 0;
    for (int i = 0; i < 3; ++i) {
      auto it = cut_of_edge.find(std::minmax(c[(i + 1) % 3], c[(i + 2) % 3]));
      if (it != cut_of_edge.end()) {
        cut[i] = it->second;
        ++n_cut;
      }
    }
    bool corner_on[3];
    int n_corner = 0;
    for (int i = 0; i < 3; ++i) {
      corner_on[i] = on_segment(soup.vertices[c[i]]);
      n_corner += corner_on[i] ? 1 : 0;
    }

    if (n_cut == 2) {
      // Apex = the corner shared by the two cut edges = the corner whose
      // opposite edge is uncut.
      int apex = 0;
      while (cut[apex] >= 0) ++apex;
      int A = c[apex], B = c[(apex + 1) % 3], C = c[(apex + 2) % 3];
      int X = cut[(apex + 2) % 3];  // on edge (A,B)
      int Y = cut[(apex + 1) % 3];  // on edge (C,A)
      emit(A, X, Y, km);
      // Quad (X,B,C,Y): shorter diagonal bounds the aspect ratio growth.
      if (distance(soup.vertices[X], soup.vertices[C]) <=
          distance(soup.vertices[B], soup.vertices[Y])) {
        emit(X, B, C, km);
        emit(X, C, Y, km);
      } else {
        emit(X, B, Y, km);
        emit(B, C, Y, km);
      }
    } else if (n_cut == 1) {
      int i = 0;
      while (cut[i] < 0) ++i;
      int V = c[i], D = c[(i + 1) % 3], E = c[(i + 2) % 3];
      int X = cut[i];
      if (!corner_on[i] || distance(soup.vertices[X], soup.vertices[V]) <= tol) {
        // The crossing only grazes this cell (clipped at a tip); keep it.
        new_cells.push_back(c);
        new_perm.push_back(km);
      } else {
        emit(V, D, X, km);
        emit(V, X, E, km);
      }
    } else {
      new_cells.push_back(c);
      new_perm.push_back(km);
    }
  }

  SimplicialMesh out;
  out.vertices = std::move(soup.vertices);
  out.cells = std::move(new_cells);
  out.cell_permeability = std::move(new_perm);
  out.finalize();

  // Restore boundary tags: a boundary facet of the result lies inside
  // exactly one boundary facet of the input.
  for (int f = 0; f < out.n_facets(); ++f) {
    if (!out.is_boundary_facet(f)) continue;
    Vec2 m = out.facet_midpoint(f);
    for (const auto& seg : old_boundary) {
      if (point_segment_distance(m, seg.a, seg.b) <= tol) {
        out.facet_boundary_tag[f] = seg.tag;
        break;
      }
    }
  }
  // Restore fracture tags of previously immersed fractures.
  for (int f = 0; f < out.n_facets(); ++f) {
    Vec2 a = out.vertices[out.facets[f][0]];
    Vec2 b = out.vertices[out.facets[f][1]];
    for (std::size_t s = 0; s < old_fracture_facets.size(); ++s) {
      if (point_segment_distance(a, old_fracture_facets[s].first, old_fracture_facets[s].second) <= tol &&
          point_segment_distance(b, old_fracture_facets[s].first, old_fracture_facets[s].second) <= tol) {
        out.facet_fracture[f] = old_fracture_ids[s];
        break;
      }
    }
  }
  return out;
}

/// True iff the fracture segment is covered by mesh facets within tol.
inline bool check_conforming(const SimplicialMesh& mesh, const Fracture& frac, double tol = -1.0) {
  if (tol < 0.0) tol = mesh.geometry_tolerance();
  const double len = frac.length();
  const Vec2 tangent = frac.tangent();
  std::vector<std::pair<double, double>> intervals;
  for (int f = 0; f < mesh.n_facets(); ++f) {
    const Vec2 a = mesh.vertices[mesh.facets[f][0]];
    const Vec2 b = mesh.vertices[mesh.facets[f][1]];
    if (point_segment_distance(a, frac.a, frac.b) > tol ||
        point_segment_distance(b, frac.a, frac.b) > tol)
      continue;
    double t0 = dot(a - frac.a, tangent);
    double t1 = dot(b - frac.a, tangent);
    intervals.push_back(std::minmax(t0, t1));
  }
  std::sort(intervals.begin(), intervals.end());
  double covered = 0.0;
  for (const auto& [t0, t1] : intervals) {
    if (t0 > covered + tol) return false;
    covered = std::max(covered, t1);
  }
  return covered >= len - tol;
}

enum class SkeletonVertexClass { Interior, CC, CB, CM_D, CM_N, CI };

/// One facet of the bulk mesh that carries a conductive fracture; the
/// vertex pair is ordered along the fracture tangent.
struct FractureSegment {
  int facet = -1;
  int v0 = -1;  // tail (smaller tangential coordinate)
  int v1 = -1;
  int fracture = -1;
  double length = 0.0;
  double eps_kc = 0.0;  // epsilon * K_c of the parent fracture
};

/// T_h^c with its vertex skeleton E_h^c and the per-vertex classification
/// against the network's intersection sets.
struct FractureMesh {
  std::vector<FractureSegment> segments;
  std::vector<int> skeleton_vertices;               // bulk-mesh vertex ids
  std::vector<SkeletonVertexClass> vertex_class;    // parallel to skeleton_vertices
  std::unordered_map<int, int> skeleton_index_of;   // bulk vertex id -> skeleton index

  int n_segments() const { return static_cast<int>(segments.size()); }
  int n_skeleton_vertices() const { return static_cast<int>(skeleton_vertices.size()); }

  double total_length() const {
    double s = 0.0;
    for (const auto& seg : segments) s += seg.length;
    return s;
  }
};

/// Collects the facets fitted to each conductive fracture, verifies full
/// coverage and classifies the skeleton vertices. Raises NotFitted when a
/// conductive fracture is not covered by facets or an intersection point
/// is not a mesh vertex.
inline FractureMesh extract_fracture_mesh(const SimplicialMesh& mesh, const FractureNetwork& network,
                                          const IntersectionSets& sets, double tol = -1.0) {
  if (tol < 0.0) tol = mesh.geometry_tolerance();
  FractureMesh fm;

  for (std::size_t i = 0; i < network.size(); ++i) {
    const Fracture& frac = network[i];
    if (!frac.conductive()) continue;
    const Vec2 tangent = frac.tangent();
    const double len = frac.length();

    std::vector<std::pair<double, int>> chain;  // (start param, facet)
    for (int f = 0; f < mesh.n_facets(); ++f) {
      if (mesh.facet_fracture[f] != static_cast<int>(i)) continue;
      const Vec2 a = mesh.vertices[mesh.facets[f][0]];
      const Vec2 b = mesh.vertices[mesh.facets[f][1]];
      require(point_segment_distance(a, frac.a, frac.b) <= tol &&
                  point_segment_distance(b, frac.a, frac.b) <= tol,
              ErrorCode::NotFitted, "tagged facet does not lie on its fracture");
      chain.push_back({std::min(dot(a - frac.a, tangent), dot(b - frac.a, tangent)), f});
    }
    std::sort(chain.begin(), chain.end());

    double covered = 0.0;
    for (const auto& [t0, f] : chain) {
      if (t0 > covered + tol)
        raise(ErrorCode::NotFitted, "fracture " + std::to_string(i) + " has a coverage gap at s=" +
                                        std::to_string(covered));
      int va = mesh.facets[f][0], vb = mesh.facets[f][1];
      double ta = dot(mesh.vertices[va] - frac.a, tangent);
      double tb = dot(mesh.vertices[vb] - frac.a, tangent);
      if (ta > tb) {
        std::swap(va, vb);
        std::swap(ta, tb);
      }
      FractureSegment seg;
      seg.facet = f;
      seg.v0 = va;
      seg.v1 = vb;
      seg.fracture = static_cast<int>(i);
      seg.length = mesh.facet_length(f);
      seg.eps_kc = frac.thickness * frac.tangential_conductivity;
      fm.segments.push_back(seg);
      covered = std::max(covered, tb);
    }
    if (covered < len - tol)
      raise(ErrorCode::NotFitted, "fracture " + std::to_string(i) + " not covered beyond s=" +
                                      std::to_string(covered));
  }

  for (const auto& seg : fm.segments) {
    for (int v : {seg.v0, seg.v1}) {
      if (!fm.skeleton_index_of.count(v)) {
        fm.skeleton_index_of.emplace(v, static_cast<int>(fm.skeleton_vertices.size()));
        fm.skeleton_vertices.push_back(v);
      }
    }
  }

  fm.vertex_class.assign(fm.skeleton_vertices.size(), SkeletonVertexClass::Interior);
  for (std::size_t s = 0; s < fm.skeleton_vertices.size(); ++s) {
    const Vec2 p = mesh.vertices[fm.skeleton_vertices[s]];
    if (IntersectionSets::contains(sets.cm_d, p, tol)) fm.vertex_class[s] = SkeletonVertexClass::CM_D;
    else if (IntersectionSets::contains(sets.cm_n, p, tol)) fm.vertex_class[s] = SkeletonVertexClass::CM_N;
    else if (IntersectionSets::contains(sets.cb, p, tol)) fm.vertex_class[s] = SkeletonVertexClass::CB;
    else if (IntersectionSets::contains(sets.cc, p, tol)) fm.vertex_class[s] = SkeletonVertexClass::CC;
    else if (IntersectionSets::contains(sets.ci, p, tol)) fm.vertex_class[s] = SkeletonVertexClass::CI;
  }

  // Every classified intersection point must be a skeleton vertex; the
  // penalty and junction constraints live on these vertices.
  auto check_points = [&](const std::vector<Vec2>& pts) {
    for (const Vec2& p : pts) {
      bool found = false;
      for (int v : fm.skeleton_vertices)
        if (distance(mesh.vertices[v], p) <= tol) {
          found = true;
          break;
        }
      require(found, ErrorCode::NotFitted, "intersection point is not a mesh vertex");
    }
  };
  check_points(sets.cc);
  check_points(sets.cb);
  return fm;
}

/// Structured triangulation of an axis-aligned rectangle; interior
/// vertices can be jittered deterministically (fraction of the local cell
/// size) to avoid alignment with fracture lines.
inline SimplicialMesh structured_mesh(int nx, int ny, Vec2 lo, Vec2 hi, double jitter = 0.0,
                                      std::uint64_t seed = 0) {
  require(nx >= 1 && ny >= 1, ErrorCode::InvalidArgument, "structured_mesh needs nx,ny >= 1");
  SimplicialMesh mesh;
  const double hx = (hi.x - lo.x) / nx;
  const double hy = (hi.y - lo.y) / ny;
  DeterministicRng rng(seed ^ 0x5eedULL);
  mesh.vertices.reserve((nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) {
      Vec2 p{lo.x + i * hx, lo.y + j * hy};
      if (jitter > 0.0 && i > 0 && i < nx && j > 0 && j < ny) {
        p.x += jitter * hx * (2.0 * rng.uniform() - 1.0);
        p.y += jitter * hy * (2.0 * rng.uniform() - 1.0);
      }
      mesh.vertices.push_back(p);
    }
  }
  auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        mesh.cells.push_back({v00, v10, v11});
        mesh.cells.push_back({v00, v11, v01});
      } else {
        mesh.cells.push_back({v10, v11, v01});
        mesh.cells.push_back({v10, v01, v00});
      }
    }
  }
  mesh.finalize();
  return mesh;
}

/// Mesh text format:
///   VERTICES <n>   followed by n lines "x y"
///   CELLS <m>      followed by m lines "i j k"
///   BOUNDARY <b>   optional, lines "i j tag" with tag D or N
///   FRACFACETS <f> optional, lines "i j fracture_id"
inline SimplicialMesh read_mesh_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open mesh file: " + path);
  SimplicialMesh mesh;
  std::string keyword;
  std::size_t n = 0;
  in >> keyword >> n;
  require(in.good() && keyword == "VERTICES", ErrorCode::IoError, "expected 'VERTICES <n>'");
  mesh.vertices.resize(n);
  for (auto& v : mesh.vertices) in >> v.x >> v.y;
  in >> keyword >> n;
  require(!in.fail() && keyword == "CELLS", ErrorCode::IoError, "expected 'CELLS <m>'");
  mesh.cells.resize(n);
  for (auto& c : mesh.cells) in >> c[0] >> c[1] >> c[2];
  require(!in.fail(), ErrorCode::IoError, "truncated mesh file: " + path);
  mesh.finalize();

  std::map<std::pair<int, int>, int> facet_of;
  for (int f = 0; f < mesh.n_facets(); ++f)
    facet_of[std::minmax(mesh.facets[f][0], mesh.facets[f][1])] = f;

  while (in >> keyword >> n) {
    if (keyword == "BOUNDARY") {
      for (std::size_t r = 0; r < n; ++r) {
        int i, j;
        std::string tag;
        in >> i >> j >> tag;
        auto it = facet_of.find(std::minmax(i, j));
        require(it != facet_of.end(), ErrorCode::IoError, "BOUNDARY line names a non-facet");
        require(tag == "D" || tag == "N", ErrorCode::IoError, "boundary tag must be D or N");
        mesh.facet_boundary_tag[it->second] =
            tag == "D" ? BoundaryTag::Dirichlet : BoundaryTag::Neumann;
      }
    } else if (keyword == "FRACFACETS") {
      for (std::size_t r = 0; r < n; ++r) {
        int i, j, id;
        in >> i >> j >> id;
        auto it = facet_of.find(std::minmax(i, j));
        require(it != facet_of.end(), ErrorCode::IoError, "FRACFACETS line names a non-facet");
        mesh.facet_fracture[it->second] = id;
      }
    } else {
      raise(ErrorCode::IoError, "unknown mesh file section: " + keyword);
    }
    require(!in.fail(), ErrorCode::IoError, "truncated mesh file: " + path);
  }
  return mesh;
}

inline void write_mesh_file(const std::string& path, const SimplicialMesh& mesh) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write mesh file: " + path);
  char line[128];
  out << "VERTICES " << mesh.n_vertices() << "\n";
  for (const Vec2& v : mesh.vertices) {
    std::snprintf(line, sizeof(line), "%.17g %.17g\n", v.x, v.y);
    out << line;
  }
  out << "CELLS " << mesh.n_cells() << "\n";
  for (const auto& c : mesh.cells) out << c[0] << " " << c[1] << " " << c[2] << "\n";

  int n_tagged = 0;
  for (int f = 0; f < mesh.n_facets(); ++f)
    if (mesh.facet_boundary_tag[f] != BoundaryTag::None) ++n_tagged;
  if (n_tagged > 0) {
    out << "BOUNDARY " << n_tagged << "\n";
    for (int f = 0; f < mesh.n_facets(); ++f)
      if (mesh.facet_boundary_tag[f] != BoundaryTag::None)
        out << mesh.facets[f][0] << " " << mesh.facets[f][1] << " "
            << (mesh.facet_boundary_tag[f] == BoundaryTag::Dirichlet ? "D" : "N") << "\n";
  }
  int n_frac = 0;
  for (int f = 0; f < mesh.n_facets(); ++f)
    if (mesh.facet_fracture[f] >= 0) ++n_frac;
  if (n_frac > 0) {
    out << "FRACFACETS " << n_frac << "\n";
    for (int f = 0; f < mesh.n_facets(); ++f)
      if (mesh.facet_fracture[f] >= 0)
        out << mesh.facets[f][0] << " " << mesh.facets[f][1] << " " << mesh.facet_fracture[f] << "\n";
  }
}

}  // namespace frax
