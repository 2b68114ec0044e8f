#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "frax/errors.hpp"

namespace frax {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
};

inline Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec2& a, const Vec2& b) { return norm(a - b); }
/// Rotation of v by -90 degrees; for a facet direction a->b this is the
/// normal whose sign convention the mesh fixes per facet.
inline Vec2 perp(const Vec2& v) { return {v.y, -v.x}; }
inline Vec2 normalized(const Vec2& v) {
  double n = norm(v);
  return n > 0.0 ? v / n : Vec2{0.0, 0.0};
}

/// Distance from point p to the closed segment [a,b].
inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 d = b - a;
  double len2 = dot(d, d);
  if (len2 == 0.0) return distance(p, a);
  double t = std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
  return distance(p, a + t * d);
}

/// Signed distance from p to the line through a,b; positive on the side the
/// (-90 deg) normal of a->b points to.
inline double signed_line_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 n = normalized(perp(b - a));
  return dot(p - a, n);
}

enum class FractureKind { Conductive, Blocking };

/// A straight fracture segment. The conductivity used depends on the kind:
/// tangential_conductivity for conductive fractures, normal_conductivity for
/// blocking ones.
struct Fracture {
  Vec2 a;
  Vec2 b;
  double thickness = 0.0;                // epsilon
  double tangential_conductivity = 0.0;  // K_c, conductive kind
  double normal_conductivity = 0.0;      // K_b, blocking kind
  FractureKind kind = FractureKind::Conductive;

  double length() const { return distance(a, b); }
  Vec2 tangent() const { return normalized(b - a); }
  /// Unit normal fixed by the endpoint order (rotate tangent by -90 deg).
  Vec2 unit_normal() const { return perp(tangent()); }
  bool conductive() const { return kind == FractureKind::Conductive; }

  void validate() const {
    require(length() > 0.0, ErrorCode::InvalidArgument, "fracture endpoints coincide");
    require(thickness > 0.0, ErrorCode::InvalidArgument, "fracture thickness must be positive");
    double k = conductive() ? tangential_conductivity : normal_conductivity;
    require(k > 0.0, ErrorCode::InvalidArgument, "fracture conductivity must be positive");
  }

  /// In-plane outward normal at an endpoint: minus the tangent at a, plus at b.
  Vec2 outward_tangent_at(int endpoint) const { return endpoint == 0 ? -1.0 * tangent() : tangent(); }
};

using FractureNetwork = std::vector<Fracture>;

enum class BoundaryTag { None, Dirichlet, Neumann };

/// Domain boundary as a simple closed polygon; each edge i runs from
/// vertex i to vertex (i+1) mod n and carries exactly one tag.
struct DomainBoundary {
  std::vector<Vec2> vertices;
  std::vector<BoundaryTag> edge_tags;

  std::size_t edge_count() const { return vertices.size(); }
  Vec2 edge_start(std::size_t e) const { return vertices[e]; }
  Vec2 edge_end(std::size_t e) const { return vertices[(e + 1) % vertices.size()]; }

  void validate() const {
    require(vertices.size() >= 3, ErrorCode::InvalidArgument, "boundary polygon needs >= 3 vertices");
    require(edge_tags.size() == vertices.size(), ErrorCode::InvalidArgument,
            "boundary polygon needs one tag per edge");
    for (BoundaryTag t : edge_tags)
      require(t != BoundaryTag::None, ErrorCode::InvalidArgument, "every boundary edge must be tagged");
  }

  double diameter() const {
    double d = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i)
      for (std::size_t j = i + 1; j < vertices.size(); ++j)
        d = std::max(d, distance(vertices[i], vertices[j]));
    return d;
  }

  /// Tag of the nearest polygon edge within tol, or None. Raises
  /// AmbiguousBoundaryPoint if p sits within tol of a junction between a
  /// Dirichlet and a Neumann edge.
  BoundaryTag classify_point(const Vec2& p, double tol) const {
    BoundaryTag found = BoundaryTag::None;
    bool mixed = false;
    for (std::size_t e = 0; e < edge_count(); ++e) {
      if (point_segment_distance(p, edge_start(e), edge_end(e)) <= tol) {
        if (found == BoundaryTag::None) found = edge_tags[e];
        else if (found != edge_tags[e]) mixed = true;
      }
    }
    if (mixed)
      raise(ErrorCode::AmbiguousBoundaryPoint,
            "point lies within tolerance of a Dirichlet/Neumann junction");
    return found;
  }
};

/// Classified intersection points of the conductive part of a network.
/// The five sets are pairwise disjoint and together exhaust all conductive
/// endpoints and crossing points.
struct IntersectionSets {
  std::vector<Vec2> cc;    // conductive x conductive crossings (incl. T-junctions)
  std::vector<Vec2> cb;    // conductive x blocking crossings
  std::vector<Vec2> cm_d;  // conductive endpoints on the Dirichlet boundary
  std::vector<Vec2> cm_n;  // conductive endpoints on the Neumann boundary
  std::vector<Vec2> ci;    // interior conductive tips

  std::size_t total() const { return cc.size() + cb.size() + cm_d.size() + cm_n.size() + ci.size(); }

  static bool contains(const std::vector<Vec2>& set, const Vec2& p, double tol) {
    for (const Vec2& q : set)
      if (distance(p, q) <= tol) return true;
    return false;
  }
};

/// Transversal intersection of two segments, inclusive of endpoints up to
/// tol. Returns nullopt for disjoint or parallel non-overlapping segments;
/// raises OverlappingFractures when the segments are collinear with an
/// overlap of positive length.
inline std::optional<Vec2> segment_intersection(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                                                const Vec2& b1, double tol) {
  Vec2 da = a1 - a0;
  Vec2 db = b1 - b0;
  double denom = cross(da, db);
  double la = norm(da);
  double lb = norm(db);
  require(la > 0.0 && lb > 0.0, ErrorCode::InvalidArgument, "degenerate segment");

  if (std::abs(denom) <= tol * la * lb) {
    // (Near-)parallel segments.
    bool collinear = std::abs(cross(b0 - a0, da)) <= tol * la && std::abs(cross(b1 - a0, da)) <= tol * la;
    if (!collinear) {
      // A near-tangential contact cannot be resolved into a transversal
      // crossing; reject it instead of guessing.
      double gap = std::min(std::min(point_segment_distance(b0, a0, a1),
                                     point_segment_distance(b1, a0, a1)),
                            std::min(point_segment_distance(a0, b0, b1),
                                     point_segment_distance(a1, b0, b1)));
      if (gap <= tol)
        raise(ErrorCode::OverlappingFractures, "near-tangential segment contact");
      return std::nullopt;
    }
    double t0 = dot(b0 - a0, da) / (la * la);
    double t1 = dot(b1 - a0, da) / (la * la);
    if (t0 > t1) std::swap(t0, t1);
    double lo = std::max(0.0, t0);
    double hi = std::min(1.0, t1);
    if ((hi - lo) * la > tol)
      raise(ErrorCode::OverlappingFractures, "collinear segments overlap");
    if (hi - lo >= 0.0 && hi >= 0.0 && lo <= 1.0) {
      // Touching at a single point (within tol) is an end-to-end junction.
      double t = 0.5 * (lo + hi);
      return a0 + t * da;
    }
    return std::nullopt;
  }

  double t = cross(b0 - a0, db) / denom;
  double s = cross(b0 - a0, da) / denom;
  double tol_t = tol / la;  // endpoint inclusion measured in length units
  double tol_s = tol / lb;
  if (t < -tol_t || t > 1.0 + tol_t || s < -tol_s || s > 1.0 + tol_s) return std::nullopt;
  t = std::clamp(t, 0.0, 1.0);
  return a0 + t * da;
}

namespace detail {

inline void push_unique(std::vector<Vec2>& set, const Vec2& p, double tol) {
  if (!IntersectionSets::contains(set, p, tol)) set.push_back(p);
}

}  // namespace detail

/// Default geometric tolerance: 1e-10 of the domain diameter.
inline double default_geometry_tolerance(double domain_diameter) { return 1e-10 * domain_diameter; }

/// Computes the intersection sets of a fracture network inside a tagged
/// domain boundary. Classification priority for a point that qualifies for
/// several sets: boundary contact first (Dirichlet/Neumann per the touched
/// edge), then conductive-blocking, then conductive-conductive, then
/// interior tip.
inline IntersectionSets classify_intersections(const FractureNetwork& network,
                                               const DomainBoundary& boundary, double tol = -1.0) {
  boundary.validate();
  for (const Fracture& f : network) f.validate();
  if (tol < 0.0) tol = default_geometry_tolerance(boundary.diameter());

  IntersectionSets sets;
  const std::size_t n = network.size();

  // Candidate points on each conductive fracture: its endpoints plus every
  // crossing with another fracture.
  for (std::size_t i = 0; i < n; ++i) {
    if (!network[i].conductive()) continue;
    std::vector<std::pair<Vec2, bool>> points;  // point, crosses_blocking
    points.push_back({network[i].a, false});
    points.push_back({network[i].b, false});
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      auto p = segment_intersection(network[i].a, network[i].b, network[j].a, network[j].b, tol);
      if (p) points.push_back({*p, !network[j].conductive()});
    }
    for (auto& [p, crosses_blocking] : points) {
      BoundaryTag bt = boundary.classify_point(p, tol);
      if (bt == BoundaryTag::Dirichlet) {
        detail::push_unique(sets.cm_d, p, tol);
        continue;
      }
      if (bt == BoundaryTag::Neumann) {
        detail::push_unique(sets.cm_n, p, tol);
        continue;
      }
      if (crosses_blocking) {
        detail::push_unique(sets.cb, p, tol);
        continue;
      }
      // Interior point: a crossing with another conductive fracture (or a
      // T-junction endpoint landing on one) goes to cc, a lone endpoint to ci.
      bool on_other_conductive = false;
      for (std::size_t j = 0; j < n && !on_other_conductive; ++j) {
        if (j == i || !network[j].conductive()) continue;
        if (point_segment_distance(p, network[j].a, network[j].b) <= tol) on_other_conductive = true;
      }
      if (on_other_conductive) detail::push_unique(sets.cc, p, tol);
      else detail::push_unique(sets.ci, p, tol);
    }
  }

  // A point classified into a boundary or cb set must not reappear in a
  // weaker set (it can be reached from several fractures).
  auto strip = [&](std::vector<Vec2>& weaker, const std::vector<Vec2>& stronger) {
    std::erase_if(weaker, [&](const Vec2& p) { return IntersectionSets::contains(stronger, p, tol); });
  };
  strip(sets.cb, sets.cm_d);
  strip(sets.cb, sets.cm_n);
  strip(sets.cc, sets.cm_d);
  strip(sets.cc, sets.cm_n);
  strip(sets.cc, sets.cb);
  strip(sets.ci, sets.cm_d);
  strip(sets.ci, sets.cm_n);
  strip(sets.ci, sets.cb);
  strip(sets.ci, sets.cc);
  return sets;
}

/// Reads a fracture network file:
///   FRACTURES <n>
///   x0 y0 x1 y1 thickness kind k_value     (kind C or B)
inline FractureNetwork read_fracture_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingGeometryFile, "cannot open fracture file: " + path);
  std::string keyword;
  std::size_t n = 0;
  in >> keyword >> n;
  require(in.good() && keyword == "FRACTURES", ErrorCode::IoError,
          "fracture file must start with 'FRACTURES <n>': " + path);
  FractureNetwork network;
  network.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Fracture f;
    std::string kind;
    double k_value = 0.0;
    in >> f.a.x >> f.a.y >> f.b.x >> f.b.y >> f.thickness >> kind >> k_value;
    require(in.good() || in.eof(), ErrorCode::IoError, "truncated fracture file: " + path);
    require(kind == "C" || kind == "B", ErrorCode::IoError, "fracture kind must be C or B: " + path);
    if (kind == "C") {
      f.kind = FractureKind::Conductive;
      f.tangential_conductivity = k_value;
    } else {
      f.kind = FractureKind::Blocking;
      f.normal_conductivity = k_value;
    }
    f.validate();
    network.push_back(f);
  }
  return network;
}

inline void write_fracture_file(const std::string& path, const FractureNetwork& network) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::IoError, "cannot write fracture file: " + path);
  out << "FRACTURES " << network.size() << "\n";
  char line[256];
  for (const Fracture& f : network) {
    double k = f.conductive() ? f.tangential_conductivity : f.normal_conductivity;
    std::snprintf(line, sizeof(line), "%.17g %.17g %.17g %.17g %.17g %c %.17g\n", f.a.x, f.a.y, f.b.x,
                  f.b.y, f.thickness, f.conductive() ? 'C' : 'B', k);
    out << line;
  }
}

}  // namespace frax
