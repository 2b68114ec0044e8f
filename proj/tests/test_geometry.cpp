#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>

#include "frax/geometry.hpp"
#include "frax/mesh.hpp"
#include "oracles.hpp"

using namespace frax;

namespace {

Fracture conductive(Vec2 a, Vec2 b, double eps = 1e-4, double kc = 1e4) {
  Fracture f;
  f.a = a;
  f.b = b;
  f.thickness = eps;
  f.tangential_conductivity = kc;
  f.kind = FractureKind::Conductive;
  return f;
}

Fracture blocking(Vec2 a, Vec2 b, double eps = 1e-4, double kb = 1e-4) {
  Fracture f;
  f.a = a;
  f.b = b;
  f.thickness = eps;
  f.normal_conductivity = kb;
  f.kind = FractureKind::Blocking;
  return f;
}

DomainBoundary unit_square_boundary(BoundaryTag bottom, BoundaryTag right, BoundaryTag top,
                                    BoundaryTag left) {
  DomainBoundary b;
  b.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  b.edge_tags = {bottom, right, top, left};
  return b;
}

bool near(const Vec2& p, const Vec2& q, double tol = 1e-12) { return distance(p, q) <= tol; }

}  // namespace

TEST_CASE("segment_intersection: crossing diagonals") {
  auto p = segment_intersection({0, 0}, {1, 1}, {0, 1}, {1, 0}, 1e-10);
  REQUIRE(p.has_value());
  CHECK(near(*p, {0.5, 0.5}));
}

TEST_CASE("segment_intersection: parallel disjoint") {
  CHECK_FALSE(segment_intersection({0, 0}, {1, 0}, {2, 1}, {3, 1}, 1e-10).has_value());
}

TEST_CASE("segment_intersection: T contact") {
  // Solving the 2x2 system by hand: (t, 0) = (1, -1 + 4s) gives t=1/2 of
  // the first segment, s=1/4 of the second, point (1, 0).
  auto p = segment_intersection({0, 0}, {2, 0}, {1, -1}, {1, 3}, 1e-10);
  REQUIRE(p.has_value());
  CHECK(near(*p, {1.0, 0.0}));
}

TEST_CASE("segment_intersection: collinear overlap raises") {
  CHECK_THROWS_MATCHES(segment_intersection({0, 0}, {2, 0}, {1, 0}, {3, 0}, 1e-10), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::OverlappingFractures;
                       }));
}

TEST_CASE("segment_intersection: near-tangential contact raises") {
  CHECK_THROWS_MATCHES(segment_intersection({0, 0}, {1, 0}, {0.2, 1e-13}, {0.8, 2e-13}, 1e-10), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::OverlappingFractures;
                       }));
}

TEST_CASE("segment_intersection: endpoint inclusion within tolerance") {
  auto p = segment_intersection({0, 0}, {1, 0}, {0.5, 0}, {0.5, 1}, 1e-10);
  REQUIRE(p.has_value());
  CHECK(near(*p, {0.5, 0.0}));
}

TEST_CASE("classify_intersections: the two-fracture/one-barrier configuration") {
  // Rectangle A(0,0) B(8,0) C(8,4) D(0,4); Dirichlet on the top edge CD,
  // Neumann elsewhere. Conductive EK and JG, blocking LM.
  DomainBoundary boundary;
  boundary.vertices = {{0, 0}, {8, 0}, {8, 4}, {0, 4}};
  boundary.edge_tags = {BoundaryTag::Neumann, BoundaryTag::Neumann, BoundaryTag::Dirichlet,
                        BoundaryTag::Neumann};
  FractureNetwork network = {
      conductive({1, 0.5}, {6, 3}),  // EK
      conductive({6, 0}, {2, 4}),    // JG
      blocking({1, 1}, {7, 1}),      // LM
  };
  IntersectionSets sets = classify_intersections(network, boundary);

  REQUIRE(sets.cc.size() == 1);
  CHECK(near(sets.cc[0], {4, 2}, 1e-9));  // H
  REQUIRE(sets.cb.size() == 2);
  CHECK(IntersectionSets::contains(sets.cb, {2, 1}, 1e-9));  // F
  CHECK(IntersectionSets::contains(sets.cb, {5, 1}, 1e-9));  // I
  REQUIRE(sets.cm_d.size() == 1);
  CHECK(near(sets.cm_d[0], {2, 4}, 1e-9));  // G
  REQUIRE(sets.cm_n.size() == 1);
  CHECK(near(sets.cm_n[0], {6, 0}, 1e-9));  // J
  REQUIRE(sets.ci.size() == 2);
  CHECK(IntersectionSets::contains(sets.ci, {1, 0.5}, 1e-9));  // E
  CHECK(IntersectionSets::contains(sets.ci, {6, 3}, 1e-9));    // K
}

TEST_CASE("classify_intersections: single interior fracture") {
  DomainBoundary boundary = unit_square_boundary(BoundaryTag::Neumann, BoundaryTag::Dirichlet,
                                                 BoundaryTag::Neumann, BoundaryTag::Neumann);
  FractureNetwork network = {conductive({0.2, 0.3}, {0.8, 0.7})};
  IntersectionSets sets = classify_intersections(network, boundary);
  CHECK(sets.cc.empty());
  CHECK(sets.cb.empty());
  CHECK(sets.cm_d.empty());
  CHECK(sets.cm_n.empty());
  REQUIRE(sets.ci.size() == 2);
  CHECK(IntersectionSets::contains(sets.ci, {0.2, 0.3}, 1e-9));
  CHECK(IntersectionSets::contains(sets.ci, {0.8, 0.7}, 1e-9));
}

TEST_CASE("classify_intersections: two crossing fractures, interior tips") {
  DomainBoundary boundary = unit_square_boundary(BoundaryTag::Neumann, BoundaryTag::Dirichlet,
                                                 BoundaryTag::Neumann, BoundaryTag::Neumann);
  FractureNetwork network = {conductive({0.2, 0.2}, {0.8, 0.8}), conductive({0.2, 0.8}, {0.8, 0.2})};
  IntersectionSets sets = classify_intersections(network, boundary);

  // Brute-force route: enumerate all pairwise crossings.
  double tol = default_geometry_tolerance(boundary.diameter());
  auto pts = oracles::conductive_points_brute_force(network, tol);
  CHECK(pts.size() == 5);  // four tips + one crossing

  REQUIRE(sets.cc.size() == 1);
  CHECK(near(sets.cc[0], {0.5, 0.5}, 1e-9));
  CHECK(sets.ci.size() == 4);
  CHECK(sets.total() == pts.size());
}

TEST_CASE("classify_intersections: T-junction goes to cc") {
  DomainBoundary boundary = unit_square_boundary(BoundaryTag::Neumann, BoundaryTag::Dirichlet,
                                                 BoundaryTag::Neumann, BoundaryTag::Neumann);
  FractureNetwork network = {conductive({0.2, 0.5}, {0.8, 0.5}), conductive({0.5, 0.5}, {0.5, 0.9})};
  IntersectionSets sets = classify_intersections(network, boundary);
  REQUIRE(sets.cc.size() == 1);
  CHECK(near(sets.cc[0], {0.5, 0.5}, 1e-9));
  CHECK(sets.ci.size() == 3);
}

TEST_CASE("classify_intersections: blocking-blocking crossings are unrecorded") {
  DomainBoundary boundary = unit_square_boundary(BoundaryTag::Neumann, BoundaryTag::Dirichlet,
                                                 BoundaryTag::Neumann, BoundaryTag::Neumann);
  FractureNetwork network = {blocking({0.2, 0.2}, {0.8, 0.8}), blocking({0.2, 0.8}, {0.8, 0.2})};
  IntersectionSets sets = classify_intersections(network, boundary);
  CHECK(sets.total() == 0);
}

TEST_CASE("classify_intersections: ambiguous boundary point raises") {
  DomainBoundary boundary = unit_square_boundary(BoundaryTag::Neumann, BoundaryTag::Dirichlet,
                                                 BoundaryTag::Neumann, BoundaryTag::Neumann);
  // Endpoint at the corner (1,0) where Neumann and Dirichlet edges meet.
  FractureNetwork network = {conductive({0.5, 0.5}, {1.0, 0.0})};
  CHECK_THROWS_MATCHES(classify_intersections(network, boundary), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::AmbiguousBoundaryPoint;
                       }));
}

TEST_CASE("partition property on random networks") {
  DomainBoundary boundary = unit_square_boundary(BoundaryTag::Neumann, BoundaryTag::Dirichlet,
                                                 BoundaryTag::Neumann, BoundaryTag::Neumann);
  double tol = default_geometry_tolerance(boundary.diameter());
  std::uint64_t seed = 2024;
  int generated = 0;
  while (generated < 30) {
    frax::DeterministicRng rng(seed++);
    FractureNetwork network;
    int n = 1 + static_cast<int>(rng.next() % 4);
    for (int i = 0; i < n; ++i) {
      Vec2 a{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
      Vec2 b{rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
      if (distance(a, b) < 0.1) continue;
      if (rng.uniform() < 0.75) network.push_back(conductive(a, b));
      else network.push_back(blocking(a, b));
    }
    if (network.empty()) continue;
    IntersectionSets sets;
    std::vector<Vec2> pts;
    try {
      sets = classify_intersections(network, boundary);
      pts = oracles::conductive_points_brute_force(network, tol);
    } catch (const Error&) {
      continue;  // rejected geometry (overlap / ambiguity); draw again
    }
    ++generated;
    CHECK(sets.total() == pts.size());
    // Disjointness: no point may appear in two sets.
    std::vector<const std::vector<Vec2>*> all = {&sets.cc, &sets.cb, &sets.cm_d, &sets.cm_n, &sets.ci};
    for (std::size_t s1 = 0; s1 < all.size(); ++s1)
      for (std::size_t s2 = s1 + 1; s2 < all.size(); ++s2)
        for (const Vec2& p : *all[s1]) CHECK_FALSE(IntersectionSets::contains(*all[s2], p, tol));
  }
}

TEST_CASE("classification is invariant under fracture relabeling") {
  DomainBoundary boundary = unit_square_boundary(BoundaryTag::Neumann, BoundaryTag::Dirichlet,
                                                 BoundaryTag::Neumann, BoundaryTag::Neumann);
  FractureNetwork network = {
      conductive({0.1, 0.5}, {0.9, 0.5}),
      conductive({0.5, 0.1}, {0.5, 0.9}),
      blocking({0.2, 0.2}, {0.8, 0.6}),
  };
  IntersectionSets base = classify_intersections(network, boundary);
  std::vector<FractureNetwork> permutations;
  FractureNetwork p = network;
  std::sort(p.begin(), p.end(), [](const Fracture& x, const Fracture& y) { return x.a.x < y.a.x; });
  do {
    IntersectionSets sets = classify_intersections(p, boundary);
    CHECK(sets.total() == base.total());
    CHECK(sets.cc.size() == base.cc.size());
    CHECK(sets.cb.size() == base.cb.size());
    CHECK(sets.ci.size() == base.ci.size());
    double tol = 1e-9;
    for (const Vec2& q : base.cc) CHECK(IntersectionSets::contains(sets.cc, q, tol));
    for (const Vec2& q : base.cb) CHECK(IntersectionSets::contains(sets.cb, q, tol));
  } while (std::next_permutation(p.begin(), p.end(), [](const Fracture& x, const Fracture& y) {
    return std::make_pair(x.a.x, x.a.y) < std::make_pair(y.a.x, y.a.y);
  }));
}

TEST_CASE("fracture endpoint outward tangents are opposite") {
  Fracture f = conductive({0.2, 0.3}, {0.9, 0.8});
  Vec2 t0 = f.outward_tangent_at(0);
  Vec2 t1 = f.outward_tangent_at(1);
  CHECK(std::abs(norm(t0) - 1.0) < 1e-14);
  CHECK(std::abs(norm(t1) - 1.0) < 1e-14);
  CHECK(near(t0 + t1, {0, 0}, 1e-14));
  CHECK(std::abs(norm(f.unit_normal()) - 1.0) < 1e-14);
}

TEST_CASE("fracture network file round trip") {
  FractureNetwork network = {
      conductive({0.0, 0.5}, {1.0, 0.5}, 1e-4, 1e4),
      blocking({0.25, 0.25}, {0.75, 0.75}, 1e-3, 1e-5),
  };
  auto path = std::filesystem::temp_directory_path() / "frax_test_fractures.txt";
  write_fracture_file(path.string(), network);
  FractureNetwork read = read_fracture_file(path.string());
  REQUIRE(read.size() == 2);
  CHECK(read[0].conductive());
  CHECK(near(read[0].a, network[0].a));
  CHECK(near(read[0].b, network[0].b));
  CHECK(read[0].tangential_conductivity == network[0].tangential_conductivity);
  CHECK(read[1].kind == FractureKind::Blocking);
  CHECK(read[1].normal_conductivity == network[1].normal_conductivity);
  CHECK(read[1].thickness == network[1].thickness);
  std::filesystem::remove(path);
}

TEST_CASE("fracture file with bad header raises") {
  auto path = std::filesystem::temp_directory_path() / "frax_bad_fractures.txt";
  {
    std::ofstream out(path);
    out << "NOTFRACTURES 1\n";
  }
  CHECK_THROWS_AS(read_fracture_file(path.string()), Error);
  std::filesystem::remove(path);
}
