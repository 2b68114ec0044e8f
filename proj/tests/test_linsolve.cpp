#include <catch2/catch_amalgamated.hpp>

#include "frax/linsolve.hpp"
#include "frax/mesh.hpp"
#include "oracles.hpp"

using namespace frax;

namespace {

SparseMatrix identity(int n) {
  SparseBuilder b(n, n);
  for (int i = 0; i < n; ++i) b.add(i, i, 1.0);
  return b.build(true);
}

/// Random SPD matrix A^T A + I assembled densely, returned both as sparse
/// and dense storage.
std::pair<SparseMatrix, std::vector<std::vector<double>>> random_spd(int n, std::uint64_t seed) {
  DeterministicRng rng(seed);
  std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i][j] = rng.uniform(-1.0, 1.0);
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = i == j ? 1.0 : 0.0;
      for (int k = 0; k < n; ++k) s += a[k][i] * a[k][j];
      m[i][j] = s;
    }
  SparseBuilder b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (m[i][j] != 0.0) b.add(i, j, m[i][j]);
  return {b.build(true), m};
}

}  // namespace

TEST_CASE("builder sorts columns and merges duplicates") {
  SparseBuilder b(2, 2);
  b.add(0, 1, 2.0);
  b.add(0, 0, 1.0);
  b.add(0, 1, 3.0);
  b.add(1, 1, 4.0);
  SparseMatrix m = b.build();
  REQUIRE(m.nnz() == 3);
  CHECK(m.col_indices[0] == 0);
  CHECK(m.col_indices[1] == 1);
  CHECK(m.values[1] == 5.0);
  CHECK(m.coeff(1, 1) == 4.0);
  CHECK(m.coeff(1, 0) == 0.0);
}

TEST_CASE("cholesky_solve: identity") {
  auto [x, report] = cholesky_solve(identity(3), {1.0, 2.0, 3.0});
  CHECK(x[0] == Catch::Approx(1.0));
  CHECK(x[1] == Catch::Approx(2.0));
  CHECK(x[2] == Catch::Approx(3.0));
  CHECK(report.iterations == 0);
}

TEST_CASE("cholesky_solve: 2x2 with equal row sums") {
  SparseBuilder b(2, 2);
  b.add(0, 0, 2.0);
  b.add(0, 1, 1.0);
  b.add(1, 0, 1.0);
  b.add(1, 1, 2.0);
  auto [x, report] = cholesky_solve(b.build(true), {3.0, 3.0});
  CHECK(std::abs(x[0] - 1.0) < 1e-14);
  CHECK(std::abs(x[1] - 1.0) < 1e-14);
}

TEST_CASE("cholesky_solve: random SPD matches dense elimination") {
  auto [m, dense] = random_spd(50, 77);
  DeterministicRng rng(5);
  std::vector<double> rhs(50);
  for (double& v : rhs) v = rng.uniform(-1.0, 1.0);
  auto [x, report] = cholesky_solve(m, rhs);
  auto x_ref = oracles::dense_solve(dense, rhs);
  for (int i = 0; i < 50; ++i) CHECK(std::abs(x[i] - x_ref[i]) < 1e-8);
  CHECK(report.residual <= 1e-10 * detail::norm2(rhs) + 1e-13);
}

TEST_CASE("cholesky_solve: indefinite matrix raises NotSPD") {
  SparseBuilder b(2, 2);
  b.add(0, 0, 1.0);
  b.add(0, 1, 2.0);
  b.add(1, 0, 2.0);
  b.add(1, 1, 1.0);
  CHECK_THROWS_MATCHES(cholesky_solve(b.build(true), {1.0, 1.0}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::NotSPD; }));
}

TEST_CASE("cg_solve: identity converges in one iteration") {
  auto [x, report] = cg_solve(identity(4), {1.0, -2.0, 0.5, 4.0}, 1e-12, 100, Preconditioner::None);
  CHECK(report.iterations == 1);
  CHECK(std::abs(x[3] - 4.0) < 1e-12);
}

TEST_CASE("cg_solve: diagonal matrix with Jacobi converges in one iteration") {
  SparseBuilder b(3, 3);
  b.add(0, 0, 2.0);
  b.add(1, 1, 5.0);
  b.add(2, 2, 0.5);
  auto [x, report] = cg_solve(b.build(true), {2.0, 10.0, 1.0}, 1e-12, 100, Preconditioner::Jacobi);
  CHECK(report.iterations == 1);
  CHECK(std::abs(x[0] - 1.0) < 1e-12);
  CHECK(std::abs(x[1] - 2.0) < 1e-12);
  CHECK(std::abs(x[2] - 2.0) < 1e-12);
}

TEST_CASE("cg_solve agrees with cholesky_solve on random SPD") {
  auto [m, dense] = random_spd(40, 901);
  DeterministicRng rng(7);
  std::vector<double> rhs(40);
  for (double& v : rhs) v = rng.uniform(-1.0, 1.0);
  auto [x_cg, r1] = cg_solve(m, rhs, 1e-12, 10000, Preconditioner::Jacobi);
  auto [x_ch, r2] = cholesky_solve(m, rhs);
  for (int i = 0; i < 40; ++i) CHECK(std::abs(x_cg[i] - x_ch[i]) < 1e-8);
}

TEST_CASE("cg_solve: max_iter exhaustion raises NoConvergence") {
  auto [m, dense] = random_spd(30, 13);
  std::vector<double> rhs(30, 1.0);
  CHECK_THROWS_MATCHES(cg_solve(m, rhs, 1e-14, 1, Preconditioner::None), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::NoConvergence; }));
}

TEST_CASE("lu_solve: identity and permutation") {
  auto [x, r] = lu_solve(identity(3), {3.0, 1.0, 2.0});
  CHECK(x[0] == Catch::Approx(3.0));

  SparseBuilder b(3, 3);  // cyclic permutation
  b.add(0, 1, 1.0);
  b.add(1, 2, 1.0);
  b.add(2, 0, 1.0);
  auto [y, r2] = lu_solve(b.build(), {5.0, 6.0, 7.0});
  CHECK(std::abs(y[1] - 5.0) < 1e-14);
  CHECK(std::abs(y[2] - 6.0) < 1e-14);
  CHECK(std::abs(y[0] - 7.0) < 1e-14);
}

TEST_CASE("lu_solve: random diagonally dominant matches dense elimination") {
  const int n = 35;
  DeterministicRng rng(404);
  std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
  SparseBuilder b(n, n);
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double v = rng.uniform(-1.0, 1.0);
      dense[i][j] = v;
      off += std::abs(v);
      b.add(i, j, v);
    }
    dense[i][i] = off + 1.0;
    b.add(i, i, off + 1.0);
  }
  std::vector<double> rhs(n);
  for (double& v : rhs) v = rng.uniform(-2.0, 2.0);
  auto [x, report] = lu_solve(b.build(), rhs);
  auto x_ref = oracles::dense_solve(dense, rhs);
  for (int i = 0; i < n; ++i) CHECK(std::abs(x[i] - x_ref[i]) < 1e-10);
  CHECK(report.residual <= 1e-10 * detail::norm2(rhs) + 1e-13);
}

TEST_CASE("lu_solve: singular matrix raises") {
  SparseBuilder b(2, 2);
  b.add(0, 0, 1.0);
  b.add(0, 1, 2.0);
  b.add(1, 0, 2.0);
  b.add(1, 1, 4.0);
  CHECK_THROWS_MATCHES(lu_solve(b.build(), {1.0, 2.0}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::Singular; }));
}

TEST_CASE("symmetry defect detects asymmetry") {
  SparseBuilder b(2, 2);
  b.add(0, 1, 1.0);
  b.add(1, 0, 1.0 + 1e-6);
  b.add(0, 0, 1.0);
  b.add(1, 1, 1.0);
  SparseMatrix m = b.build();
  CHECK(m.symmetry_defect() > 1e-7);
  CHECK(identity(4).symmetry_defect() == 0.0);
}
