#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "frax/errors.hpp"

namespace frax {

/// Compressed-row sparse matrix. Column indices are sorted and unique per
/// row; duplicate triplets are summed when the matrix is built.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::int64_t> row_offsets;  // size rows+1
  std::vector<int> col_indices;
  std::vector<double> values;
  bool symmetric = false;

  std::int64_t nnz() const { return static_cast<std::int64_t>(values.size()); }

  double coeff(int i, int j) const {
    for (std::int64_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
      if (col_indices[k] == j) return values[k];
    return 0.0;
  }

  std::vector<double> multiply(const std::vector<double>& x) const {
    std::vector<double> y(rows, 0.0);
    for (int i = 0; i < rows; ++i) {
      double s = 0.0;
      for (std::int64_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        s += values[k] * x[col_indices[k]];
      y[i] = s;
    }
    return y;
  }

  /// Largest relative asymmetry |a_ij - a_ji| / max|a|; 0 for an empty matrix.
  double symmetry_defect() const {
    double amax = 0.0;
    for (double v : values) amax = std::max(amax, std::abs(v));
    if (amax == 0.0) return 0.0;
    double defect = 0.0;
    for (int i = 0; i < rows; ++i)
      for (std::int64_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        defect = std::max(defect, std::abs(values[k] - coeff(col_indices[k], i)));
    return defect / amax;
  }

  Eigen::SparseMatrix<double> to_eigen() const {
    Eigen::SparseMatrix<double> m(rows, cols);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(values.size());
    for (int i = 0; i < rows; ++i)
      for (std::int64_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
        trips.emplace_back(i, col_indices[k], values[k]);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
  }
};

/// Accumulates (i,j,v) triplets and compresses them into a SparseMatrix.
class SparseBuilder {
public:
  SparseBuilder(int rows, int cols) : rows_(rows), cols_(cols) {}

  void add(int i, int j, double v) { triplets_.push_back({i, j, v}); }
  void reserve(std::size_t n) { triplets_.reserve(n); }

  SparseMatrix build(bool symmetric = false) const {
    SparseMatrix m;
    m.rows = rows_;
    m.cols = cols_;
    m.symmetric = symmetric;
    std::vector<std::int64_t> count(rows_ + 1, 0);
    for (const auto& t : triplets_) ++count[t.i + 1];
    for (int i = 0; i < rows_; ++i) count[i + 1] += count[i];
    std::vector<int> cols(triplets_.size());
    std::vector<double> vals(triplets_.size());
    {
      std::vector<std::int64_t> next(count.begin(), count.end() - 1);
      for (const auto& t : triplets_) {
        std::int64_t k = next[t.i]++;
        cols[k] = t.j;
        vals[k] = t.v;
      }
    }
    // Sort each row and merge duplicates.
    m.row_offsets.assign(rows_ + 1, 0);
    for (int i = 0; i < rows_; ++i) {
      std::int64_t lo = count[i];
      std::int64_t hi = count[i + 1];
      std::vector<std::pair<int, double>> row;
      row.reserve(hi - lo);
      for (std::int64_t k = lo; k < hi; ++k) row.push_back({cols[k], vals[k]});
      std::sort(row.begin(), row.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t out = 0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (out > 0 && row[out - 1].first == row[k].first) row[out - 1].second += row[k].second;
        else row[out++] = row[k];
      }
      for (std::size_t k = 0; k < out; ++k) {
        m.col_indices.push_back(row[k].first);
        m.values.push_back(row[k].second);
      }
      m.row_offsets[i + 1] = static_cast<std::int64_t>(m.col_indices.size());
    }
    return m;
  }

private:
  struct Triplet {
    int i, j;
    double v;
  };
  int rows_, cols_;
  std::vector<Triplet> triplets_;
};

struct SolveReport {
  int iterations = 0;  // 0 for direct solves
  double residual = 0.0;
  double seconds = 0.0;
};

namespace detail {

inline double residual_norm(const SparseMatrix& m, const std::vector<double>& x,
                            const std::vector<double>& b) {
  std::vector<double> r = m.multiply(x);
  double s = 0.0;
  for (int i = 0; i < m.rows; ++i) s += (r[i] - b[i]) * (r[i] - b[i]);
  return std::sqrt(s);
}

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

class Timer {
public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

/// Reusable sparse Cholesky factorization of an SPD matrix. Raises NotSPD
/// when a nonpositive pivot arises, which signals an assembly bug upstream.
class CholeskySolver {
public:
  explicit CholeskySolver(const SparseMatrix& m) {
    require(m.rows == m.cols && m.rows >= 1, ErrorCode::InvalidArgument, "matrix must be square");
    matrix_ = m.to_eigen();
    llt_.compute(matrix_);
    require(llt_.info() == Eigen::Success, ErrorCode::NotSPD,
            "Cholesky failed: matrix is not positive definite");
  }

  std::vector<double> solve(const std::vector<double>& b) const {
    Eigen::Map<const Eigen::VectorXd> bv(b.data(), b.size());
    Eigen::VectorXd x = llt_.solve(bv);
    return std::vector<double>(x.data(), x.data() + x.size());
  }

private:
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt_;
};

/// Reusable sparse LU factorization of a square nonsingular matrix.
class LuSolver {
public:
  explicit LuSolver(const SparseMatrix& m) {
    require(m.rows == m.cols && m.rows >= 1, ErrorCode::InvalidArgument, "matrix must be square");
    matrix_ = m.to_eigen();
    lu_.compute(matrix_);
    require(lu_.info() == Eigen::Success, ErrorCode::Singular, "LU failed: matrix is singular");
  }

  std::vector<double> solve(const std::vector<double>& b) const {
    Eigen::Map<const Eigen::VectorXd> bv(b.data(), b.size());
    Eigen::VectorXd x = lu_.solve(bv);
    return std::vector<double>(x.data(), x.data() + x.size());
  }

private:
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

inline std::pair<std::vector<double>, SolveReport> cholesky_solve(const SparseMatrix& m,
                                                                  const std::vector<double>& b) {
  detail::Timer timer;
  require(m.symmetric, ErrorCode::InvalidArgument, "cholesky_solve needs a symmetric matrix");
  CholeskySolver solver(m);
  std::vector<double> x = solver.solve(b);
  SolveReport report;
  report.iterations = 0;
  report.residual = detail::residual_norm(m, x, b);
  report.seconds = timer.seconds();
  return {std::move(x), report};
}

enum class Preconditioner { None, Jacobi };

/// Preconditioned conjugate gradients with a relative residual stopping
/// criterion. Kept independent of the direct path so the two can
/// cross-check each other.
inline std::pair<std::vector<double>, SolveReport> cg_solve(
    const SparseMatrix& m, const std::vector<double>& b, double tol = 1e-10, int max_iter = 10000,
    Preconditioner precond = Preconditioner::Jacobi) {
  detail::Timer timer;
  require(m.rows == m.cols && m.rows >= 1, ErrorCode::InvalidArgument, "matrix must be square");
  const int n = m.rows;

  std::vector<double> diag_inv(n, 1.0);
  if (precond == Preconditioner::Jacobi) {
    for (int i = 0; i < n; ++i) {
      double d = m.coeff(i, i);
      require(d > 0.0, ErrorCode::NotSPD, "cg_solve: nonpositive diagonal entry");
      diag_inv[i] = 1.0 / d;
    }
  }

  std::vector<double> x(n, 0.0);
  std::vector<double> r = b;
  double bnorm = detail::norm2(b);
  if (bnorm == 0.0) {
    SolveReport report{0, 0.0, timer.seconds()};
    return {std::move(x), report};
  }

  std::vector<double> z(n), p(n), ap(n);
  for (int i = 0; i < n; ++i) z[i] = diag_inv[i] * r[i];
  p = z;
  double rz = 0.0;
  for (int i = 0; i < n; ++i) rz += r[i] * z[i];

  int it = 0;
  double rnorm = detail::norm2(r);
  while (rnorm > tol * bnorm) {
    require(it < max_iter, ErrorCode::NoConvergence, "cg_solve: max iterations reached");
    ap = m.multiply(p);
    double pap = 0.0;
    for (int i = 0; i < n; ++i) pap += p[i] * ap[i];
    require(pap > 0.0, ErrorCode::NotSPD, "cg_solve: matrix is not positive definite");
    double alpha = rz / pap;
    for (int i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    for (int i = 0; i < n; ++i) z[i] = diag_inv[i] * r[i];
    double rz_new = 0.0;
    for (int i = 0; i < n; ++i) rz_new += r[i] * z[i];
    double beta = rz_new / rz;
    rz = rz_new;
    for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rnorm = detail::norm2(r);
    ++it;
  }

  SolveReport report;
  report.iterations = it;
  report.residual = rnorm;
  report.seconds = timer.seconds();
  return {std::move(x), report};
}

inline std::pair<std::vector<double>, SolveReport> lu_solve(const SparseMatrix& m,
                                                            const std::vector<double>& b) {
  detail::Timer timer;
  LuSolver solver(m);
  std::vector<double> x = solver.solve(b);
  SolveReport report;
  report.iterations = 0;
  report.residual = detail::residual_norm(m, x, b);
  report.seconds = timer.seconds();
  return {std::move(x), report};
}

}  // namespace frax
