#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <vector>

namespace swat {

/// Parameter matrices are stored sparse. Constructed networks are
/// structurally sparse (a handful of nonzeros in matrices with tens of
/// thousands of rows), trained ones simply store every entry.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double, Eigen::Index>;

inline SparseMatrix sparse_from_triplets(Eigen::Index rows, Eigen::Index cols,
                                         const std::vector<Triplet>& entries) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(entries.begin(), entries.end());
  m.prune(0.0);
  m.makeCompressed();
  return m;
}

/// Exact zeros are dropped; everything else is kept.
inline SparseMatrix sparse_from_dense(const Eigen::MatrixXd& dense) {
  std::vector<Triplet> entries;
  for (Eigen::Index r = 0; r < dense.rows(); ++r)
    for (Eigen::Index c = 0; c < dense.cols(); ++c)
      if (dense(r, c) != 0.0) entries.emplace_back(r, c, dense(r, c));
  return sparse_from_triplets(dense.rows(), dense.cols(), entries);
}

inline SparseMatrix sparse_identity_block(Eigen::Index rows, Eigen::Index cols, Eigen::Index row0,
                                          Eigen::Index col0, Eigen::Index count, double scale = 1.0) {
  std::vector<Triplet> entries;
  for (Eigen::Index i = 0; i < count; ++i) entries.emplace_back(row0 + i, col0 + i, scale);
  return sparse_from_triplets(rows, cols, entries);
}

/// max |a_ij| over stored entries.
inline double max_abs(const SparseMatrix& m) {
  double best = 0.0;
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) best = std::max(best, std::abs(it.value()));
  return best;
}

inline double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Number of entries with |a_ij| > tolerance.
inline long count_nonzeros(const SparseMatrix& m, double tolerance = 0.0) {
  long n = 0;
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      if (std::abs(it.value()) > tolerance) ++n;
  return n;
}

inline long count_nonzeros(const Eigen::VectorXd& v, double tolerance = 0.0) {
  return static_cast<long>((v.array().abs() > tolerance).count());
}

inline bool all_finite(const SparseMatrix& m) {
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it)
      if (!std::isfinite(it.value())) return false;
  return true;
}

}  // namespace swat
