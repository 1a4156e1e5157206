#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace iblr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// (M + M^T) / 2.
Mat symmetrize(const Mat& m);

// Lower Cholesky factor of the symmetrized input. Throws NotPositiveDefinite
// carrying the row of the first non-positive pivot.
Mat cholesky(const Mat& m);

// Solves L x = b and L^T x = b for lower-triangular L.
Vec forward_substitute(const Mat& lower, const Vec& b);
Vec back_substitute_transposed(const Mat& lower, const Vec& b);
Mat forward_substitute(const Mat& lower, const Mat& b);
Mat back_substitute_transposed(const Mat& lower, const Mat& b);

// Symmetric positive-definite matrix with its Cholesky factor cached.
class SPDMatrix {
 public:
  explicit SPDMatrix(const Mat& m);
  static SPDMatrix identity(std::size_t d);

  std::size_t dim() const { return static_cast<std::size_t>(data_.rows()); }
  const Mat& data() const { return data_; }
  const Mat& chol() const { return chol_; }

  Vec solve(const Vec& b) const;
  Mat solve(const Mat& b) const;
  Mat inverse() const;
  double log_det() const;

 private:
  Mat data_;
  Mat chol_;
};

Vec solve_spd(const SPDMatrix& m, const Vec& b);
Mat solve_spd(const SPDMatrix& m, const Mat& b);

struct SymmetricEigen {
  Vec values;   // ascending
  Mat vectors;  // columns are eigenvectors
};

// Cyclic Jacobi rotations; fine for the small matrices used here.
SymmetricEigen jacobi_eigen(const Mat& m);
double min_eigenvalue(const Mat& m);

// Scaled and squared Taylor series of order 12.
Mat matrix_exponential(const Mat& m);

// Principal square root of a symmetric positive semi-definite matrix.
Mat sym_sqrt(const Mat& m);

// Feasibility floor for SPD blocks: every Cholesky pivot must exceed
// 1e-12 * trace / d. Returns false rather than throwing.
bool spd_feasible(const Mat& m);

double max_abs(const Mat& m);

}  // namespace iblr
