#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "iblr/linalg.hpp"
#include "iblr/rng.hpp"

namespace iblr {

enum class BlockKind { RealVector, PositiveScalar, SPD };

struct BlockConstraint {
  BlockKind kind;
  std::size_t dim;  // 1 for PositiveScalar

  static BlockConstraint real_vector(std::size_t d);
  static BlockConstraint positive_scalar();
  static BlockConstraint spd(std::size_t d);

  // Shape of the value matrix: d x 1, 1 x 1, or d x d.
  long rows() const { return static_cast<long>(dim); }
  long cols() const { return kind == BlockKind::SPD ? static_cast<long>(dim) : 1; }
  // Number of free coordinates (upper triangle for SPD blocks).
  std::size_t coordinate_count() const;

  bool operator==(const BlockConstraint& o) const { return kind == o.kind && dim == o.dim; }
};

const char* block_kind_name(BlockKind kind);

struct BlockedPoint {
  std::vector<BlockConstraint> constraints;
  std::vector<Mat> values;

  std::size_t size() const { return values.size(); }
  void push(BlockConstraint c, Mat value);
  // Throws ShapeMismatch if a value does not match its constraint.
  void check_shapes() const;
};

struct BlockedTangent {
  std::vector<Mat> blocks;
};

// Returns the block-shaped contraction sum_ab Gamma^c_ab g^a g^b for one block,
// given the point and that block's tangent.
using ChristoffelContraction = std::function<Mat(const BlockedPoint&, std::size_t, const Mat&)>;

inline constexpr double kPositiveFloor = 1e-12;

bool block_feasible(const BlockConstraint& c, const Mat& value);
bool is_feasible(const BlockedPoint& p);

struct StepResult {
  BlockedPoint point;
  bool feasible = true;
  std::size_t first_infeasible_block = 0;
};

// lambda_c <- lambda_c - t g_c - (t^2 / 2) Gamma^c(g, g), every block reading the
// old point. Throws InfeasibleResult if any block leaves its constraint set.
BlockedPoint retraction_step(const BlockedPoint& point, const BlockedTangent& nat_grad, double t,
                             const ChristoffelContraction& gamma);
// Same update but reports feasibility instead of throwing.
StepResult try_retraction_step(const BlockedPoint& point, const BlockedTangent& nat_grad, double t,
                               const ChristoffelContraction& gamma);
// First-order step lambda - t g; feasibility is reported, never enforced.
StepResult ngd_step(const BlockedPoint& point, const BlockedTangent& nat_grad, double t);

// Contraction for an SPD block S whose Christoffel term is -G S^{-1} G.
Mat spd_contraction(const Mat& S, const Mat& G);

// Flat coordinates of one block: vector entries, the scalar, or the upper
// triangle (row-major, i <= j) of an SPD block.
Vec block_coordinates(const BlockedPoint& p, std::size_t block);
BlockedPoint with_block_coordinates(const BlockedPoint& p, std::size_t block, const Vec& coords);

// Dense (d, a, b)-indexed array.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(std::size_t n) : n_(n), data_(n * n * n, 0.0) {}
  std::size_t size() const { return n_; }
  double& operator()(std::size_t d, std::size_t a, std::size_t b) { return data_[(d * n_ + a) * n_ + b]; }
  double operator()(std::size_t d, std::size_t a, std::size_t b) const { return data_[(d * n_ + a) * n_ + b]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// Second kind from first kind: Gamma^c_ab = F^{cd} Gamma_{d,ab}.
Tensor3 raise_index(const Tensor3& first_kind, const Mat& fim);

using LogPartition = std::function<double(const BlockedPoint&)>;

// Central second differences of A over one block's coordinates with
// h = rel_step * max(1, |lambda|). Throws StepTooLarge if a stencil point is infeasible.
Mat fim_fd(const LogPartition& A, const BlockedPoint& point, std::size_t block, double rel_step = 1e-4);
// The same over every coordinate of every block, cross-block entries included.
Mat fim_fd_joint(const LogPartition& A, const BlockedPoint& point, double rel_step = 1e-4);
// Half the third derivative of A over one block, by central differences.
Tensor3 christoffel_a3_fd(const LogPartition& A, const BlockedPoint& point, std::size_t block,
                          double rel_step = 1e-3);

// A density q(z | theta) over flat parameters, used by the Monte-Carlo oracle.
struct ParametricDensity {
  std::size_t n_params = 0;
  std::function<double(const Vec& theta, const Vec& z)> log_q;
  std::function<Vec(const Vec& theta, RngStream& rng)> sample;
};

struct ChristoffelEstimate {
  Tensor3 value;  // first kind, over the chosen coordinates
  Tensor3 se;
  std::size_t samples = 0;
};

// Gamma_{d,ab} = 1/2 E[l_ab l_d - l_bd l_a - l_ad l_b - l_abd] with l = log q,
// parameter derivatives taken by central differences.
ChristoffelEstimate christoffel_mc(const ParametricDensity& q, const Vec& theta,
                                   const std::vector<std::size_t>& coords, std::size_t n,
                                   RngStream& rng);

// U Exp(t U^{-1} (-G) U^{-1}) U with U = S^{1/2}.
Mat gaussian_geodesic_exact(const Mat& S, const Mat& G, double t);

// Univariate Gaussian updates that keep every Christoffel cross term.
enum class UnivariateParam { MeanStd, MeanVariance };

struct UnivariateStep {
  double mu = 0.0;
  double scale = 0.0;  // sigma or v
  bool feasible = true;
};

UnivariateStep song_step_univariate(double mu, double scale, double g_mu, double g_scale, double t,
                                    UnivariateParam kind);
// Block-wise rule for the same parameterization (only the within-block symbol).
UnivariateStep blockwise_step_univariate(double mu, double scale, double g_mu, double g_scale, double t,
                                         UnivariateParam kind);
// N(z | mu, sigma^2) over theta = (mu, sigma) or (mu, v).
ParametricDensity univariate_gaussian_density(UnivariateParam kind);
// Fisher matrix and full second-kind symbols for the two parameterizations.
Mat univariate_gaussian_fim(double scale, UnivariateParam kind);
Tensor3 univariate_gaussian_christoffel(double scale, UnivariateParam kind);

}  // namespace iblr
