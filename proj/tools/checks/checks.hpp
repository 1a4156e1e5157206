#pragma once

#include <string>
#include <vector>

namespace iblr::checks {

// One line of a verification table.
struct CheckRow {
  std::string suite;
  std::string name;
  bool pass = false;
  std::string detail;
};

using Rows = std::vector<CheckRow>;

// Polygammas, log-gamma, exp(x) E1(x) and the log Mills ratio against
// brute-force oracles at 20 points each.
Rows special_functions();

// Closed-form first-kind symbols against differences of the closed-form Fisher
// matrix and against the Monte-Carlo estimator (10^6 draws) for gamma(2, 3),
// exponential(2), inverse Gaussian(4, 2) and N(0, 1).
Rows christoffel_agreement();

// Full-Gaussian precision updates with indefinite G stay positive definite.
Rows pd_preservation();
// Scalar and diagonal families keep every positive block positive.
Rows positivity();
// Retraction error is cubic and the first-order step error quadratic in t.
Rows geodesic_order();
// S - t G + (t^2 / 2) G S^{-1} G equals (S + U^T U) / 2.
Rows half_s_identity();
// Rep and hess estimators of the mean and covariance gradients on a quadratic.
Rows bonnet_price();
// The second-order scale update of the Adam-like optimizer stays positive.
Rows adam_positivity();
// The univariate instance where the full second-order update leaves the
// constraint set while the block-wise rule does not.
Rows counterexample();

// special-functions, christoffel, retraction, theorems, counterexample.
const std::vector<std::string>& suite_names();
bool is_suite(const std::string& name);
// "all" runs every suite. Throws std::invalid_argument for an unknown name.
Rows run_suite(const std::string& name);

bool all_pass(const Rows& rows);
std::string format_table(const Rows& rows);

}  // namespace iblr::checks
