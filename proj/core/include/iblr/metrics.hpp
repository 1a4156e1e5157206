#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "iblr/families.hpp"
#include "iblr/linalg.hpp"
#include "iblr/models.hpp"
#include "iblr/optimizers.hpp"
#include "iblr/rng.hpp"

namespace iblr {

struct MetricResult {
  std::string name;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
};

// (1/n) sum [lbar(z_i) + log q(z_i)]; needs n >= 2 for a finite standard error.
MetricResult neg_elbo_mc(const Family& q, const TargetModel& model, RngStream& rng, std::size_t n);
// Closed form for Gaussian families on models with a closed-form expected loss.
std::optional<double> neg_elbo_exact(const Family& q, const TargetModel& model);
// L(q) - L* using the closed forms; throws DomainError when either is missing.
MetricResult elbo_gap(const Family& q, const TargetModel& model);

// Unbiased estimate of squared MMD with k(x, y) = exp(-|x - y|^2 / (2 h^2)).
// Rows are samples. h defaults to the median pairwise distance of the pooled
// set. The value does not depend on row order or argument order.
MetricResult mmd_rbf(const Mat& a, const Mat& b, std::optional<double> bandwidth = std::nullopt);
double median_pairwise_distance(const Mat& pooled);

// -(1/|test|) sum_i log mean_s p(y_i | x_i, z_s) over n posterior draws.
MetricResult test_log_loss(const Family& q, const TargetModel& model, const Dataset& test, RngStream& rng,
                           std::size_t n);

// Trace hook used by the CLI and the acceptance runs.
struct EvaluatorConfig {
  std::size_t n_samples = 100;  // neg_elbo draws when no closed form applies
  std::uint64_t seed = 0;
  bool prefer_exact = true;
  bool elbo_gap = false;
  const Dataset* test = nullptr;  // adds test_log_loss when set
  std::size_t test_samples = 100;
  const Mat* reference = nullptr;  // adds mmd against these samples when set
  std::size_t mmd_samples = 2000;
  std::size_t cadence = 1;  // extra metrics only every cadence-th record
};
TraceHook make_evaluator(const TargetModel& model, const EvaluatorConfig& cfg);

}  // namespace iblr
