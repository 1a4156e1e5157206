#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "iblr/families.hpp"
#include "iblr/linalg.hpp"
#include "iblr/models.hpp"
#include "iblr/rng.hpp"

namespace iblr {

struct LineSearchConfig {
  bool enabled = true;
  double shrink = 0.5;  // rho
  std::size_t max_backtracks = 30;
};

struct AdamConfig {
  double r1 = 0.9;
  double r2 = 0.999;
  double prior_precision = 1.0;  // lambda
  double n_train = 1.0;          // N
  std::size_t batch_size = 0;    // 0: full batch
  bool extra_term = true;        // the second-order term in the s update
  bool mean_first = true;        // update mu before s (false gives the VOGN order)
};

struct OptimizerConfig {
  double step_size = 0.1;
  std::size_t max_iters = 1000;
  std::size_t n_mc = 1;
  Estimator estimator = Estimator::Rep;
  LineSearchConfig line_search;
  AdamConfig adam;
  std::uint64_t seed = 0;
  // Every iteration is recorded up to thin_after, then every thin_every-th.
  std::size_t thin_after = 1000;
  std::size_t thin_every = 10;
  bool timing = false;  // wall-clock elapsed_ms; off keeps traces byte-stable

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct TraceRecord {
  std::size_t iter = 0;
  double elapsed_ms = 0.0;
  double neg_elbo = 0.0;
  double neg_elbo_se = 0.0;
  std::map<std::string, double> metrics;
  std::size_t feasibility_violations = 0;  // cumulative
  std::size_t line_search_backtracks = 0;  // cumulative
};

struct Trace {
  std::vector<TraceRecord> records;

  // iter,elapsed_ms,neg_elbo,neg_elbo_se, then metric columns in name order,
  // then feasibility_violations,line_search_backtracks.
  std::string to_csv() const;
};

// Fills neg_elbo and metrics for a recorded iteration. Time spent here is
// excluded from elapsed_ms.
using TraceHook = std::function<void(const Family& q, TraceRecord& rec)>;

struct RunResult {
  std::unique_ptr<Family> family;
  Trace trace;
  std::size_t feasibility_violations = 0;
  std::size_t line_search_backtracks = 0;
  std::size_t skipped_steps = 0;  // exhausted line searches
};

bool should_record(std::size_t iter, const OptimizerConfig& cfg);

// Improved rule: natural gradient plus the second-order retraction term,
// every block reading the old point. Throws InfeasibleResult if an iterate
// ever leaves the constraint set.
RunResult run_iblr(const Family& init, const TargetModel& model, const OptimizerConfig& cfg,
                   const TraceHook& hook = nullptr);

// Original rule with a feasibility-only backtracking line search. A step whose
// line search is exhausted is skipped and counted.
RunResult run_blr(const Family& init, const TargetModel& model, const OptimizerConfig& cfg,
                  const TraceHook& hook = nullptr);

// Diagonal Gaussian N(mu, diag(1 / (N s))) with momentum.
struct DiagState {
  Vec mu;
  Vec s;
  Vec m;
  std::size_t k = 0;  // steps taken

  static DiagState init(const Vec& mu, const Vec& s);
  // The Gaussian this state represents.
  std::unique_ptr<Family> family(double n_train) const;
};

// One step of the Adam-like optimizer given the draw z and the minibatch mean
// gradient gbar of the data term.
DiagState adam_like_step(const DiagState& state, const Vec& z, const Vec& gbar, const OptimizerConfig& cfg);
// One VOGN step from per-example gradients at the draw.
DiagState vogn_step(const DiagState& state, const std::vector<Vec>& per_example, const OptimizerConfig& cfg);

// The s update of the Adam-like optimizer on its own.
Vec adam_like_s_update(const Vec& s, const Vec& gs, double r2, bool extra_term);

struct DiagRunResult {
  DiagState state;
  Trace trace;
  std::size_t nonpositive_steps = 0;  // steps that produced s <= 0
};

// Drives either optimizer on a model with per-example structure. Throws
// PerExampleUnavailable for VOGN on models without per-example gradients.
DiagRunResult run_adam_like(const DiagState& init, const TargetModel& model, const OptimizerConfig& cfg,
                            const TraceHook& hook = nullptr);
DiagRunResult run_vogn(const DiagState& init, const TargetModel& model, const OptimizerConfig& cfg,
                       const TraceHook& hook = nullptr);

// Update in the (mu, Sigma) parameterization with Sigma's natural gradient
// 2 Sigma (dL/dSigma) Sigma and the retraction Sigma + b + b Sigma^{-1} b / 2.
struct CovarianceStep {
  Vec mu;
  Mat sigma;
};
CovarianceStep tran_step(const Vec& mu, const SPDMatrix& sigma, const Vec& grad_mu, const Mat& grad_sigma, double t);

// Full-Gaussian run driven by tran_step with rep or hess gradients of the
// negative ELBO. Throws InfeasibleResult if a covariance iterate is not SPD.
RunResult run_tran(const Family& init, const TargetModel& model, const OptimizerConfig& cfg,
                   const TraceHook& hook = nullptr);

// Exact Fisher-Rao geodesic of the covariance block: U Exp(-t U^{-1} g U^{-1}) U, U = Sigma^{1/2}.
Mat covariance_geodesic_exact(const Mat& sigma, const Mat& g, double t);

}  // namespace iblr
