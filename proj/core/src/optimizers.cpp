#include "iblr/optimizers.hpp"

#include <chrono>
#include <cmath>
#include <set>

#include "iblr/errors.hpp"
#include "iblr/io.hpp"

namespace iblr {

namespace {

using Clock = std::chrono::steady_clock;

// Wall-clock accounting that pauses while the trace hook runs.
class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(Clock::now()) {}
  void pause() { paused_at_ = Clock::now(); }
  void resume() { excluded_ += Clock::now() - paused_at_; }
  double elapsed_ms() const {
    if (!enabled_) return 0.0;
    const auto d = Clock::now() - start_ - excluded_;
    return std::chrono::duration<double, std::milli>(d).count();
  }

 private:
  bool enabled_;
  Clock::time_point start_;
  Clock::time_point paused_at_;
  Clock::duration excluded_{};
};

void record(Trace& trace, std::size_t iter, const Family& q, const TraceHook& hook, Stopwatch& clock,
            std::size_t violations, std::size_t backtracks) {
  TraceRecord rec;
  rec.iter = iter;
  rec.elapsed_ms = clock.elapsed_ms();
  rec.neg_elbo = std::nan("");
  rec.neg_elbo_se = std::nan("");
  rec.feasibility_violations = violations;
  rec.line_search_backtracks = backtracks;
  if (hook) {
    clock.pause();
    hook(q, rec);
    clock.resume();
  }
  trace.records.push_back(std::move(rec));
}

Minibatch full_batch(std::size_t n) {
  Minibatch b;
  b.indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) b.indices[i] = i;
  return b;
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw ConfigError("step_size", "must be a finite non-negative number");
  if (n_mc == 0) throw ConfigError("n_mc", "must be at least 1");
  if (!(line_search.shrink > 0.0 && line_search.shrink < 1.0)) throw ConfigError("line_search.shrink", "must lie in (0, 1)");
  if (!(adam.r1 >= 0.0 && adam.r1 < 1.0)) throw ConfigError("adam.r1", "must lie in [0, 1)");
  if (!(adam.r2 >= 0.0 && adam.r2 <= 1.0)) throw ConfigError("adam.r2", "must lie in [0, 1]");
  if (!(adam.n_train > 0.0)) throw ConfigError("adam.n_train", "must be positive");
  if (!(adam.prior_precision >= 0.0)) throw ConfigError("adam.prior_precision", "must be non-negative");
  if (thin_every == 0) throw ConfigError("thin_every", "must be at least 1");
}

bool should_record(std::size_t iter, const OptimizerConfig& cfg) {
  return iter <= cfg.thin_after || iter % cfg.thin_every == 0 || iter == cfg.max_iters;
}

std::string Trace::to_csv() const {
  std::set<std::string> names;
  for (const TraceRecord& r : records) {
    for (const auto& kv : r.metrics) names.insert(kv.first);
  }
  std::vector<std::string> header = {"iter", "elapsed_ms", "neg_elbo", "neg_elbo_se"};
  header.insert(header.end(), names.begin(), names.end());
  header.push_back("feasibility_violations");
  header.push_back("line_search_backtracks");
  std::string out = csv_line(header);
  for (const TraceRecord& r : records) {
    std::vector<std::string> row = {std::to_string(r.iter), format_double(r.elapsed_ms), format_double(r.neg_elbo),
                                    format_double(r.neg_elbo_se)};
    for (const std::string& n : names) {
      const auto it = r.metrics.find(n);
      row.push_back(it == r.metrics.end() ? std::string() : format_double(it->second));
    }
    row.push_back(std::to_string(r.feasibility_violations));
    row.push_back(std::to_string(r.line_search_backtracks));
    out += csv_line(row);
  }
  return out;
}

RunResult run_iblr(const Family& init, const TargetModel& model, const OptimizerConfig& cfg, const TraceHook& hook) {
  cfg.validate();
  if (!is_feasible(init.blocked_point())) throw DomainError("run_iblr: initial point is infeasible");
  RngStream rng(cfg.seed, 1);
  RunResult out;
  out.family = init.clone();
  const ChristoffelContraction gamma = init.christoffel_contraction();
  Stopwatch clock(cfg.timing);
  record(out.trace, 0, *out.family, hook, clock, 0, 0);
  for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
    const NaturalGradientEstimate ng = out.family->natural_gradient(model, rng, cfg.n_mc, cfg.estimator);
    const StepResult step = try_retraction_step(out.family->blocked_point(), ng.blocks, cfg.step_size, gamma);
    if (!step.feasible) throw InfeasibleResult(step.first_infeasible_block);
    out.family = out.family->with_point(step.point);
    if (should_record(k, cfg)) record(out.trace, k, *out.family, hook, clock, 0, 0);
  }
  return out;
}

RunResult run_blr(const Family& init, const TargetModel& model, const OptimizerConfig& cfg, const TraceHook& hook) {
  cfg.validate();
  if (!is_feasible(init.blocked_point())) throw DomainError("run_blr: initial point is infeasible");
  RngStream rng(cfg.seed, 1);
  RunResult out;
  out.family = init.clone();
  Stopwatch clock(cfg.timing);
  record(out.trace, 0, *out.family, hook, clock, 0, 0);
  for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
    const LegacyDirection dir = out.family->legacy_blr_natural_gradient(model, rng, cfg.n_mc, cfg.estimator);
    double t = cfg.step_size;
    std::size_t tries = 0;
    while (true) {
      const StepResult step = out.family->legacy_step(dir, t);
      if (step.feasible) {
        out.family = out.family->with_point(step.point);
        break;
      }
      ++out.feasibility_violations;
      if (!cfg.line_search.enabled || tries == cfg.line_search.max_backtracks) {
        ++out.skipped_steps;
        break;
      }
      ++tries;
      ++out.line_search_backtracks;
      t *= cfg.line_search.shrink;
    }
    if (should_record(k, cfg)) {
      record(out.trace, k, *out.family, hook, clock, out.feasibility_violations, out.line_search_backtracks);
    }
  }
  return out;
}

DiagState DiagState::init(const Vec& mu, const Vec& s) {
  if (mu.size() != s.size()) throw ShapeMismatch("DiagState: mu and s sizes differ");
  if (!(s.array() > 0.0).all()) throw DomainError("DiagState: s must be positive");
  DiagState st;
  st.mu = mu;
  st.s = s;
  st.m = Vec::Zero(mu.size());
  return st;
}

std::unique_ptr<Family> DiagState::family(double n_train) const { return make_gaussian_diag(mu, n_train * s); }

Vec adam_like_s_update(const Vec& s, const Vec& gs, double r2, bool extra_term) {
  const double a = 1.0 - r2;
  Vec out = s + a * gs;
  if (extra_term) out += (0.5 * a * a) * gs.cwiseProduct(gs).cwiseQuotient(s);
  return out;
}

DiagState adam_like_step(const DiagState& state, const Vec& z, const Vec& gbar, const OptimizerConfig& cfg) {
  const AdamConfig& a = cfg.adam;
  const double lam_n = a.prior_precision / a.n_train;
  DiagState st = state;
  ++st.k;
  const double k = static_cast<double>(st.k);
  const Vec g_mu = lam_n * st.mu + gbar;
  st.m = a.r1 * st.m + (1.0 - a.r1) * g_mu;
  const Vec m_bar = st.m / (1.0 - std::pow(a.r1, k));
  const Vec g_s = (Vec::Constant(z.size(), lam_n) - st.s) +
                  (a.n_train * state.s).cwiseProduct(z - state.mu).cwiseProduct(gbar);
  const double bias2 = 1.0 - std::pow(a.r2, k);
  if (a.mean_first) {
    st.mu = st.mu - cfg.step_size * m_bar.cwiseQuotient(st.s / bias2);
    st.s = adam_like_s_update(st.s, g_s, a.r2, a.extra_term);
  } else {
    st.s = adam_like_s_update(st.s, g_s, a.r2, a.extra_term);
    st.mu = st.mu - cfg.step_size * m_bar.cwiseQuotient(st.s / bias2);
  }
  return st;
}

DiagState vogn_step(const DiagState& state, const std::vector<Vec>& per_example, const OptimizerConfig& cfg) {
  if (per_example.empty()) throw PerExampleUnavailable("vogn_step: no per-example gradients");
  const AdamConfig& a = cfg.adam;
  const double lam_n = a.prior_precision / a.n_train;
  const double M = static_cast<double>(per_example.size());
  Vec mean = Vec::Zero(state.mu.size());
  Vec sq = Vec::Zero(state.mu.size());
  for (const Vec& g : per_example) {
    mean += g;
    sq += g.cwiseProduct(g);
  }
  mean /= M;
  sq /= M;
  DiagState st = state;
  ++st.k;
  const double k = static_cast<double>(st.k);
  const Vec g_mu = lam_n * st.mu + mean;
  st.m = a.r1 * st.m + (1.0 - a.r1) * g_mu;
  const Vec m_bar = st.m / (1.0 - std::pow(a.r1, k));
  const Vec g_s = (Vec::Constant(st.s.size(), lam_n) - st.s) + sq;
  st.s = st.s + (1.0 - a.r2) * g_s;
  st.mu = st.mu - cfg.step_size * m_bar.cwiseQuotient(st.s / (1.0 - std::pow(a.r2, k)));
  return st;
}

namespace {

enum class DiagMethod { AdamLike, Vogn };

DiagRunResult run_diag(DiagMethod method, const DiagState& init, const TargetModel& model,
                       const OptimizerConfig& cfg, const TraceHook& hook) {
  cfg.validate();
  if (init.mu.size() != static_cast<long>(model.dim())) throw DimensionMismatch("diagonal optimizer: wrong dimension");
  if (method == DiagMethod::Vogn && !model.has_per_example()) {
    throw PerExampleUnavailable(model.name() + ": VOGN needs per-example gradients");
  }
  const double N = cfg.adam.n_train;
  const std::size_t n_examples = model.num_examples();
  const Minibatch everything = full_batch(n_examples);
  RngStream rng(cfg.seed, 1);
  DiagRunResult out;
  out.state = init;
  Stopwatch clock(cfg.timing);
  auto emit = [&](std::size_t k) {
    TraceRecord rec;
    rec.iter = k;
    rec.elapsed_ms = clock.elapsed_ms();
    rec.neg_elbo = std::nan("");
    rec.neg_elbo_se = std::nan("");
    rec.feasibility_violations = out.nonpositive_steps;
    if (hook && (out.state.s.array() > 0.0).all()) {
      clock.pause();
      hook(*out.state.family(N), rec);
      clock.resume();
    }
    out.trace.records.push_back(std::move(rec));
  };
  emit(0);
  for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
    const DiagState& st = out.state;
    const Vec eps = sample_std_normal(rng, static_cast<std::size_t>(st.mu.size()));
    const Vec z = st.mu + eps.cwiseQuotient((N * st.s).cwiseSqrt());
    Minibatch batch;
    if (n_examples > 0) batch = cfg.adam.batch_size == 0 ? everything : model.minibatch(rng, cfg.adam.batch_size);
    DiagState next;
    if (method == DiagMethod::Vogn) {
      next = vogn_step(st, model.per_example_grads(z, batch), cfg);
    } else {
      Vec gbar;
      if (model.has_per_example()) {
        gbar = model.mean_example_grad(z, batch);
      } else {
        gbar = (model.grad(z) - model.prior_precision() * z) / N;
      }
      next = adam_like_step(st, z, gbar, cfg);
    }
    out.state = std::move(next);
    if (!(out.state.s.array() > 0.0).all()) {
      ++out.nonpositive_steps;
      emit(k);
      break;
    }
    if (should_record(k, cfg)) emit(k);
  }
  return out;
}

}  // namespace

DiagRunResult run_adam_like(const DiagState& init, const TargetModel& model, const OptimizerConfig& cfg,
                            const TraceHook& hook) {
  return run_diag(DiagMethod::AdamLike, init, model, cfg, hook);
}

DiagRunResult run_vogn(const DiagState& init, const TargetModel& model, const OptimizerConfig& cfg,
                       const TraceHook& hook) {
  return run_diag(DiagMethod::Vogn, init, model, cfg, hook);
}

CovarianceStep tran_step(const Vec& mu, const SPDMatrix& sigma, const Vec& grad_mu, const Mat& grad_sigma, double t) {
  if (grad_mu.size() != mu.size() || static_cast<long>(sigma.dim()) != mu.size() || grad_sigma.rows() != mu.size() ||
      grad_sigma.cols() != mu.size()) {
    throw DimensionMismatch("tran_step: shapes disagree");
  }
  const Mat& Sig = sigma.data();
  const Mat g = 2.0 * Sig * symmetrize(grad_sigma) * Sig;
  CovarianceStep out;
  out.mu = mu - t * (Sig * grad_mu);
  out.sigma = symmetrize(Sig - t * g + (0.5 * t * t) * g * sigma.solve(g));
  return out;
}

RunResult run_tran(const Family& init, const TargetModel& model, const OptimizerConfig& cfg, const TraceHook& hook) {
  cfg.validate();
  if (init.kind() != FamilyKind::GaussianFull) throw DomainError("run_tran: needs a full Gaussian");
  RngStream rng(cfg.seed, 1);
  RunResult out;
  out.family = init.clone();
  Stopwatch clock(cfg.timing);
  record(out.trace, 0, *out.family, hook, clock, 0, 0);
  for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
    const BlockedPoint p = out.family->blocked_point();
    const Vec mu = p.values[0].col(0);
    const SPDMatrix S(p.values[1]);
    const GaussianLossGradients lg = gaussian_loss_gradients(mu, S, model, rng, cfg.n_mc, cfg.estimator);
    // The entropy contributes -Sigma^{-1} / 2 to the covariance gradient.
    const CovarianceStep step =
        tran_step(mu, SPDMatrix(S.inverse()), lg.grad_mu, lg.grad_sigma - 0.5 * S.data(), cfg.step_size);
    if (!spd_feasible(step.sigma)) throw InfeasibleResult(1);
    out.family = make_gaussian_full(step.mu, SPDMatrix(step.sigma).inverse());
    if (should_record(k, cfg)) record(out.trace, k, *out.family, hook, clock, 0, 0);
  }
  return out;
}

Mat covariance_geodesic_exact(const Mat& sigma, const Mat& g, double t) { return gaussian_geodesic_exact(sigma, g, t); }

}  // namespace iblr
