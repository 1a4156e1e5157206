#include "experiment.hpp"

#include <cmath>
#include <filesystem>

#include "iblr/errors.hpp"
#include "iblr/io.hpp"
#include "iblr/metrics.hpp"
#include "iblr/optimizers.hpp"
#include "iblr/rng.hpp"
#include "manifest.hpp"

namespace iblr::cli {

namespace {

// Stream ids under the experiment seed; the optimizer itself uses stream 1.
constexpr std::uint64_t kDataStream = 11;
constexpr std::uint64_t kReferenceStream = 13;
constexpr std::uint64_t kInitStream = 5;
constexpr std::uint64_t kSampleStream = 17;

Vec broadcast(const std::vector<double>& v, std::size_t dim, const char* field) {
  if (v.size() == 1) return Vec::Constant(static_cast<long>(dim), v[0]);
  if (v.size() != dim) {
    throw ConfigError(field, "needs 1 or " + std::to_string(dim) + " values, got " + std::to_string(v.size()));
  }
  return Eigen::Map<const Vec>(v.data(), static_cast<long>(v.size()));
}

Dataset load_or_generate(const ModelSpec& m, bool logistic) {
  if (m.data != "synthetic") {
    LoadOptions opts;
    opts.format = m.format == "libsvm" ? DatasetFormat::Libsvm : DatasetFormat::Csv;
    opts.header = m.header;
    opts.label_first = m.label_first;
    opts.standardize = m.standardize;
    opts.n_train = m.n_train;
    opts.shuffle_seed = m.shuffle_seed;
    return load_dataset(m.data, opts);
  }
  RngStream rng(m.data_seed, kDataStream);
  Dataset ds;
  if (logistic) {
    const Vec w = m.w.empty() ? Vec::Ones(static_cast<long>(m.d)) : broadcast(m.w, m.w.size(), "model.w");
    ds = synthetic_logistic(rng, m.n, w, m.feature_scale);
  } else {
    ds = synthetic_linear(rng, m.n, m.d, std::sqrt(m.noise_var));
  }
  if (m.standardize) standardize_columns(ds);
  if (m.n_train > 0) split_dataset(ds, m.n_train, m.shuffle_seed);
  return ds;
}

std::vector<std::string> sample_header(std::size_t dim) {
  std::vector<std::string> h;
  for (std::size_t i = 1; i <= dim; ++i) h.push_back("z" + std::to_string(i));
  return h;
}

}  // namespace

BuiltModel build_model(const ModelSpec& m, std::size_t reference_samples) {
  BuiltModel out;
  if (m.name == "bayes_linreg" || m.name == "bayes_logreg") {
    const bool logistic = m.name == "bayes_logreg";
    const Dataset ds = load_or_generate(m, logistic);
    const Dataset train = ds.train_set();
    out.model = logistic ? std::shared_ptr<TargetModel>(bayes_logreg(train, m.prior_precision))
                         : std::shared_ptr<TargetModel>(bayes_linreg(train, m.noise_var, m.prior_precision));
    if (!ds.test.empty()) out.test = ds.test_set();
    return out;
  }
  if (m.name == "gamma_factor") {
    RngStream rng(m.data_seed, kDataStream);
    out.model = gamma_factor_model(gamma_factor_generate(rng, m.n, m.d, m.k, m.a0, m.b0));
    return out;
  }
  if (m.name == "quadratic") {
    const std::size_t d = m.b.size();
    if (d == 0) throw ConfigError("model.b", "quadratic needs the linear term b");
    if (m.a.size() != d * d) throw ConfigError("model.a", "quadratic needs a d x d matrix with d = size of b");
    Mat A(static_cast<long>(d), static_cast<long>(d));
    for (std::size_t i = 0; i < d * d; ++i) A(static_cast<long>(i / d), static_cast<long>(i % d)) = m.a[i];
    out.model = quadratic_model(A, Eigen::Map<const Vec>(m.b.data(), static_cast<long>(d)));
    return out;
  }
  const Catalog cat = load_catalog(m.catalog.empty() ? default_catalog_path() : m.catalog);
  const auto it = cat.find(m.name);
  if (it == cat.end()) throw ConfigError("model.name", "unknown model '" + m.name + "'");
  out.model = toy_density(m.name, it->second);
  if (reference_samples > 0) {
    if (const auto* t = dynamic_cast<const StudentTMixture*>(out.model.get())) {
      RngStream rng(m.data_seed, kReferenceStream);
      out.reference = t->sample(rng, reference_samples);
    }
  }
  return out;
}

std::unique_ptr<Family> initial_family(const FamilySpec& f, std::size_t dim, std::uint64_t seed) {
  const Vec mean = broadcast(f.init_mean, dim, "family.init_mean");
  const long d = static_cast<long>(dim);
  switch (f.kind) {
    case FamilyKind::GaussianFull:
      return make_gaussian_full(mean, f.init_precision * Mat::Identity(d, d));
    case FamilyKind::GaussianDiag:
      return make_gaussian_diag(mean, Vec::Constant(d, f.init_precision));
    case FamilyKind::Gamma:
    case FamilyKind::Exponential:
    case FamilyKind::InverseGaussian:
      if (dim != 1) {
        throw ConfigError("family.name", "scalar families need a one-dimensional model, this one has dimension " +
                                             std::to_string(dim));
      }
      if (f.kind == FamilyKind::Gamma) return make_gamma(f.alpha, f.beta);
      if (f.kind == FamilyKind::Exponential) return make_exponential(f.beta);
      return make_inverse_gaussian(f.alpha, f.beta);
    case FamilyKind::MixtureOfGaussians: {
      RngStream rng(seed, kInitStream);
      std::vector<Vec> mus;
      std::vector<Mat> Ss;
      for (std::size_t c = 0; c < f.k; ++c) {
        Vec m = mean;
        for (long i = 0; i < d; ++i) m(i) += f.init_spread * (2.0 * rng.uniform() - 1.0);
        mus.push_back(m);
        Ss.push_back(f.init_precision * Mat::Identity(d, d));
      }
      FamilyOptions opts;
      opts.weights_frozen = f.weights_frozen;
      return make_mog({}, mus, Ss, opts);
    }
    case FamilyKind::SkewGaussian: {
      FamilyOptions opts;
      opts.alpha_frozen = f.skew_frozen;
      return make_skew_gaussian(mean, broadcast(f.init_skew, dim, "family.init_skew"),
                                f.init_precision * Mat::Identity(d, d), opts);
    }
  }
  throw ConfigError("family.name", "unsupported family");
}

std::vector<std::string> run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const std::string started = utc_timestamp();
  const BuiltModel built = build_model(cfg.model, cfg.metrics.mmd ? cfg.metrics.reference_samples : 0);
  const TargetModel& model = *built.model;
  const std::unique_ptr<Family> init = initial_family(cfg.family, model.dim(), cfg.seed);

  const MetricsSpec& ms = cfg.metrics;
  TraceHook hook;
  if (ms.neg_elbo || ms.elbo_gap || ms.test_log_loss || ms.mmd) {
    EvaluatorConfig ec;
    ec.n_samples = ms.n_samples;
    ec.seed = cfg.seed;
    ec.elbo_gap = ms.elbo_gap;
    ec.test = ms.test_log_loss && built.test ? &*built.test : nullptr;
    ec.test_samples = ms.test_samples;
    ec.reference = ms.mmd && built.reference ? &*built.reference : nullptr;
    ec.mmd_samples = ms.mmd_samples;
    ec.cadence = ms.cadence;
    hook = make_evaluator(model, ec);
  }

  OptimizerConfig opt = cfg.optimizer;
  std::unique_ptr<Family> final_q;
  Trace trace;
  switch (cfg.method) {
    case Method::Iblr: {
      RunResult r = run_iblr(*init, model, opt, hook);
      final_q = std::move(r.family);
      trace = std::move(r.trace);
      break;
    }
    case Method::Blr: {
      RunResult r = run_blr(*init, model, opt, hook);
      final_q = std::move(r.family);
      trace = std::move(r.trace);
      break;
    }
    case Method::Tran: {
      RunResult r = run_tran(*init, model, opt, hook);
      final_q = std::move(r.family);
      trace = std::move(r.trace);
      break;
    }
    case Method::AdamLike:
    case Method::Vogn: {
      const double n = model.num_examples() > 0 ? static_cast<double>(model.num_examples()) : 1.0;
      opt.adam.n_train = n;
      opt.adam.prior_precision = model.prior_precision();
      const BlockedPoint p = init->blocked_point();
      const Vec mu = p.values[0].col(0);
      const DiagState start = DiagState::init(mu, Vec::Constant(mu.size(), cfg.family.init_precision / n));
      DiagRunResult r = cfg.method == Method::Vogn ? run_vogn(start, model, opt, hook)
                                                   : run_adam_like(start, model, opt, hook);
      if (r.nonpositive_steps > 0) throw InfeasibleResult(1);
      final_q = r.state.family(n);
      trace = std::move(r.trace);
      break;
    }
  }

  namespace fs = std::filesystem;
  std::vector<std::string> files;
  auto emit = [&](const std::string& name, const std::string& content) {
    write_file((fs::path(out_dir) / name).string(), content);
    files.push_back(name);
  };
  emit("trace.csv", trace.to_csv());
  emit("posterior.json", family_to_json(*final_q) + "\n");
  if (cfg.output_samples > 0) {
    RngStream rng(cfg.seed, kSampleStream);
    emit("samples.csv", matrix_csv(final_q->sample(rng, cfg.output_samples), sample_header(final_q->dim())));
  }
  ManifestInput mi;
  mi.command = "run";
  mi.config = cfg.echo;
  mi.started_at = started;
  mi.finished_at = utc_timestamp();
  mi.dir = out_dir;
  mi.files = files;
  write_manifest(mi);
  files.push_back("manifest.json");
  return files;
}

}  // namespace iblr::cli
