#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "iblr/errors.hpp"
#include "iblr/io.hpp"
#include "iblr/models.hpp"

namespace iblr::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kSchema = {
    {"", {"seed"}},
    {"model",
     {"name", "data", "format", "header", "label_first", "standardize", "n", "d", "n_train", "shuffle_seed",
      "data_seed", "noise_var", "prior_precision", "w", "feature_scale", "k", "a0", "b0", "a", "b", "catalog"}},
    {"family",
     {"name", "k", "init_mean", "init_precision", "init_spread", "init_skew", "alpha", "beta", "weights_frozen",
      "skew_frozen"}},
    {"optimizer",
     {"method", "step_size", "max_iters", "n_mc", "estimator", "line_search", "shrink", "max_backtracks", "r1", "r2",
      "batch_size", "extra_term", "mean_first", "thin_after", "thin_every", "timing"}},
    {"metrics", {"list", "n_samples", "cadence", "test_samples", "mmd_samples", "reference_samples"}},
    {"output", {"dir", "samples"}},
};

const std::vector<std::string> kBuiltinModels = {"bayes_linreg", "bayes_logreg", "gamma_factor", "quadratic"};

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& field) const {
    const auto v = tree_.get_optional<std::string>(pt::ptree::path_type(field, '.'));
    if (!v) return std::nullopt;
    return boost::trim_copy(*v);
  }

  std::string str(const std::string& field, const std::string& fallback) const { return raw(field).value_or(fallback); }

  double real(const std::string& field, double fallback) const {
    const auto v = raw(field);
    return v ? parse_real(field, *v) : fallback;
  }

  std::size_t count(const std::string& field, std::size_t fallback) const {
    const auto v = raw(field);
    return v ? static_cast<std::size_t>(parse_unsigned(field, *v)) : fallback;
  }

  std::optional<std::uint64_t> maybe_u64(const std::string& field) const {
    const auto v = raw(field);
    if (!v) return std::nullopt;
    return parse_unsigned(field, *v);
  }

  bool flag(const std::string& field, bool fallback) const {
    const auto v = raw(field);
    if (!v) return fallback;
    const std::string s = boost::to_lower_copy(*v);
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    throw ConfigError(field, "expected true or false, got '" + *v + "'");
  }

  // Comma-separated reals; semicolons also separate (matrix rows).
  std::vector<double> list(const std::string& field, std::vector<double> fallback) const {
    const auto v = raw(field);
    if (!v) return fallback;
    std::vector<std::string> parts;
    boost::split(parts, *v, boost::is_any_of(",;"));
    std::vector<double> out;
    for (std::string& p : parts) {
      boost::trim(p);
      if (p.empty()) throw ConfigError(field, "empty list entry");
      out.push_back(parse_real(field, p));
    }
    return out;
  }

  static double parse_real(const std::string& field, const std::string& s) {
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    double v = 0.0;
    in >> v;
    if (in.fail() || !in.eof()) throw ConfigError(field, "expected a number, got '" + s + "'");
    return v;
  }

  static std::uint64_t parse_unsigned(const std::string& field, const std::string& s) {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw ConfigError(field, "expected a non-negative integer, got '" + s + "'");
    }
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError(field, "integer out of range: '" + s + "'");
    }
  }

 private:
  const pt::ptree& tree_;
};

void check_schema(const pt::ptree& tree) {
  for (const auto& [key, child] : tree) {
    if (child.empty()) {
      if (!kSchema.at("").count(key)) throw ConfigError(key, "unknown top-level key");
      continue;
    }
    const auto sec = kSchema.find(key);
    if (sec == kSchema.end() || key.empty()) throw ConfigError(key, "unknown section");
    for (const auto& [k, v] : child) {
      if (!v.empty() || !sec->second.count(k)) throw ConfigError(key + "." + k, "unknown key");
    }
  }
}

void apply_override(pt::ptree& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set", "expected section.key=value, got '" + assignment + "'");
  }
  const std::string key = boost::trim_copy(assignment.substr(0, eq));
  const std::string value = boost::trim_copy(assignment.substr(eq + 1));
  const auto dot = key.find('.');
  if (dot != std::string::npos && key.find('.', dot + 1) != std::string::npos) {
    throw ConfigError(key, "override keys have at most one dot");
  }
  tree.put(pt::ptree::path_type(key, '.'), value);
}

std::vector<std::pair<std::string, std::string>> flatten(const pt::ptree& tree) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [key, child] : tree) {
    if (child.empty()) out.emplace_back(key, boost::trim_copy(child.data()));
  }
  for (const auto& [key, child] : tree) {
    for (const auto& [k, v] : child) out.emplace_back(key + "." + k, boost::trim_copy(v.data()));
  }
  return out;
}

// Re-raises an optimizer validation error under the optimizer section.
[[noreturn]] void rethrow_in_section(const ConfigError& e, const std::string& section) {
  std::string what = e.what();
  const std::string prefix = e.field() + ": ";
  if (what.rfind(prefix, 0) == 0) what = what.substr(prefix.size());
  throw ConfigError(section + "." + e.field(), what);
}

Method parse_method(const std::string& s) {
  if (s == "iblr") return Method::Iblr;
  if (s == "blr") return Method::Blr;
  if (s == "adam_like") return Method::AdamLike;
  if (s == "vogn") return Method::Vogn;
  if (s == "tran") return Method::Tran;
  throw ConfigError("optimizer.method", "unknown method '" + s + "' (iblr, blr, adam_like, vogn, tran)");
}

void validate_model_name(const ModelSpec& m) {
  if (m.name.empty()) throw ConfigError("model.name", "required");
  if (std::find(kBuiltinModels.begin(), kBuiltinModels.end(), m.name) != kBuiltinModels.end()) return;
  Catalog cat;
  try {
    cat = load_catalog(m.catalog.empty() ? default_catalog_path() : m.catalog);
  } catch (const Error& e) {
    throw ConfigError("model.catalog", e.what());
  }
  if (!cat.count(m.name)) throw ConfigError("model.name", "unknown model '" + m.name + "'");
}

ExperimentConfig build(const pt::ptree& tree) {
  check_schema(tree);
  const Reader r(tree);
  ExperimentConfig c;

  const auto seed = r.maybe_u64("seed");
  if (!seed) throw ConfigError("seed", "required; runs are never seeded from the clock");
  c.seed = *seed;

  ModelSpec& m = c.model;
  m.name = r.str("model.name", "");
  m.data = r.str("model.data", m.data);
  m.format = r.str("model.format", m.format);
  if (m.format != "csv" && m.format != "libsvm") throw ConfigError("model.format", "expected csv or libsvm");
  if (const auto h = r.raw("model.header"); h && *h != "auto") m.header = r.flag("model.header", false);
  m.label_first = r.flag("model.label_first", m.label_first);
  m.standardize = r.flag("model.standardize", m.standardize);
  m.n = r.count("model.n", m.n);
  m.d = r.count("model.d", m.d);
  m.n_train = r.count("model.n_train", m.n_train);
  m.shuffle_seed = r.maybe_u64("model.shuffle_seed");
  m.data_seed = r.maybe_u64("model.data_seed").value_or(c.seed);
  m.noise_var = r.real("model.noise_var", m.noise_var);
  m.prior_precision = r.real("model.prior_precision", m.prior_precision);
  m.w = r.list("model.w", {});
  m.feature_scale = r.real("model.feature_scale", m.feature_scale);
  m.k = r.count("model.k", m.k);
  m.a0 = r.real("model.a0", m.a0);
  m.b0 = r.real("model.b0", m.b0);
  m.a = r.list("model.a", {});
  m.b = r.list("model.b", {});
  m.catalog = r.str("model.catalog", "");
  validate_model_name(m);
  if (!(m.noise_var > 0.0)) throw ConfigError("model.noise_var", "must be positive");
  if (!(m.prior_precision >= 0.0)) throw ConfigError("model.prior_precision", "must be non-negative");
  if (m.n_train > 0 && m.data == "synthetic" && m.n_train >= m.n) {
    throw ConfigError("model.n_train", "must be smaller than model.n to leave a test split");
  }

  FamilySpec& f = c.family;
  try {
    f.kind = parse_family_kind(r.str("family.name", "gaussian_full"));
  } catch (const ConfigError& e) {
    std::string what = e.what();
    what = what.substr(e.field().size() + 2);
    throw ConfigError("family.name", what);
  }
  f.k = r.count("family.k", f.k);
  if (f.k == 0) throw ConfigError("family.k", "must be at least 1");
  f.init_mean = r.list("family.init_mean", f.init_mean);
  f.init_precision = r.real("family.init_precision", f.init_precision);
  if (!(f.init_precision > 0.0)) throw ConfigError("family.init_precision", "must be positive");
  f.init_spread = r.real("family.init_spread", f.init_spread);
  f.init_skew = r.list("family.init_skew", f.init_skew);
  f.alpha = r.real("family.alpha", f.alpha);
  f.beta = r.real("family.beta", f.beta);
  if (!(f.alpha > 0.0)) throw ConfigError("family.alpha", "must be positive");
  if (!(f.beta > 0.0)) throw ConfigError("family.beta", "must be positive");
  f.weights_frozen = r.flag("family.weights_frozen", f.weights_frozen);
  f.skew_frozen = r.flag("family.skew_frozen", f.skew_frozen);

  OptimizerConfig& o = c.optimizer;
  c.method = parse_method(r.str("optimizer.method", "iblr"));
  o.seed = c.seed;
  o.step_size = r.real("optimizer.step_size", o.step_size);
  o.max_iters = r.count("optimizer.max_iters", o.max_iters);
  o.n_mc = r.count("optimizer.n_mc", o.n_mc);
  try {
    o.estimator = parse_estimator(r.str("optimizer.estimator", "rep"));
  } catch (const ConfigError& e) {
    rethrow_in_section(e, "optimizer");
  }
  o.line_search.enabled = r.flag("optimizer.line_search", o.line_search.enabled);
  o.line_search.shrink = r.real("optimizer.shrink", o.line_search.shrink);
  o.line_search.max_backtracks = r.count("optimizer.max_backtracks", o.line_search.max_backtracks);
  o.adam.r1 = r.real("optimizer.r1", o.adam.r1);
  o.adam.r2 = r.real("optimizer.r2", o.adam.r2);
  o.adam.batch_size = r.count("optimizer.batch_size", o.adam.batch_size);
  o.adam.extra_term = r.flag("optimizer.extra_term", o.adam.extra_term);
  o.adam.mean_first = r.flag("optimizer.mean_first", o.adam.mean_first);
  o.thin_after = r.count("optimizer.thin_after", o.thin_after);
  o.thin_every = r.count("optimizer.thin_every", o.thin_every);
  o.timing = r.flag("optimizer.timing", o.timing);
  try {
    o.validate();
  } catch (const ConfigError& e) {
    rethrow_in_section(e, "optimizer");
  }

  const bool gaussian_full = f.kind == FamilyKind::GaussianFull;
  if (c.method == Method::Tran) {
    if (!gaussian_full) throw ConfigError("family.name", "method tran needs gaussian_full");
    if (o.estimator != Estimator::Rep && o.estimator != Estimator::Hess) {
      throw ConfigError("optimizer.estimator", "method tran takes rep or hess");
    }
  }
  if ((c.method == Method::AdamLike || c.method == Method::Vogn) && f.kind != FamilyKind::GaussianDiag) {
    throw ConfigError("family.name", std::string("method ") + method_name(c.method) + " needs gaussian_diag");
  }

  MetricsSpec& ms = c.metrics;
  if (const auto list = r.raw("metrics.list")) {
    ms.neg_elbo = false;
    std::vector<std::string> names;
    boost::split(names, *list, boost::is_any_of(","));
    for (std::string& n : names) {
      boost::trim(n);
      if (n == "neg_elbo") ms.neg_elbo = true;
      else if (n == "elbo_gap") ms.elbo_gap = true;
      else if (n == "test_log_loss") ms.test_log_loss = true;
      else if (n == "mmd") ms.mmd = true;
      else throw ConfigError("metrics.list", "unknown metric '" + n + "' (neg_elbo, elbo_gap, test_log_loss, mmd)");
    }
  }
  ms.n_samples = r.count("metrics.n_samples", ms.n_samples);
  if (ms.n_samples < 2) throw ConfigError("metrics.n_samples", "must be at least 2");
  ms.cadence = r.count("metrics.cadence", ms.cadence);
  if (ms.cadence == 0) throw ConfigError("metrics.cadence", "must be at least 1");
  ms.test_samples = r.count("metrics.test_samples", ms.test_samples);
  ms.mmd_samples = r.count("metrics.mmd_samples", ms.mmd_samples);
  ms.reference_samples = r.count("metrics.reference_samples", ms.reference_samples);
  if (ms.elbo_gap && m.name != "bayes_linreg" && m.name != "quadratic") {
    throw ConfigError("metrics.list", "elbo_gap needs a model with a closed-form optimum");
  }
  if (ms.test_log_loss && m.name != "bayes_linreg" && m.name != "bayes_logreg") {
    throw ConfigError("metrics.list", "test_log_loss needs a regression model");
  }
  if (ms.test_log_loss && m.n_train == 0) throw ConfigError("metrics.list", "test_log_loss needs model.n_train");
  if (ms.mmd && m.name.rfind("student_t_mixture", 0) != 0) {
    throw ConfigError("metrics.list", "mmd needs a target that can be sampled (student_t_mixture)");
  }

  c.out_dir = r.str("output.dir", c.out_dir);
  c.output_samples = r.count("output.samples", c.output_samples);
  c.echo = flatten(tree);
  return c;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::Iblr: return "iblr";
    case Method::Blr: return "blr";
    case Method::AdamLike: return "adam_like";
    case Method::Vogn: return "vogn";
    case Method::Tran: return "tran";
  }
  return "unknown";
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  for (const std::string& o : overrides) apply_override(tree, o);
  return build(tree);
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError("config", e.what());
  }
  return parse_config(text, overrides);
}

}  // namespace iblr::cli
