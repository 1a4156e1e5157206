#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iblr/families.hpp"
#include "iblr/optimizers.hpp"

namespace iblr::cli {

enum class Method { Iblr, Blr, AdamLike, Vogn, Tran };

const char* method_name(Method m);

struct ModelSpec {
  std::string name;           // bayes_linreg, bayes_logreg, gamma_factor, quadratic, or a toy density
  std::string data = "synthetic";  // "synthetic" or a dataset path
  std::string format = "csv";
  std::optional<bool> header;
  bool label_first = false;
  bool standardize = false;
  std::size_t n = 200;
  std::size_t d = 2;
  std::size_t n_train = 0;
  std::optional<std::uint64_t> shuffle_seed;
  std::uint64_t data_seed = 0;
  double noise_var = 1.0;
  double prior_precision = 1.0;
  std::vector<double> w;  // synthetic logistic weights
  double feature_scale = 1.0;
  std::size_t k = 1;  // gamma factor rank
  double a0 = 1.0, b0 = 1.0;
  std::vector<double> a;  // quadratic: row-major d x d
  std::vector<double> b;
  std::string catalog;  // toy densities: catalog path override
};

struct FamilySpec {
  FamilyKind kind = FamilyKind::GaussianFull;
  std::size_t k = 1;
  std::vector<double> init_mean = {0.0};
  double init_precision = 1.0;
  double init_spread = 0.0;
  std::vector<double> init_skew = {0.0};
  double alpha = 1.0, beta = 1.0;
  bool weights_frozen = true;
  bool skew_frozen = false;
};

struct MetricsSpec {
  bool neg_elbo = true;
  bool elbo_gap = false;
  bool test_log_loss = false;
  bool mmd = false;
  std::size_t n_samples = 100;
  std::size_t cadence = 1;
  std::size_t test_samples = 100;
  std::size_t mmd_samples = 2000;
  std::size_t reference_samples = 2000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ModelSpec model;
  FamilySpec family;
  Method method = Method::Iblr;
  OptimizerConfig optimizer;
  MetricsSpec metrics;
  std::string out_dir = "iblr_out";
  std::size_t output_samples = 0;  // rows of samples.csv; 0 skips the file
  // Every key = value pair after overrides, as "section.key" in file order.
  std::vector<std::pair<std::string, std::string>> echo;
};

// Parses an INI file and applies "section.key=value" overrides in order.
// Throws ConfigError naming the offending field.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides);
ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides);

}  // namespace iblr::cli
