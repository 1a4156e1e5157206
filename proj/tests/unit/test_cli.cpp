#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "experiment.hpp"
#include "grid.hpp"
#include "iblr/errors.hpp"
#include "iblr/io.hpp"
#include "manifest.hpp"

using namespace iblr;
using namespace iblr::cli;
namespace fs = std::filesystem;

namespace {

const char* const kMinimal = R"(seed = 3

[model]
name = bayes_linreg
n = 50
d = 2

[optimizer]
max_iters = 20
)";

// Field named by the ConfigError a config raises, or "" if it parses.
std::string failing_field(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

double normal_pdf(double x, double mean, double sd) {
  const double u = (x - mean) / sd;
  return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * 3.14159265358979323846));
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("iblr_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing applies defaults and overrides") {
  const ExperimentConfig c = parse_config(kMinimal, {"optimizer.step_size=0.25", "family.init_precision=2"});
  CHECK(c.seed == 3);
  CHECK(c.model.name == "bayes_linreg");
  CHECK(c.model.data_seed == 3);
  CHECK(c.method == Method::Iblr);
  CHECK(c.family.kind == FamilyKind::GaussianFull);
  CHECK(c.optimizer.step_size == 0.25);
  CHECK(c.optimizer.max_iters == 20);
  CHECK(c.family.init_precision == 2.0);
  CHECK(c.optimizer.seed == 3);
  bool echoed = false;
  for (const auto& [k, v] : c.echo) echoed = echoed || (k == "optimizer.step_size" && v == "0.25");
  CHECK(echoed);
}

TEST_CASE("config errors name the offending field") {
  CHECK(failing_field("[model]\nname = banana\n") == "seed");
  CHECK(failing_field(kMinimal, {"model.bogus=1"}) == "model.bogus");
  CHECK(failing_field(kMinimal, {"family.name=nope"}) == "family.name");
  CHECK(failing_field(kMinimal, {"optimizer.estimator=nope"}) == "optimizer.estimator");
  CHECK(failing_field(kMinimal, {"optimizer.step_size=-1"}) == "optimizer.step_size");
  CHECK(failing_field(kMinimal, {"model.name=no_such_model"}) == "model.name");
  CHECK(failing_field(kMinimal, {"family.init_precision=0"}) == "family.init_precision");
  CHECK(failing_field(kMinimal, {"optimizer.method=tran", "family.name=gaussian_diag"}) == "family.name");
  CHECK(failing_field(kMinimal, {"optimizer.method=adam_like"}) == "family.name");
  CHECK(failing_field(kMinimal, {"metrics.list=test_log_loss"}) == "metrics.list");
  CHECK(failing_field(kMinimal, {"model.name=banana", "metrics.list=elbo_gap"}) == "metrics.list");
  CHECK(failing_field(kMinimal, {"metrics.list=mmd"}) == "metrics.list");
  CHECK(failing_field(kMinimal, {"model.n_train=50"}) == "model.n_train");
  CHECK(failing_field(kMinimal, {"metrics.list=neg_elbo, elbo_gap"}).empty());
}

TEST_CASE("every shipped config parses") {
  std::size_t seen = 0;
  for (const auto& entry : fs::directory_iterator(IBLR_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path().string(), {}));
    ++seen;
  }
  CHECK(seen >= 5);
}

TEST_CASE("silverman bandwidth on 1..100") {
  // Sample variance of 1..n is n (n + 1) / 12; the interpolated quartiles are
  // 25.75 and 75.25, so IQR / 1.34 exceeds the standard deviation.
  Vec s(100);
  for (long i = 0; i < 100; ++i) s(i) = static_cast<double>(i + 1);
  const double sd = std::sqrt(100.0 * 101.0 / 12.0);
  CHECK(49.5 / 1.34 > sd);
  CHECK(silverman_bandwidth(s) == doctest::Approx(0.9 * sd * std::pow(100.0, -0.2)).epsilon(1e-14));
  CHECK_THROWS_AS(silverman_bandwidth(Vec::Ones(1)), DomainError);
}

TEST_CASE("kde of one point is a normal density and integrates to one") {
  const Vec one = Vec::Constant(1, 0.5);
  for (double x : {-1.0, 0.5, 2.0}) CHECK(kde(one, 0.3, x) == doctest::Approx(normal_pdf(x, 0.5, 0.3)));
  const Vec s = (Vec(4) << -1.0, 0.0, 0.2, 3.0).finished();
  double mass = 0.0;
  const double dx = 1e-3;
  for (double x = -10.0; x <= 13.0; x += dx) mass += kde(s, 0.4, x) * dx;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("density grid has one row per point and needs two dimensions") {
  const auto target = toy_density("banana");
  const std::string csv = density_grid_csv(*target, nullptr, {-3.0, 3.0, -3.0, 3.0}, 101);
  CHECK(count_lines(csv) == 101 * 101 + 1);
  CHECK(csv.rfind("x,y,target_logdensity,approx_logdensity\n", 0) == 0);
  const auto big = toy_density("student_t_mixture_small");
  CHECK_THROWS_AS(density_grid_csv(*big, nullptr, {-3.0, 3.0, -3.0, 3.0}, 11), DimensionUnsupported);
}

TEST_CASE("two-dimensional target marginals match a Gaussian") {
  // lbar = 1/2 z^T A z + b^T z with diagonal A is a product of normals with
  // means -b_i / A_ii and variances 1 / A_ii.
  const Mat A = (Mat(2, 2) << 1.0, 0.0, 0.0, 4.0).finished();
  const Vec b = (Vec(2) << -0.5, 1.0).finished();
  const auto target = quadratic_model(A, b);
  Vec xs(81);
  for (long i = 0; i < xs.size(); ++i) xs(i) = -4.0 + 0.1 * static_cast<double>(i);
  const std::array<double, 4> box{-8.0, 8.0, -8.0, 8.0};
  const Vec m0 = target_marginal(*target, 0, xs, box);
  const Vec m1 = target_marginal(*target, 1, xs, box);
  for (long i = 0; i < xs.size(); ++i) {
    CHECK(m0(i) == doctest::Approx(normal_pdf(xs(i), 0.5, 1.0)).epsilon(1e-3).scale(1e-3));
    CHECK(m1(i) == doctest::Approx(normal_pdf(xs(i), -0.25, 0.5)).epsilon(1e-3).scale(1e-3));
  }
}

TEST_CASE("marginal grid rows and columns") {
  const auto target = toy_density("student_t_mixture_small");
  RngStream rng(4, 0);
  Mat draws(500, 5);
  for (long i = 0; i < draws.rows(); ++i)
    for (long j = 0; j < 5; ++j) draws(i, j) = 3.0 * rng.normal();
  MarginalOptions mo;
  mo.res = 21;
  const std::string csv = marginal_grid_csv(*target, draws, mo);
  CHECK(count_lines(csv) == 5 * 21 + 1);
  CHECK(csv.rfind("coord,x,target_marginal,approx_marginal\n1,", 0) == 0);
  CHECK(csv.find("\n5,") != std::string::npos);
  CHECK(csv.find("\n6,") == std::string::npos);
  CHECK_THROWS_AS(marginal_grid_csv(*target, draws.leftCols(4), mo), DimensionMismatch);
}

TEST_CASE("sha256 of a known message") {
  const fs::path dir = scratch_dir("sha");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "abc.txt", std::ios::binary);
    out << "abc";
  }
  CHECK(sha256_file((dir / "abc.txt").string()) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  fs::remove_all(dir);
}

TEST_CASE("run_experiment writes its files and a matching manifest") {
  ExperimentConfig c = parse_config(kMinimal, {"output.samples=50", "metrics.list=neg_elbo, elbo_gap"});
  const fs::path dir = scratch_dir("run");
  const std::vector<std::string> files = run_experiment(c, dir.string());
  CHECK(files == std::vector<std::string>{"trace.csv", "posterior.json", "samples.csv", "manifest.json"});
  const std::string trace = read_file((dir / "trace.csv").string());
  CHECK(trace.rfind("iter,elapsed_ms,neg_elbo,neg_elbo_se,elbo_gap,feasibility_violations,line_search_backtracks\n",
                    0) == 0);
  CHECK(count_lines(trace) == 22);
  CHECK(count_lines(read_file((dir / "samples.csv").string())) == 51);

  const auto manifest = nlohmann::json::parse(read_file((dir / "manifest.json").string()));
  CHECK(manifest["tool"] == "iblr");
  CHECK(manifest["code_version"] == kCodeVersion);
  CHECK(manifest["config"]["seed"] == "3");
  REQUIRE(manifest["files"].size() == 3);
  for (const auto& f : manifest["files"]) {
    const fs::path p = dir / f["name"].get<std::string>();
    CHECK(f["bytes"].get<std::uintmax_t>() == fs::file_size(p));
    CHECK(f["sha256"] == sha256_file(p.string()));
  }
  fs::remove_all(dir);
}
