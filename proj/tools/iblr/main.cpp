#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "checks.hpp"
#include "config.hpp"
#include "experiment.hpp"
#include "grid.hpp"
#include "iblr/errors.hpp"
#include "iblr/io.hpp"
#include "iblr/rng.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace iblr;
using namespace iblr::cli;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    std::cerr << "iblr: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "iblr: error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

std::string output_dir(const ExperimentConfig& cfg) {
  const char* env = std::getenv("IBLR_OUT");
  return env && *env ? std::string(env) : cfg.out_dir;
}

int cmd_run(const std::string& config, const std::vector<std::string>& sets) {
  const ExperimentConfig cfg = load_config(config, sets);
  const std::string dir = output_dir(cfg);
  const std::vector<std::string> files = run_experiment(cfg, dir);
  std::cout << "wrote";
  for (const std::string& f : files) std::cout << " " << f;
  std::cout << " to " << dir << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& suite) {
  if (!checks::is_suite(suite)) {
    std::cerr << "iblr: unknown suite '" << suite << "' (special-functions, christoffel, retraction, theorems, "
              << "counterexample, all)\n";
    return kExitConfig;
  }
  const checks::Rows rows = checks::run_suite(suite);
  std::cout << checks::format_table(rows);
  return checks::all_pass(rows) ? kExitOk : kExitCheckFailed;
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& s) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) throw ConfigError("--seeds", "expected a..b, got '" + s + "'");
  try {
    std::size_t used = 0;
    const std::string a = s.substr(0, dots), b = s.substr(dots + 2);
    const std::uint64_t lo = std::stoull(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    const std::uint64_t hi = std::stoull(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    if (hi < lo) throw ConfigError("--seeds", "empty range '" + s + "'");
    return {lo, hi};
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("--seeds", "expected a..b with non-negative integers, got '" + s + "'");
  }
}

int cmd_sweep(const std::string& config, const std::string& seeds, const std::vector<std::string>& sets,
              std::size_t jobs) {
  const auto [lo, hi] = parse_seed_range(seeds);
  std::vector<ExperimentConfig> cfgs;
  for (std::uint64_t s = lo; s <= hi; ++s) {
    std::vector<std::string> o = sets;
    o.push_back("seed=" + std::to_string(s));
    cfgs.push_back(load_config(config, o));
  }
  const std::string base = output_dir(cfgs.front());
  std::vector<int> codes(cfgs.size(), kExitOk);
  std::atomic<std::size_t> next{0};
  std::mutex log;
  auto worker = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      const std::string dir = (fs::path(base) / ("seed_" + std::to_string(cfgs[i].seed))).string();
      codes[i] = guarded([&] {
        run_experiment(cfgs[i], dir);
        return kExitOk;
      });
      std::lock_guard<std::mutex> lock(log);
      std::cout << "seed " << cfgs[i].seed << ": " << (codes[i] == kExitOk ? "ok" : "failed") << " -> " << dir
                << "\n";
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < std::max<std::size_t>(jobs, 1); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  int worst = kExitOk;
  for (int c : codes) worst = std::max(worst, c);
  return worst;
}

struct GridArgs {
  std::string model;
  std::string config;
  std::string posterior;
  std::string samples;
  std::string out;
  std::size_t res = 101;
  std::vector<double> box = {-3.0, 3.0, -3.0, 3.0};
  std::vector<double> range;
  bool marginals = false;
  std::size_t n_samples = 5000;
  std::uint64_t seed = 0;
  double bandwidth = 0.0;
};

// Numeric CSV with a header row, as written to samples.csv.
Mat read_samples_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  in.imbue(std::locale::classic());
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    std::vector<double> row;
    std::istringstream fields(line);
    fields.imbue(std::locale::classic());
    std::string f;
    while (std::getline(fields, f, ',')) {
      std::istringstream num(f);
      num.imbue(std::locale::classic());
      double v = 0.0;
      num >> v;
      if (num.fail()) throw ParseError(line_no, "not a number: '" + f + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw ParseError(line_no, "ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(line_no, path + " has no data rows");
  Mat m(static_cast<long>(rows.size()), static_cast<long>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
  return m;
}

int cmd_grid(const GridArgs& a) {
  if (a.model.empty() == a.config.empty()) throw ConfigError("--model", "give exactly one of --model or --config");
  ModelSpec spec;
  if (!a.config.empty()) {
    spec = load_config(a.config, {}).model;
  } else {
    spec.name = a.model;
  }
  const BuiltModel built = build_model(spec, 0);
  std::unique_ptr<Family> q;
  if (!a.posterior.empty()) q = family_from_json(read_file(a.posterior));
  if (a.box.size() != 4) throw ConfigError("--box", "expected x_lo,x_hi,y_lo,y_hi");
  const std::array<double, 4> box{a.box[0], a.box[1], a.box[2], a.box[3]};

  std::string csv;
  if (!a.marginals) {
    if (a.res < 2) throw ConfigError("--res", "must be at least 2");
    csv = density_grid_csv(*built.model, q.get(), box, a.res);
  } else {
    Mat draws;
    if (!a.samples.empty()) {
      draws = read_samples_csv(a.samples);
    } else if (q) {
      RngStream rng(a.seed, 0);
      draws = q->sample(rng, a.n_samples);
    } else {
      throw ConfigError("--posterior", "marginals need --posterior or --samples");
    }
    MarginalOptions mo;
    mo.res = a.res;
    mo.box = box;
    if (!a.range.empty()) {
      if (a.range.size() != 2 || !(a.range[1] > a.range[0])) throw ConfigError("--range", "expected lo,hi with lo < hi");
      mo.range = std::array<double, 2>{a.range[0], a.range[1]};
    }
    if (a.bandwidth > 0.0) mo.bandwidth = a.bandwidth;
    csv = marginal_grid_csv(*built.model, draws, mo);
  }
  write_file(a.out, csv);
  std::cout << "wrote " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational inference with the improved Bayesian learning rule"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kCodeVersion));

  std::string config;
  std::vector<std::string> sets;
  auto* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("--config", config, "INI experiment config")->required();
  run->add_option("--set", sets, "Override a config value, e.g. optimizer.step_size=0.2")->take_all();

  std::string suite;
  auto* verify = app.add_subcommand("verify", "Run oracle cross-checks and print a pass/fail table");
  verify->add_option("--suite", suite,
                     "special-functions, christoffel, retraction, theorems, counterexample or all")
      ->required();

  GridArgs ga;
  auto* grid = app.add_subcommand("grid", "Export density or marginal grids for plotting");
  grid->add_option("--model", ga.model, "Toy density or built-in model name");
  grid->add_option("--config", ga.config, "Take the model from an experiment config instead");
  grid->add_option("--posterior", ga.posterior, "posterior.json written by iblr run");
  grid->add_option("--samples", ga.samples, "samples.csv to use for the approximate marginals");
  grid->add_option("--out", ga.out, "Output CSV path")->required();
  grid->add_option("--res", ga.res, "Points per axis (default 101)");
  grid->add_option("--box", ga.box, "x_lo,x_hi,y_lo,y_hi (default -3,3,-3,3)")->delimiter(',')->expected(4);
  grid->add_option("--range", ga.range, "lo,hi for every marginal axis")->delimiter(',')->expected(2);
  grid->add_flag("--marginals", ga.marginals, "Write per-coordinate 1-D marginals");
  grid->add_option("--n-samples", ga.n_samples, "Posterior draws for the KDE (default 5000)");
  grid->add_option("--seed", ga.seed, "Seed for posterior draws (default 0)");
  grid->add_option("--bandwidth", ga.bandwidth, "KDE bandwidth (default: Silverman's rule)");

  std::string sweep_config, seeds;
  std::vector<std::string> sweep_sets;
  std::size_t jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run one experiment per seed into seed_<n> subdirectories");
  sweep->add_option("--config", sweep_config, "INI experiment config")->required();
  sweep->add_option("--seeds", seeds, "Inclusive range a..b")->required();
  sweep->add_option("--set", sweep_sets, "Override a config value")->take_all();
  sweep->add_option("--jobs", jobs, "Experiments run concurrently (default 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run) return guarded([&] { return cmd_run(config, sets); });
  if (*verify) return guarded([&] { return cmd_verify(suite); });
  if (*grid) return guarded([&] { return cmd_grid(ga); });
  if (*sweep) return guarded([&] { return cmd_sweep(sweep_config, seeds, sweep_sets, jobs); });
  return kExitConfig;
}
