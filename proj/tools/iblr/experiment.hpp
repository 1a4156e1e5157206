#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "iblr/families.hpp"
#include "iblr/models.hpp"

namespace iblr::cli {

struct BuiltModel {
  std::shared_ptr<TargetModel> model;
  std::optional<Dataset> test;  // held-out rows when model.n_train splits the data
  std::optional<Mat> reference;  // exact target draws, for mmd
};

// reference_samples > 0 draws exact samples from targets that support it.
BuiltModel build_model(const ModelSpec& spec, std::size_t reference_samples);

// Initial approximation of dimension `dim`. Throws ConfigError on a mismatch.
std::unique_ptr<Family> initial_family(const FamilySpec& spec, std::size_t dim, std::uint64_t seed);

// Runs one experiment and writes trace.csv, posterior.json, samples.csv (when
// requested) and manifest.json into out_dir. Returns the written file names.
std::vector<std::string> run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

}  // namespace iblr::cli
