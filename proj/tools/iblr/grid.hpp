#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "iblr/families.hpp"
#include "iblr/linalg.hpp"
#include "iblr/models.hpp"

namespace iblr::cli {

// x,y,target_logdensity,approx_logdensity over a res x res grid of the box
// (x_lo, x_hi, y_lo, y_hi). The target column is -lbar, unnormalized; the
// approx column is empty without a posterior. Throws DimensionUnsupported
// unless the target (and posterior) are two-dimensional.
std::string density_grid_csv(const TargetModel& target, const Family* approx, const std::array<double, 4>& box,
                             std::size_t res);

// Silverman's rule of thumb 0.9 min(sd, IQR / 1.34) n^{-1/5}.
double silverman_bandwidth(const Vec& samples);
// Gaussian kernel density estimate at x.
double kde(const Vec& samples, double bandwidth, double x);

// Normalized 1-D marginal of the target along `coord` at each of xs. Closed
// form for Student-t mixtures; numerical integration of exp(-lbar) over the
// box for one- and two-dimensional targets. Throws DimensionUnsupported
// otherwise.
Vec target_marginal(const TargetModel& target, std::size_t coord, const Vec& xs, const std::array<double, 4>& box);

struct MarginalOptions {
  std::size_t res = 101;
  std::optional<std::array<double, 2>> range;  // default: mean +- 4 sd of the approx samples
  std::array<double, 4> box{-3.0, 3.0, -3.0, 3.0};  // integration box for 2-D targets
  std::optional<double> bandwidth;  // default: Silverman per coordinate
};

// coord,x,target_marginal,approx_marginal with the approximation estimated by
// a Gaussian KDE of `approx_samples` (rows are draws).
std::string marginal_grid_csv(const TargetModel& target, const Mat& approx_samples, const MarginalOptions& opts);

}  // namespace iblr::cli
