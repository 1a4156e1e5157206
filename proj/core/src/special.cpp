#include "iblr/special.hpp"

#include <cmath>
#include <string>

#include "iblr/errors.hpp"

namespace iblr {

namespace {

constexpr double kShift = 8.0;
constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kEulerGamma = 0.57721566490153286061;

void require_positive(double x, const char* fn) {
  if (!(x > 0.0)) throw DomainError(std::string(fn) + ": argument must be positive");
}

}  // namespace

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < kShift) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  const double series =
      r * (1.0 / 12 - r * (1.0 / 120 - r * (1.0 / 252 - r * (1.0 / 240 - r * (1.0 / 132 - r * (691.0 / 32760 - r / 12))))));
  return acc + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double acc = 0.0;
  while (x < kShift) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // B_2k / x^(2k+1)
  const double series =
      r * (1.0 / 6 - r * (1.0 / 30 - r * (1.0 / 42 - r * (1.0 / 30 - r * (5.0 / 66 - r * (691.0 / 2730 - r * 7.0 / 6)))))) / x;
  return acc + 1.0 / x + 0.5 * r + series;
}

double tetragamma(double x) {
  require_positive(x, "tetragamma");
  double acc = 0.0;
  while (x < kShift) {
    acc -= 2.0 / (x * x * x);
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  // (2k+1) B_2k / x^(2k+2)
  const double series =
      r * r * (0.5 - r * (1.0 / 6 - r * (1.0 / 6 - r * (3.0 / 10 - r * (5.0 / 6 - r * (691.0 / 210 - r * 35.0 / 2))))));
  return acc - r - r / x - series;
}

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  double log_prod = 0.0;
  double prod = 1.0;
  while (x < kShift) {
    prod *= x;
    if (prod > 1e250 || prod < 1e-250) {
      log_prod += std::log(prod);
      prod = 1.0;
    }
    x += 1.0;
  }
  log_prod += std::log(prod);
  const double r = 1.0 / (x * x);
  const double series =
      (1.0 / 12 - r * (1.0 / 360 - r * (1.0 / 1260 - r * (1.0 / 1680 - r * (1.0 / 1188 - r * (691.0 / 360360 - r / 156)))))) / x;
  return (x - 0.5) * std::log(x) - x + kHalfLog2Pi + series - log_prod;
}

double std_normal_logpdf(double x) { return -0.5 * x * x - kHalfLog2Pi; }

namespace {

// Phi(-y) / N(y | 0, 1) for y >= 5 by the Laplace continued fraction
// 1 / (y + 1/(y + 2/(y + 3/(y + ...)))), evaluated with modified Lentz.
double upper_tail_mills(double y) {
  constexpr double tiny = 1e-300;
  double f = y;
  double c = f;
  double d = 0.0;
  for (int n = 1; n < 20000; ++n) {
    const double a = static_cast<double>(n);
    d = y + a * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = y + a / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / f;
}

}  // namespace

double log_ndtr(double x) {
  if (x < -5.0) return std::log(upper_tail_mills(-x)) + std_normal_logpdf(x);
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::sqrt(2.0)));
  return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
}

double log_mills_ratio(double x) {
  if (x < -5.0) return std::log(upper_tail_mills(-x));
  return log_ndtr(x) - std_normal_logpdf(x);
}

double exp_e1(double x) {
  require_positive(x, "exp_e1");
  if (x > 100.0) {
    const int n_terms = static_cast<int>(std::floor(x));
    double term = 1.0;
    double sum = 1.0;
    for (int n = 1; n <= n_terms; ++n) {
      term *= -static_cast<double>(n) / x;
      sum += term;
    }
    return sum / x;
  }
  if (x < 1.0) {
    double term = 1.0;
    double sum = 0.0;
    for (int n = 1; n < 200; ++n) {
      term *= -x / static_cast<double>(n);
      const double add = -term / static_cast<double>(n);
      sum += add;
      if (std::fabs(add) < 1e-17 * std::fabs(sum)) break;
    }
    return std::exp(x) * (-kEulerGamma - std::log(x) + sum);
  }
  // Continued fraction for E1, scaled by exp(x) implicitly.
  constexpr double tiny = 1e-300;
  double b = x + 1.0;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * i;
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h;
}

}  // namespace iblr
