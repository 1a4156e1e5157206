#pragma once

namespace iblr {

// Polygamma functions: shift by recurrence to x >= 8, then asymptotic series.
// All throw DomainError for x <= 0.
double digamma(double x);
double trigamma(double x);
double tetragamma(double x);

// Stirling series after the same upward shift.
double log_gamma(double x);

// log Phi(x), stable for very negative x.
double log_ndtr(double x);

// log[Phi(x) / N(x | 0, 1)].
double log_mills_ratio(double x);

// exp(x) * E1(x) for x > 0. Uses the alternating asymptotic sum above 100.
double exp_e1(double x);

double std_normal_logpdf(double x);

}  // namespace iblr
