#pragma once

#include <vector>

namespace matfdr {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile (inverse CDF), rational approximation good to
/// well below 1e-10 over (0,1). Throws std::invalid_argument outside (0,1).
double normal_quantile(double p);

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// the standard normal CDF.
double ks_distance_to_normal(std::vector<double> samples);

double mean(const std::vector<double>& xs);
double sample_sd(const std::vector<double>& xs);

/// Pearson correlation; 0 when either vector is constant.
double pearson_correlation(const std::vector<double>& xs,
                           const std::vector<double>& ys);

}  // namespace matfdr
