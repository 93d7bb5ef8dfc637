#pragma once

namespace safebocp {

// Standard normal CDF.
double normal_cdf(double z);

// Standard normal density.
double normal_pdf(double z);

// Inverse standard normal CDF for p in (0,1); throws ConfigError outside.
// normal_inv_cdf(0.5) is exactly 0.
double normal_inv_cdf(double p);

// Two-sided credible coverage of a +-beta band: 2*Phi(beta) - 1, beta >= 0.
double coverage_probability(double beta);

}  // namespace safebocp
