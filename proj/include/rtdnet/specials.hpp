// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace rtdnet {

// Error function and friends via rational approximations in three ranges
// (small-argument rational in x^2, a mid-range rational scaled by exp(-x^2),
// and an asymptotic rational in 1/x^2 for the far tail). Absolute error is
// below 1e-14 over the full double range; the tests check against a
// series/continued-fraction oracle at 1e-12.
double erf_approx(double x);
double erfc_approx(double x);

// Standard normal CDF, Phi(x) = (1 + erf(x/sqrt(2)))/2, evaluated through
// erfc so the lower tail keeps full relative precision. Saturates to 0/1
// for extreme arguments.
double std_normal_cdf(double x);

double std_normal_pdf(double x);

// log Phi(x). Uses erfc down to x = -28 and an asymptotic tail expansion
// beyond, so the result stays finite for any finite x.
double log_std_normal_cdf(double x);

// phi(x)/Phi(x), the derivative of log Phi. Stable for very negative x.
double std_normal_hazard(double x);

// Phi^{-1}(p) for p in (0,1), by bisection plus Newton polishing on Phi.
double std_normal_quantile(double p);

}  // namespace rtdnet
