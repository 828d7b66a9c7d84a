// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "rtdnet/rng.hpp"
#include "rtdnet/tape.hpp"

namespace rtdnet {

enum class Family { kLognormal, kInvGauss };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Parameter vector of a runtime-distribution family.
//   lognormal:        p1 = mu (log-scale location, any real), p2 = sigma > 0
//   inverse Gaussian: p1 = mu > 0 (mean),                     p2 = lambda > 0
// Construction clamps the degenerate directions (sigma >= sigma_min,
// lambda <= lambda_max) so likelihoods stay finite when a fitted sample set
// collapses onto a point.
struct DistParams {
  Family family = Family::kLognormal;
  double p1 = 0.0;
  double p2 = 1.0;

  DistParams() = default;
  DistParams(Family f, double a, double b);
};

double log_pdf(const DistParams& p, double t);
double pdf(const DistParams& p, double t);
double cdf(const DistParams& p, double t);
double survival(const DistParams& p, double t);      // computed tail-first, not as 1-cdf
double log_survival(const DistParams& p, double t);  // finite floor handled by callers
double quantile(const DistParams& p, double prob);

// Closed-form maximum-likelihood fit. All samples must be positive.
DistParams mle(Family f, const std::vector<double>& samples);

double sample(const DistParams& p, Rng& rng);
std::vector<double> sample(const DistParams& p, Rng& rng, int n);

// Rescale a parameter vector fitted on t/scale to the distribution of t.
DistParams params_to_raw_units(const DistParams& scaled, double runtime_scale);

// --- differentiable counterparts -----------------------------------------
//
// Column-vector graph builders used inside loss functions. Parameter inputs
// are r x 1 nodes; observation times enter as constants. Values agree with
// the scalar functions above to rounding.

struct ParamCols {
  Var p1, p2;
};

// MLE over each row of an r x n sample matrix, with the same degenerate
// clamps as the scalar fit (gradient is zero in a clamped direction).
ParamCols mle_cols(Tape& t, Family f, Var samples);

Var log_pdf_cols(Tape& t, Family f, ParamCols params, Var times_col);
Var log_survival_cols(Tape& t, Family f, ParamCols params, Var times_col);

namespace detail {
// Shared piece of the inverse-Gaussian CDF/survival:
//   a = sqrt(lambda/t) (t/mu - 1),  b = sqrt(lambda/t) (t/mu + 1),
//   cdf = Phi(a) + exp(2 lambda/mu + log Phi(-b)).
// The second term is assembled in log space; the direct product overflows
// once lambda/mu exceeds a few hundred.
void invgauss_cdf_terms(double mu, double lambda, double t, double* phi_a_arg,
                        double* log_second_term);
}  // namespace detail

}  // namespace rtdnet
