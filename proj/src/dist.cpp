// SPDX-License-Identifier: Apache-2.0
#include "rtdnet/dist.hpp"

#include <algorithm>
#include <cmath>

#include "rtdnet/common.hpp"
#include "rtdnet/specials.hpp"

namespace rtdnet {

using constants::lambda_max;
using constants::ln_2pi;
using constants::sigma_min;

std::string family_name(Family f) {
  return f == Family::kLognormal ? "lognormal" : "invgauss";
}

Family family_from_name(const std::string& name) {
  if (name == "lognormal") return Family::kLognormal;
  if (name == "invgauss") return Family::kInvGauss;
  throw ContractError("unknown distribution family: " + name);
}

DistParams::DistParams(Family f, double a, double b) : family(f), p1(a), p2(b) {
  if (family == Family::kLognormal) {
    if (!std::isfinite(p1)) throw DomainError("lognormal: mu must be finite");
    p2 = std::max(p2, sigma_min);
  } else {
    if (!(p1 > 0.0)) throw DomainError("inverse Gaussian: mu must be positive");
    if (!(p2 > 0.0)) throw DomainError("inverse Gaussian: lambda must be positive");
    p2 = std::min(p2, lambda_max);
  }
}

namespace {

void check_time(double t) {
  if (!(t > 0.0)) throw DomainError("runtime must be positive");
}

}  // namespace

namespace detail {

void invgauss_cdf_terms(double mu, double lambda, double t, double* phi_a_arg,
                        double* log_second_term) {
  const double sq = std::sqrt(lambda / t);
  const double a = sq * (t / mu - 1.0);
  const double b = sq * (t / mu + 1.0);
  *phi_a_arg = a;
  // exp(2 lambda/mu) * Phi(-b), kept in logs; the sum never exceeds 0 since
  // the term is itself a probability contribution.
  const double e = 2.0 * lambda / mu + log_std_normal_cdf(-b);
  *log_second_term = std::min(e, 0.0);
}

}  // namespace detail

double log_pdf(const DistParams& p, double t) {
  check_time(t);
  const double lt = std::log(t);
  if (p.family == Family::kLognormal) {
    const double z = (lt - p.p1) / p.p2;
    return -lt - std::log(p.p2) - 0.5 * ln_2pi - 0.5 * z * z;
  }
  const double d = t - p.p1;
  return 0.5 * (std::log(p.p2) - ln_2pi - 3.0 * lt) -
         p.p2 * d * d / (2.0 * p.p1 * p.p1 * t);
}

double pdf(const DistParams& p, double t) { return std::exp(log_pdf(p, t)); }

double cdf(const DistParams& p, double t) {
  check_time(t);
  if (p.family == Family::kLognormal)
    return std_normal_cdf((std::log(t) - p.p1) / p.p2);
  double a, lsec;
  detail::invgauss_cdf_terms(p.p1, p.p2, t, &a, &lsec);
  const double c = std_normal_cdf(a) + std::exp(lsec);
  return std::min(c, 1.0);
}

double survival(const DistParams& p, double t) {
  check_time(t);
  if (p.family == Family::kLognormal)
    return std_normal_cdf(-(std::log(t) - p.p1) / p.p2);
  double a, lsec;
  detail::invgauss_cdf_terms(p.p1, p.p2, t, &a, &lsec);
  const double s = std_normal_cdf(-a) - std::exp(lsec);
  return std::max(s, 0.0);
}

double log_survival(const DistParams& p, double t) {
  check_time(t);
  if (p.family == Family::kLognormal)
    return log_std_normal_cdf(-(std::log(t) - p.p1) / p.p2);
  double a, lsec;
  detail::invgauss_cdf_terms(p.p1, p.p2, t, &a, &lsec);
  const double lphi_a = log_std_normal_cdf(-a);
  // survival = Phi(-a) (1 - exp(w)), w = log of the term ratio; w < 0 holds
  // mathematically, the clamp absorbs rounding when the ratio approaches 1.
  const double w = std::min(lsec - lphi_a, -1e-15);
  return lphi_a + std::log1p(-std::exp(w));
}

double quantile(const DistParams& p, double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("quantile: p outside (0,1)");
  if (p.family == Family::kLognormal)
    return std::exp(p.p1 + p.p2 * std_normal_quantile(prob));
  // Bisection on the CDF: bracket by doubling from the mean, then halve.
  double hi = p.p1;
  int guard = 0;
  while (cdf(p, hi) < prob && guard++ < 2000) hi *= 2.0;
  double lo = hi;
  guard = 0;
  while (cdf(p, lo) > prob && guard++ < 2000) lo *= 0.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double c = cdf(p, mid);
    if (std::fabs(c - prob) < 1e-12) return mid;
    if (c < prob)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

DistParams mle(Family f, const std::vector<double>& samples) {
  if (samples.empty()) throw ContractError("mle: empty sample vector");
  for (double s : samples)
    if (!(s > 0.0)) throw DomainError("mle: samples must be positive");
  const double n = static_cast<double>(samples.size());
  if (f == Family::kLognormal) {
    double mu = 0.0;
    for (double s : samples) mu += std::log(s);
    mu /= n;
    double s2 = 0.0;
    for (double s : samples) {
      const double d = std::log(s) - mu;
      s2 += d * d;
    }
    s2 /= n;
    const double sigma = std::sqrt(std::max(s2, sigma_min * sigma_min));
    return DistParams(f, mu, sigma);
  }
  double mu = 0.0;
  for (double s : samples) mu += s;
  mu /= n;
  double rmean = 0.0;
  for (double s : samples) rmean += 1.0 / s;
  rmean /= n;
  const double denom = std::max(rmean - 1.0 / mu, 1.0 / lambda_max);
  return DistParams(f, mu, 1.0 / denom);
}

double sample(const DistParams& p, Rng& rng) {
  if (p.family == Family::kLognormal) return std::exp(p.p1 + p.p2 * rng.normal());
  // Michael-Schucany-Haas transform.
  const double mu = p.p1, lambda = p.p2;
  const double nu = rng.normal();
  const double y = nu * nu;
  double x = mu + mu * mu * y / (2.0 * lambda) -
             mu / (2.0 * lambda) * std::sqrt(4.0 * mu * lambda * y + mu * mu * y * y);
  x = std::max(x, 1e-300);
  const double u = rng.uniform();
  return u <= mu / (mu + x) ? x : mu * mu / x;
}

std::vector<double> sample(const DistParams& p, Rng& rng, int n) {
  std::vector<double> out(static_cast<size_t>(n));
  for (auto& v : out) v = sample(p, rng);
  return out;
}

DistParams params_to_raw_units(const DistParams& scaled, double runtime_scale) {
  if (!(runtime_scale > 0.0)) throw ContractError("runtime_scale must be positive");
  if (scaled.family == Family::kLognormal)
    return DistParams(scaled.family, scaled.p1 + std::log(runtime_scale), scaled.p2);
  return DistParams(scaled.family, scaled.p1 * runtime_scale, scaled.p2 * runtime_scale);
}

// --- differentiable builders ----------------------------------------------

ParamCols mle_cols(Tape& t, Family f, Var samples) {
  if (f == Family::kLognormal) {
    const Var logs = t.log(samples);
    const Var mu = t.row_mean(logs);
    const Var centered = t.sub_colvec(logs, mu);
    const Var s2 = t.row_mean(t.square(centered));
    const Var sigma = t.sqrt(t.clamp_min(s2, sigma_min * sigma_min));
    return {mu, sigma};
  }
  const Var mu = t.row_mean(samples);
  const Var rmean = t.row_mean(t.reciprocal(samples));
  const Var denom = t.sub(rmean, t.reciprocal(mu));
  const Var lambda = t.reciprocal(t.clamp_min(denom, 1.0 / lambda_max));
  return {mu, lambda};
}

namespace {

Matrix log_times_col(const Matrix& times) {
  Matrix out(times.rows(), 1);
  for (int i = 0; i < times.rows(); ++i) out[i] = std::log(times[i]);
  return out;
}

}  // namespace

Var log_pdf_cols(Tape& t, Family f, ParamCols params, Var times_col) {
  const Matrix& times = t.value(times_col);
  if (times.cols() != 1) throw ContractError("log_pdf_cols: times must be a column");
  if (f == Family::kLognormal) {
    Matrix base(times.rows(), 1);
    for (int i = 0; i < times.rows(); ++i)
      base[i] = -std::log(times[i]) - 0.5 * ln_2pi;
    const Var lt = t.constant(log_times_col(times));
    const Var dev = t.square(t.sub(lt, params.p1));
    const Var half_inv_var = t.scale(t.reciprocal(t.square(params.p2)), 0.5);
    const Var quad = t.mul(dev, half_inv_var);
    return t.add(t.constant(std::move(base)),
                 t.neg(t.add(t.log(params.p2), quad)));
  }
  Matrix base(times.rows(), 1);
  for (int i = 0; i < times.rows(); ++i)
    base[i] = -0.5 * ln_2pi - 1.5 * std::log(times[i]);
  const Var dev = t.square(t.sub(times_col, params.p1));
  const Var denom =
      t.reciprocal(t.scale(t.mul(t.square(params.p1), times_col), 2.0));
  const Var quad = t.mul(params.p2, t.mul(dev, denom));
  return t.add(t.constant(std::move(base)),
               t.add(t.scale(t.log(params.p2), 0.5), t.neg(quad)));
}

Var log_survival_cols(Tape& t, Family f, ParamCols params, Var times_col) {
  const Matrix& times = t.value(times_col);
  if (times.cols() != 1) throw ContractError("log_survival_cols: times must be a column");
  if (f == Family::kLognormal) {
    const Var lt = t.constant(log_times_col(times));
    const Var z = t.mul(t.sub(lt, params.p1), t.reciprocal(params.p2));
    return t.log_phi(t.neg(z));
  }
  const Var inv_mu = t.reciprocal(params.p1);
  const Var sq = t.sqrt(t.mul(params.p2, t.reciprocal(times_col)));
  const Var a = t.mul(sq, t.add_const(t.mul(times_col, inv_mu), -1.0));
  const Var b = t.mul(sq, t.add_const(t.mul(times_col, inv_mu), 1.0));
  const Var lphi_a = t.log_phi(t.neg(a));
  const Var lsec = t.add(t.scale(t.mul(params.p2, inv_mu), 2.0), t.log_phi(t.neg(b)));
  const Var w = t.clamp_max(t.sub(lsec, lphi_a), -1e-15);
  return t.add(lphi_a, t.log1p(t.neg(t.exp(w))));
}

}  // namespace rtdnet
