// SPDX-License-Identifier: Apache-2.0
#include "rtdnet/specials.hpp"

#include <cmath>
#include <limits>

#include "rtdnet/common.hpp"

namespace rtdnet {

namespace {

// Rational coefficient sets for erf/erfc (Cody-style three-range scheme).
constexpr double kErfA[5] = {3.16112374387056560e00, 1.13864154151050156e02,
                             3.77485237685302021e02, 3.20937758913846947e03,
                             1.85777706184603153e-1};
constexpr double kErfB[4] = {2.36012909523441209e01, 2.44024637934444173e02,
                             1.28261652607737228e03, 2.84423683343917062e03};
constexpr double kErfC[9] = {5.64188496988670089e-1, 8.88314979438837594e00,
                             6.61191906371416295e01, 2.98635138197400131e02,
                             8.81952221241769090e02, 1.71204761263407058e03,
                             2.05107837782607147e03, 1.23033935479799725e03,
                             2.15311535474403846e-8};
constexpr double kErfD[8] = {1.57449261107098347e01, 1.17693950891312499e02,
                             5.37181101862009858e02, 1.62138957456669019e03,
                             3.29079923573345963e03, 4.36261909014324716e03,
                             3.43936767414372164e03, 1.23033935480374942e03};
constexpr double kErfP[6] = {3.05326634961232344e-1, 3.60344899949804439e-1,
                             1.25781726111229246e-1, 1.60837851487422766e-2,
                             6.58749161529837803e-4, 1.63153871373020978e-2};
constexpr double kErfQ[5] = {2.56852019228982242e00, 1.87295284992346047e00,
                             5.27905102951428412e-1, 6.05183413124413191e-2,
                             2.33520497626869185e-3};

constexpr double kInvSqrtPi = 5.6418958354775628695e-1;  // 1/sqrt(pi)
constexpr double kErfThresh = 0.46875;
constexpr double kErfcXBig = 26.543;  // erfc underflows beyond this

// erfc(y) for y in (0.46875, inf), split exp factor computed the Cody way to
// limit cancellation in exp(-y*y).
double erfc_tail(double y) {
  double num, den;
  if (y <= 4.0) {
    num = kErfC[8] * y;
    den = y;
    for (int i = 0; i < 7; ++i) {
      num = (num + kErfC[i]) * y;
      den = (den + kErfD[i]) * y;
    }
    num = (num + kErfC[7]) / (den + kErfD[7]);
  } else {
    if (y >= kErfcXBig) return 0.0;
    const double z = 1.0 / (y * y);
    num = kErfP[5] * z;
    den = z;
    for (int i = 0; i < 4; ++i) {
      num = (num + kErfP[i]) * z;
      den = (den + kErfQ[i]) * z;
    }
    num = z * (num + kErfP[4]) / (den + kErfQ[4]);
    num = (kInvSqrtPi - num) / y;
  }
  const double ysq = std::trunc(y * 16.0) / 16.0;
  const double del = (y - ysq) * (y + ysq);
  return std::exp(-ysq * ysq) * std::exp(-del) * num;
}

}  // namespace

double erf_approx(double x) {
  const double ax = std::fabs(x);
  if (ax <= kErfThresh) {
    const double z = x * x;
    double num = kErfA[4] * z;
    double den = z;
    for (int i = 0; i < 3; ++i) {
      num = (num + kErfA[i]) * z;
      den = (den + kErfB[i]) * z;
    }
    return x * (num + kErfA[3]) / (den + kErfB[3]);
  }
  const double e = erfc_tail(ax);
  return x > 0.0 ? 1.0 - e : e - 1.0;
}

double erfc_approx(double x) {
  const double ax = std::fabs(x);
  if (ax <= kErfThresh) return 1.0 - erf_approx(x);
  const double e = erfc_tail(ax);
  return x > 0.0 ? e : 2.0 - e;
}

double std_normal_cdf(double x) {
  const double p = 0.5 * erfc_approx(-x / constants::sqrt2);
  return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
}

double std_normal_pdf(double x) {
  return constants::inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

namespace {

// 1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8: the asymptotic correction in
// Phi(x) ~ phi(x)/(-x) * series, for x << 0.
double mills_series(double x) {
  const double z = 1.0 / (x * x);
  return 1.0 + z * (-1.0 + z * (3.0 + z * (-15.0 + z * 105.0)));
}

constexpr double kLogPhiTail = -28.0;

}  // namespace

double log_std_normal_cdf(double x) {
  if (std::isinf(x)) return x > 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (x > kLogPhiTail) {
    const double c = 0.5 * erfc_approx(-x / constants::sqrt2);
    if (c >= 1.0) return 0.0;
    return std::log(c);
  }
  return -0.5 * x * x - 0.5 * constants::ln_2pi - std::log(-x) +
         std::log(mills_series(x));
}

double std_normal_hazard(double x) {
  if (std::isinf(x)) return x > 0.0 ? 0.0 : -x;
  if (x > kLogPhiTail) {
    const double c = 0.5 * erfc_approx(-x / constants::sqrt2);
    return std_normal_pdf(x) / c;
  }
  return -x / mills_series(x);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("std_normal_quantile: p outside (0,1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std_normal_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  double x = 0.5 * (lo + hi);
  // Newton polish; the bisection bracket already has ~12 correct digits.
  for (int i = 0; i < 3; ++i) {
    const double f = std_normal_cdf(x) - p;
    const double d = std_normal_pdf(x);
    if (d <= 0.0) break;
    x -= f / d;
  }
  return x;
}

}  // namespace rtdnet
