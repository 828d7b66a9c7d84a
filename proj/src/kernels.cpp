// SPDX-License-Identifier: Apache-2.0
#include "rtdnet/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>

namespace rtdnet::kernels {

namespace scalar {

void gemm_nn(int m, int k, int n, const double* a, const double* b, double* c) {
  std::memset(c, 0, sizeof(double) * static_cast<size_t>(m) * n);
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<size_t>(i) * n;
    const double* ai = a + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* bk = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
  }
}

void gemm_nt_acc(int m, int k, int n, const double* g, const double* b, double* da) {
  for (int i = 0; i < m; ++i) {
    const double* gi = g + static_cast<size_t>(i) * n;
    double* dai = da + static_cast<size_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double* bk = b + static_cast<size_t>(kk) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += gi[j] * bk[j];
      dai[kk] += acc;
    }
  }
}

void gemm_tn_acc(int m, int k, int n, const double* a, const double* g, double* db) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<size_t>(i) * k;
    const double* gi = g + static_cast<size_t>(i) * n;
    for (int kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      double* dbk = db + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) dbk[j] += av * gi[j];
    }
  }
}

double dot(int n, const double* x, const double* y) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum(int n, const double* x) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void axpy(int n, double alpha, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void vmadd(int n, const double* a, const double* b, double* y) {
  for (int i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

void vadd(int n, const double* a, const double* b, double* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void vsub(int n, const double* a, const double* b, double* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] - b[i];
}

void vmul(int n, const double* a, const double* b, double* y) {
  for (int i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void vscale(int n, double alpha, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = alpha * x[i];
}

void vexp(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

void vlog(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = std::log(x[i]);
}

void vtanh(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

// Branch-wise softplus: x + log1p(e^-x) for positive x, log1p(e^x)
// otherwise. Never overflows and keeps full precision in both tails.
double softplus1(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid1(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void vsoftplus(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = softplus1(x[i]);
}

void vsigmoid(int n, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] = sigmoid1(x[i]);
}

void tanh_bwd(int n, const double* y, const double* g, double* dx) {
  for (int i = 0; i < n; ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
}

void softplus_bwd(int n, const double* x, const double* g, double* dx) {
  for (int i = 0; i < n; ++i) dx[i] += g[i] * sigmoid1(x[i]);
}

}  // namespace scalar

const Backend& scalar_backend() {
  static const Backend b = {
      "scalar",
      scalar::gemm_nn,
      scalar::gemm_nt_acc,
      scalar::gemm_tn_acc,
      scalar::dot,
      scalar::sum,
      scalar::axpy,
      scalar::vmadd,
      scalar::vadd,
      scalar::vsub,
      scalar::vmul,
      scalar::vscale,
      scalar::vexp,
      scalar::vlog,
      scalar::vtanh,
      scalar::vsoftplus,
      scalar::vsigmoid,
      scalar::tanh_bwd,
      scalar::softplus_bwd,
  };
  return b;
}

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

std::atomic<const Backend*> g_active{nullptr};

const Backend* resolve_auto() {
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2_available()) return &avx2_backend();
#endif
  return &scalar_backend();
}

const Backend* resolve_from_env() {
  if (const char* env = std::getenv("RTDNET_KERNELS")) {
    const std::string_view v(env);
#if defined(__x86_64__) || defined(_M_X64)
    if (v == "avx2" && avx2_available()) return &avx2_backend();
#endif
    if (v == "scalar") return &scalar_backend();
  }
  return resolve_auto();
}

}  // namespace

const Backend& active() {
  const Backend* b = g_active.load(std::memory_order_acquire);
  if (!b) {
    b = resolve_from_env();
    g_active.store(b, std::memory_order_release);
  }
  return *b;
}

bool select(std::string_view name) {
  if (name == "auto") {
    g_active.store(resolve_auto(), std::memory_order_release);
    return true;
  }
  if (name == "scalar") {
    g_active.store(&scalar_backend(), std::memory_order_release);
    return true;
  }
#if defined(__x86_64__) || defined(_M_X64)
  if (name == "avx2" && avx2_available()) {
    g_active.store(&avx2_backend(), std::memory_order_release);
    return true;
  }
#endif
  return false;
}

std::vector<const Backend*> available() {
  std::vector<const Backend*> out{&scalar_backend()};
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2_available()) out.push_back(&avx2_backend());
#endif
  return out;
}

}  // namespace rtdnet::kernels
