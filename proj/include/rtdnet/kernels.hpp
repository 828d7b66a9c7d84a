// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string_view>
#include <vector>

namespace rtdnet::kernels {

// Dispatch table for the arithmetic inner loops of the library: dense
// matrix products for the network layers and elementwise transcendental
// maps for the activations. Two implementations exist, a scalar reference
// and an AVX2+FMA variant; the active one is chosen at runtime from CPU
// capabilities (override with RTDNET_KERNELS=scalar|avx2 or select()).
//
// Per-element results are independent of the batch size: SIMD variants
// push loop remainders through the same vector code via a padded block, so
// an eval-mode forward of one row is bit-identical to the same row inside
// a larger batch.
struct Backend {
  const char* name;

  // C (m x n) = A (m x k) . B (k x n), row-major, C overwritten.
  void (*gemm_nn)(int m, int k, int n, const double* a, const double* b, double* c);
  // dA (m x k) += G (m x n) . B^T, B row-major (k x n).
  void (*gemm_nt_acc)(int m, int k, int n, const double* g, const double* b, double* da);
  // dB (k x n) += A^T . G, A row-major (m x k), G (m x n).
  void (*gemm_tn_acc)(int m, int k, int n, const double* a, const double* g, double* db);

  double (*dot)(int n, const double* x, const double* y);
  double (*sum)(int n, const double* x);
  void (*axpy)(int n, double alpha, const double* x, double* y);  // y += alpha*x
  void (*vmadd)(int n, const double* a, const double* b, double* y);  // y += a*b
  void (*vadd)(int n, const double* a, const double* b, double* y);
  void (*vsub)(int n, const double* a, const double* b, double* y);
  void (*vmul)(int n, const double* a, const double* b, double* y);
  void (*vscale)(int n, double alpha, const double* x, double* y);

  void (*vexp)(int n, const double* x, double* y);
  void (*vlog)(int n, const double* x, double* y);  // caller guarantees x > 0
  void (*vtanh)(int n, const double* x, double* y);
  void (*vsoftplus)(int n, const double* x, double* y);
  void (*vsigmoid)(int n, const double* x, double* y);

  // Fused backward accumulations.
  void (*tanh_bwd)(int n, const double* y, const double* g, double* dx);      // dx += g*(1-y^2)
  void (*softplus_bwd)(int n, const double* x, const double* g, double* dx);  // dx += g*sigmoid(x)
};

const Backend& scalar_backend();
bool avx2_available();
#if defined(__x86_64__) || defined(_M_X64)
const Backend& avx2_backend();
#endif

// Currently active backend. First call resolves "auto" selection (AVX2 when
// the CPU supports it) honouring the RTDNET_KERNELS environment variable.
const Backend& active();

// Force a backend by name: "scalar", "avx2" or "auto". Returns false if the
// request cannot be honoured on this machine.
bool select(std::string_view name);

// All backends usable on this machine (for equivalence tests).
std::vector<const Backend*> available();

}  // namespace rtdnet::kernels
