// SPDX-License-Identifier: Apache-2.0
#include "rtdnet/tape.hpp"

#include <cmath>
#include <cstring>

#include "rtdnet/common.hpp"
#include "rtdnet/kernels.hpp"
#include "rtdnet/specials.hpp"

namespace rtdnet {

namespace {

constexpr double kExpArgMax = 709.782712893384;  // largest exp() argument
constexpr double kTwoOverSqrtPi = 1.1283791670955125739;

void check_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b)) throw ContractError(std::string(what) + ": shape mismatch");
}

}  // namespace

Tape::Node& Tape::fresh(Op op, int rows, int cols) {
  // Deque storage keeps parent references valid while a new node is added.
  if (static_cast<int>(nodes_.size()) == size_) nodes_.emplace_back();
  Node& n = nodes_[size_];
  n.self = size_++;
  n.op = op;
  n.parents.clear();
  n.param = nullptr;
  n.bn = nullptr;
  n.d0 = 0.0;
  n.i0 = 0;
  n.val.reshape(rows, cols);
  n.grad.reshape(rows, cols);
  return n;
}

Var Tape::wrap(const Node& n) const { return Var{n.self}; }

const Tape::Node& Tape::at(Var v) const {
  if (v.id < 0 || v.id >= size_) throw ContractError("Tape: invalid Var");
  return nodes_[v.id];
}

Tape::Node& Tape::at(Var v) {
  if (v.id < 0 || v.id >= size_) throw ContractError("Tape: invalid Var");
  return nodes_[v.id];
}

const Matrix& Tape::value(Var v) const { return at(v).val; }

double Tape::scalar_value(Var v) const {
  const Node& n = at(v);
  if (n.val.size() != 1) throw ContractError("Tape::scalar_value: node is not scalar");
  return n.val[0];
}

Var Tape::leaf(Param& p) {
  Node& n = fresh(Op::kLeaf, p.value.rows(), p.value.cols());
  n.val = p.value;
  n.param = &p;
  return wrap(n);
}

Var Tape::constant(Matrix m) {
  Node& n = fresh(Op::kConst, m.rows(), m.cols());
  n.val = std::move(m);
  return wrap(n);
}

Var Tape::matmul(Var a, Var b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  if (na.val.cols() != nb.val.rows()) throw ContractError("matmul: inner dimensions differ");
  Node& n = fresh(Op::kMatmul, na.val.rows(), nb.val.cols());
  n.parents = {a.id, b.id};
  kernels::active().gemm_nn(na.val.rows(), na.val.cols(), nb.val.cols(), na.val.data(),
                            nb.val.data(), n.val.data());
  return wrap(n);
}

Var Tape::binary(Op op, Var a, Var b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  check_shape(na.val, nb.val, "elementwise op");
  Node& n = fresh(op, na.val.rows(), na.val.cols());
  n.parents = {a.id, b.id};
  const int m = static_cast<int>(na.val.size());
  const auto& k = kernels::active();
  switch (op) {
    case Op::kAdd: k.vadd(m, na.val.data(), nb.val.data(), n.val.data()); break;
    case Op::kSub: k.vsub(m, na.val.data(), nb.val.data(), n.val.data()); break;
    case Op::kMul: k.vmul(m, na.val.data(), nb.val.data(), n.val.data()); break;
    default: throw ContractError("binary: bad op");
  }
  return wrap(n);
}

Var Tape::add(Var a, Var b) { return binary(Op::kAdd, a, b); }
Var Tape::sub(Var a, Var b) { return binary(Op::kSub, a, b); }
Var Tape::mul(Var a, Var b) { return binary(Op::kMul, a, b); }

Var Tape::add_rowvec(Var x, Var row) {
  const Node& nx = at(x);
  const Node& nr = at(row);
  if (nr.val.rows() != 1 || nr.val.cols() != nx.val.cols())
    throw ContractError("add_rowvec: row vector shape mismatch");
  Node& n = fresh(Op::kAddRow, nx.val.rows(), nx.val.cols());
  n.parents = {x.id, row.id};
  const int c = nx.val.cols();
  for (int i = 0; i < nx.val.rows(); ++i)
    kernels::active().vadd(c, nx.val.row(i), nr.val.data(), n.val.row(i));
  return wrap(n);
}

Var Tape::sub_colvec(Var x, Var colv) {
  const Node& nx = at(x);
  const Node& nc = at(colv);
  if (nc.val.cols() != 1 || nc.val.rows() != nx.val.rows())
    throw ContractError("sub_colvec: column vector shape mismatch");
  Node& n = fresh(Op::kSubCol, nx.val.rows(), nx.val.cols());
  n.parents = {x.id, colv.id};
  for (int i = 0; i < nx.val.rows(); ++i) {
    const double s = nc.val[i];
    const double* src = nx.val.row(i);
    double* dst = n.val.row(i);
    for (int j = 0; j < nx.val.cols(); ++j) dst[j] = src[j] - s;
  }
  return wrap(n);
}

Var Tape::scale(Var x, double a) {
  const Node& nx = at(x);
  Node& n = fresh(Op::kScale, nx.val.rows(), nx.val.cols());
  n.parents = {x.id};
  n.d0 = a;
  kernels::active().vscale(static_cast<int>(nx.val.size()), a, nx.val.data(), n.val.data());
  return wrap(n);
}

Var Tape::add_const(Var x, double c) {
  const Node& nx = at(x);
  Node& n = fresh(Op::kAddConst, nx.val.rows(), nx.val.cols());
  n.parents = {x.id};
  n.d0 = c;
  for (long i = 0; i < nx.val.size(); ++i) n.val[i] = nx.val[i] + c;
  return wrap(n);
}

Var Tape::unary(Op op, Var x, double d0) {
  const Node& nx = at(x);
  Node& n = fresh(op, nx.val.rows(), nx.val.cols());
  n.parents = {x.id};
  n.d0 = d0;
  const int m = static_cast<int>(nx.val.size());
  const double* in = nx.val.data();
  double* out = n.val.data();
  const auto& k = kernels::active();
  switch (op) {
    case Op::kTanh:
      k.vtanh(m, in, out);
      break;
    case Op::kExp:
      for (int i = 0; i < m; ++i)
        if (in[i] > kExpArgMax) throw DomainError("exp: argument overflows");
      k.vexp(m, in, out);
      break;
    case Op::kLog:
      for (int i = 0; i < m; ++i)
        if (!(in[i] > 0.0)) throw DomainError("log: non-positive argument");
      k.vlog(m, in, out);
      break;
    case Op::kLog1p:
      for (int i = 0; i < m; ++i) {
        if (!(in[i] > -1.0)) throw DomainError("log1p: argument <= -1");
        out[i] = std::log1p(in[i]);
      }
      break;
    case Op::kSoftplus:
      k.vsoftplus(m, in, out);
      break;
    case Op::kSquare:
      k.vmul(m, in, in, out);
      break;
    case Op::kSqrt:
      for (int i = 0; i < m; ++i) {
        if (!(in[i] > 0.0)) throw DomainError("sqrt: non-positive argument");
        out[i] = std::sqrt(in[i]);
      }
      break;
    case Op::kRecip:
      for (int i = 0; i < m; ++i) {
        if (!(in[i] > 0.0)) throw DomainError("reciprocal: non-positive argument");
        out[i] = 1.0 / in[i];
      }
      break;
    case Op::kErf:
      for (int i = 0; i < m; ++i) out[i] = erf_approx(in[i]);
      break;
    case Op::kLogPhi:
      for (int i = 0; i < m; ++i) out[i] = log_std_normal_cdf(in[i]);
      break;
    case Op::kClampMin:
      for (int i = 0; i < m; ++i) out[i] = in[i] < d0 ? d0 : in[i];
      break;
    case Op::kClampMax:
      for (int i = 0; i < m; ++i) out[i] = in[i] > d0 ? d0 : in[i];
      break;
    default:
      throw ContractError("unary: bad op");
  }
  return wrap(n);
}

Var Tape::tanh(Var x) { return unary(Op::kTanh, x); }
Var Tape::exp(Var x) { return unary(Op::kExp, x); }
Var Tape::log(Var x) { return unary(Op::kLog, x); }
Var Tape::log1p(Var x) { return unary(Op::kLog1p, x); }
Var Tape::softplus(Var x) { return unary(Op::kSoftplus, x); }
Var Tape::square(Var x) { return unary(Op::kSquare, x); }
Var Tape::sqrt(Var x) { return unary(Op::kSqrt, x); }
Var Tape::reciprocal(Var x) { return unary(Op::kRecip, x); }
Var Tape::erf(Var x) { return unary(Op::kErf, x); }
Var Tape::log_phi(Var x) { return unary(Op::kLogPhi, x); }
Var Tape::clamp_min(Var x, double lo) { return unary(Op::kClampMin, x, lo); }
Var Tape::clamp_max(Var x, double hi) { return unary(Op::kClampMax, x, hi); }

Var Tape::sum(Var x) {
  const Node& nx = at(x);
  Node& n = fresh(Op::kSum, 1, 1);
  n.parents = {x.id};
  n.val[0] = kernels::active().sum(static_cast<int>(nx.val.size()), nx.val.data());
  return wrap(n);
}

Var Tape::mean(Var x) {
  const Node& nx = at(x);
  if (nx.val.size() == 0) throw ContractError("mean: empty matrix");
  Node& n = fresh(Op::kMean, 1, 1);
  n.parents = {x.id};
  n.val[0] = kernels::active().sum(static_cast<int>(nx.val.size()), nx.val.data()) /
             static_cast<double>(nx.val.size());
  return wrap(n);
}

Var Tape::row_mean(Var x) {
  const Node& nx = at(x);
  if (nx.val.cols() == 0) throw ContractError("row_mean: empty matrix");
  Node& n = fresh(Op::kRowMean, nx.val.rows(), 1);
  n.parents = {x.id};
  const double inv = 1.0 / nx.val.cols();
  for (int i = 0; i < nx.val.rows(); ++i)
    n.val[i] = kernels::active().sum(nx.val.cols(), nx.val.row(i)) * inv;
  return wrap(n);
}

Var Tape::col_mean(Var x) {
  const Node& nx = at(x);
  if (nx.val.rows() == 0) throw ContractError("col_mean: empty matrix");
  Node& n = fresh(Op::kColMean, 1, nx.val.cols());
  n.parents = {x.id};
  n.val.fill(0.0);
  for (int i = 0; i < nx.val.rows(); ++i)
    kernels::active().axpy(nx.val.cols(), 1.0, nx.val.row(i), n.val.data());
  kernels::active().vscale(nx.val.cols(), 1.0 / nx.val.rows(), n.val.data(), n.val.data());
  return wrap(n);
}

Var Tape::col(Var x, int j) {
  const Node& nx = at(x);
  if (j < 0 || j >= nx.val.cols()) throw ContractError("col: index out of range");
  Node& n = fresh(Op::kColSlice, nx.val.rows(), 1);
  n.parents = {x.id};
  n.i0 = j;
  for (int i = 0; i < nx.val.rows(); ++i) n.val[i] = nx.val(i, j);
  return wrap(n);
}

Var Tape::hcat(std::span<const Var> cols) {
  if (cols.empty()) throw ContractError("hcat: no columns");
  const int r = at(cols[0]).val.rows();
  for (Var v : cols) {
    const Node& nv = at(v);
    if (nv.val.cols() != 1 || nv.val.rows() != r)
      throw ContractError("hcat: every input must be an r x 1 column");
  }
  Node& n = fresh(Op::kHcat, r, static_cast<int>(cols.size()));
  n.parents.reserve(cols.size());
  for (Var v : cols) n.parents.push_back(v.id);
  for (int j = 0; j < static_cast<int>(cols.size()); ++j) {
    const Matrix& cv = at(cols[j]).val;
    for (int i = 0; i < r; ++i) n.val(i, j) = cv[i];
  }
  return wrap(n);
}

Var Tape::batch_norm(Var x, BatchNormState& state, bool training, bool update_stats) {
  const int c = state.width();
  {
    const Node& nx = at(x);
    if (nx.val.cols() != c) throw ContractError("batch_norm: feature width mismatch");
    if (training && nx.val.rows() < 2)
      throw ContractError("batch_norm: training batch must have at least 2 rows");
    if (!(state.epsilon > 0.0)) throw ContractError("batch_norm: epsilon must be positive");
  }
  const Var g = leaf(state.gamma);
  const Var b = leaf(state.beta);
  const Node& nx = at(x);
  const int r = nx.val.rows();

  Node& n = fresh(training ? Op::kBnTrain : Op::kBnEval, r, c);
  n.parents = {x.id, g.id, b.id};
  n.bn = &state;
  n.saved0.reshape(r, c);   // xhat
  n.saved1.reshape(1, c);   // 1/sqrt(var + eps)

  const double* gamma = at(g).val.data();
  const double* beta = at(b).val.data();

  if (training) {
    scratch_.reshape(2, c);
    double* mean = scratch_.row(0);
    double* var = scratch_.row(1);
    std::memset(mean, 0, sizeof(double) * c);
    std::memset(var, 0, sizeof(double) * c);
    for (int i = 0; i < r; ++i) kernels::active().axpy(c, 1.0, nx.val.row(i), mean);
    for (int j = 0; j < c; ++j) mean[j] /= r;
    for (int i = 0; i < r; ++i) {
      const double* xi = nx.val.row(i);
      for (int j = 0; j < c; ++j) {
        const double d = xi[j] - mean[j];
        var[j] += d * d;
      }
    }
    for (int j = 0; j < c; ++j) var[j] /= r;
    for (int j = 0; j < c; ++j) n.saved1[j] = 1.0 / std::sqrt(var[j] + state.epsilon);
    for (int i = 0; i < r; ++i) {
      const double* xi = nx.val.row(i);
      double* xh = n.saved0.row(i);
      double* y = n.val.row(i);
      for (int j = 0; j < c; ++j) {
        xh[j] = (xi[j] - mean[j]) * n.saved1[j];
        y[j] = gamma[j] * xh[j] + beta[j];
      }
    }
    if (update_stats) {
      const double m = state.momentum;
      for (int j = 0; j < c; ++j) {
        state.running_mean[j] = (1.0 - m) * state.running_mean[j] + m * mean[j];
        state.running_var[j] = (1.0 - m) * state.running_var[j] + m * var[j];
      }
    }
  } else {
    for (int j = 0; j < c; ++j)
      n.saved1[j] = 1.0 / std::sqrt(state.running_var[j] + state.epsilon);
    for (int i = 0; i < r; ++i) {
      const double* xi = nx.val.row(i);
      double* xh = n.saved0.row(i);
      double* y = n.val.row(i);
      for (int j = 0; j < c; ++j) {
        xh[j] = (xi[j] - state.running_mean[j]) * n.saved1[j];
        y[j] = gamma[j] * xh[j] + beta[j];
      }
    }
  }
  return wrap(n);
}

void Tape::backward(Var root) {
  Node& rn = at(root);
  if (rn.val.size() != 1) throw ContractError("backward: root must be scalar");

  for (int i = 0; i <= root.id; ++i) nodes_[i].grad.fill(0.0);
  rn.grad[0] = 1.0;

  std::vector<char> reach(static_cast<size_t>(root.id) + 1, 0);
  reach[root.id] = 1;
  for (int i = root.id; i >= 0; --i) {
    if (!reach[i]) continue;
    for (int p : nodes_[i].parents) reach[p] = 1;
    backward_node(nodes_[i]);
  }
}

void Tape::backward_node(Node& n) {
  const auto& k = kernels::active();
  const Matrix& G = n.grad;
  const int m = static_cast<int>(G.size());
  auto pval = [&](int slot) -> const Matrix& { return nodes_[n.parents[slot]].val; };
  auto pgrad = [&](int slot) -> Matrix& { return nodes_[n.parents[slot]].grad; };

  switch (n.op) {
    case Op::kLeaf:
      if (n.param) {
        check_shape(n.param->grad, n.grad, "leaf gradient");
        k.axpy(m, 1.0, G.data(), n.param->grad.data());
      }
      break;
    case Op::kConst:
      break;
    case Op::kMatmul: {
      const Matrix& A = pval(0);
      const Matrix& B = pval(1);
      k.gemm_nt_acc(A.rows(), A.cols(), B.cols(), G.data(), B.data(), pgrad(0).data());
      k.gemm_tn_acc(A.rows(), A.cols(), B.cols(), A.data(), G.data(), pgrad(1).data());
      break;
    }
    case Op::kAdd:
      k.axpy(m, 1.0, G.data(), pgrad(0).data());
      k.axpy(m, 1.0, G.data(), pgrad(1).data());
      break;
    case Op::kSub:
      k.axpy(m, 1.0, G.data(), pgrad(0).data());
      k.axpy(m, -1.0, G.data(), pgrad(1).data());
      break;
    case Op::kMul:
      k.vmadd(m, G.data(), pval(1).data(), pgrad(0).data());
      k.vmadd(m, G.data(), pval(0).data(), pgrad(1).data());
      break;
    case Op::kAddRow: {
      k.axpy(m, 1.0, G.data(), pgrad(0).data());
      Matrix& gr = pgrad(1);
      for (int i = 0; i < G.rows(); ++i) k.axpy(G.cols(), 1.0, G.row(i), gr.data());
      break;
    }
    case Op::kSubCol: {
      k.axpy(m, 1.0, G.data(), pgrad(0).data());
      Matrix& gc = pgrad(1);
      for (int i = 0; i < G.rows(); ++i) gc[i] -= k.sum(G.cols(), G.row(i));
      break;
    }
    case Op::kScale:
      k.axpy(m, n.d0, G.data(), pgrad(0).data());
      break;
    case Op::kAddConst:
      k.axpy(m, 1.0, G.data(), pgrad(0).data());
      break;
    case Op::kTanh:
      k.tanh_bwd(m, n.val.data(), G.data(), pgrad(0).data());
      break;
    case Op::kExp:
      k.vmadd(m, G.data(), n.val.data(), pgrad(0).data());
      break;
    case Op::kLog: {
      const Matrix& x = pval(0);
      Matrix& gx = pgrad(0);
      for (int i = 0; i < m; ++i) gx[i] += G[i] / x[i];
      break;
    }
    case Op::kLog1p: {
      const Matrix& x = pval(0);
      Matrix& gx = pgrad(0);
      for (int i = 0; i < m; ++i) gx[i] += G[i] / (1.0 + x[i]);
      break;
    }
    case Op::kSoftplus:
      k.softplus_bwd(m, pval(0).data(), G.data(), pgrad(0).data());
      break;
    case Op::kSquare: {
      const Matrix& x = pval(0);
      Matrix& gx = pgrad(0);
      for (int i = 0; i < m; ++i) gx[i] += 2.0 * G[i] * x[i];
      break;
    }
    case Op::kSqrt: {
      Matrix& gx = pgrad(0);
      for (int i = 0; i < m; ++i) gx[i] += 0.5 * G[i] / n.val[i];
      break;
    }
    case Op::kRecip: {
      Matrix& gx = pgrad(0);
      for (int i = 0; i < m; ++i) gx[i] -= G[i] * n.val[i] * n.val[i];
      break;
    }
    case Op::kErf: {
      const Matrix& x = pval(0);
      Matrix& gx = pgrad(0);
      for (int i = 0; i < m; ++i)
        gx[i] += G[i] * kTwoOverSqrtPi * std::exp(-x[i] * x[i]);
      break;
    }
    case Op::kLogPhi: {
      const Matrix& x = pval(0);
      Matrix& gx = pgrad(0);
      for (int i = 0; i < m; ++i) gx[i] += G[i] * std_normal_hazard(x[i]);
      break;
    }
    case Op::kClampMin: {
      const Matrix& x = pval(0);
      Matrix& gx = pgrad(0);
      for (int i = 0; i < m; ++i)
        if (x[i] > n.d0) gx[i] += G[i];
      break;
    }
    case Op::kClampMax: {
      const Matrix& x = pval(0);
      Matrix& gx = pgrad(0);
      for (int i = 0; i < m; ++i)
        if (x[i] < n.d0) gx[i] += G[i];
      break;
    }
    case Op::kSum: {
      Matrix& gx = pgrad(0);
      const double g = G[0];
      for (long i = 0; i < gx.size(); ++i) gx[i] += g;
      break;
    }
    case Op::kMean: {
      Matrix& gx = pgrad(0);
      const double g = G[0] / static_cast<double>(gx.size());
      for (long i = 0; i < gx.size(); ++i) gx[i] += g;
      break;
    }
    case Op::kRowMean: {
      Matrix& gx = pgrad(0);
      const double inv = 1.0 / gx.cols();
      for (int i = 0; i < gx.rows(); ++i) {
        const double g = G[i] * inv;
        double* row = gx.row(i);
        for (int j = 0; j < gx.cols(); ++j) row[j] += g;
      }
      break;
    }
    case Op::kColMean: {
      Matrix& gx = pgrad(0);
      const double inv = 1.0 / gx.rows();
      for (int i = 0; i < gx.rows(); ++i) {
        double* row = gx.row(i);
        for (int j = 0; j < gx.cols(); ++j) row[j] += G[j] * inv;
      }
      break;
    }
    case Op::kColSlice: {
      Matrix& gx = pgrad(0);
      for (int i = 0; i < G.rows(); ++i) gx(i, n.i0) += G[i];
      break;
    }
    case Op::kHcat: {
      for (int j = 0; j < static_cast<int>(n.parents.size()); ++j) {
        Matrix& gp = nodes_[n.parents[j]].grad;
        for (int i = 0; i < G.rows(); ++i) gp[i] += G(i, j);
      }
      break;
    }
    case Op::kBnTrain: {
      const int r = G.rows(), c = G.cols();
      const double* gamma = pval(1).data();
      const double* is = n.saved1.data();
      scratch_.reshape(2, c);
      double* sg = scratch_.row(0);
      double* sgx = scratch_.row(1);
      std::memset(sg, 0, sizeof(double) * c);
      std::memset(sgx, 0, sizeof(double) * c);
      for (int i = 0; i < r; ++i) {
        const double* gi = G.row(i);
        const double* xh = n.saved0.row(i);
        for (int j = 0; j < c; ++j) {
          sg[j] += gi[j];
          sgx[j] += gi[j] * xh[j];
        }
      }
      Matrix& ggamma = pgrad(1);
      Matrix& gbeta = pgrad(2);
      for (int j = 0; j < c; ++j) {
        ggamma[j] += sgx[j];
        gbeta[j] += sg[j];
      }
      Matrix& gx = pgrad(0);
      const double invr = 1.0 / r;
      for (int i = 0; i < r; ++i) {
        const double* gi = G.row(i);
        const double* xh = n.saved0.row(i);
        double* gxi = gx.row(i);
        for (int j = 0; j < c; ++j)
          gxi[j] += gamma[j] * is[j] * (gi[j] - sg[j] * invr - xh[j] * sgx[j] * invr);
      }
      break;
    }
    case Op::kBnEval: {
      const int r = G.rows(), c = G.cols();
      const double* gamma = pval(1).data();
      const double* is = n.saved1.data();
      Matrix& gx = pgrad(0);
      Matrix& ggamma = pgrad(1);
      Matrix& gbeta = pgrad(2);
      for (int i = 0; i < r; ++i) {
        const double* gi = G.row(i);
        const double* xh = n.saved0.row(i);
        double* gxi = gx.row(i);
        for (int j = 0; j < c; ++j) {
          gxi[j] += gi[j] * gamma[j] * is[j];
          ggamma[j] += gi[j] * xh[j];
          gbeta[j] += gi[j];
        }
      }
      break;
    }
  }
}

void Tape::reset() { size_ = 0; }

}  // namespace rtdnet
