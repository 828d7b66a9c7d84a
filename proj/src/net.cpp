// SPDX-License-Identifier: Apache-2.0
#include "rtdnet/net.hpp"

#include <array>
#include <cmath>

#include "rtdnet/common.hpp"
#include "rtdnet/stats.hpp"

namespace rtdnet {

std::string model_kind_name(ModelKind k) {
  return k == ModelKind::kDistNet ? "distnet" : "bayes";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "distnet") return ModelKind::kDistNet;
  if (name == "bayes") return ModelKind::kBayes;
  throw ContractError("unknown model kind: " + name);
}

namespace {

void check_arch(const Architecture& a) {
  if (a.input_dim < 1) throw ContractError("architecture: input_dim must be >= 1");
  if (a.hidden1 != 16 || a.hidden2 != 16)
    throw ContractError("architecture: hidden layers are fixed at 16 units");
  if (a.output_dim < 1) throw ContractError("architecture: output_dim must be >= 1");
}

Matrix glorot_normal(int fan_in, int fan_out, Rng& rng) {
  Matrix w(fan_in, fan_out);
  const double sd = std::sqrt(2.0 / (fan_in + fan_out));
  for (long i = 0; i < w.size(); ++i) w[i] = sd * rng.normal();
  return w;
}

Matrix gaussian(int rows, int cols, double mean, double sd, Rng& rng) {
  Matrix m(rows, cols);
  for (long i = 0; i < m.size(); ++i) m[i] = mean + sd * rng.normal();
  return m;
}

constexpr double kOutputExpClamp = 30.0;
constexpr double kBayesOutputFloor = 1e-300;

}  // namespace

std::vector<Param*> DistNetModel::trainable() {
  return {&w1, &b1, &w2, &b2, &w3, &b3, &bn1.gamma, &bn1.beta, &bn2.gamma, &bn2.beta};
}

std::vector<Param*> DistNetModel::weight_matrices() { return {&w1, &w2, &w3}; }

std::vector<Param*> BayesModel::trainable() {
  return {&l1.w_mu, &l1.w_rho, &l1.b_mu, &l1.b_rho, &l2.w_mu, &l2.w_rho,
          &l2.b_mu, &l2.b_rho, &l3.w_mu, &l3.w_rho, &l3.b_mu, &l3.b_rho,
          &bn1.gamma, &bn1.beta, &bn2.gamma, &bn2.beta};
}

std::vector<Param*> BayesModel::mean_weight_matrices() {
  return {&l1.w_mu, &l2.w_mu, &l3.w_mu};
}

DistNetModel init_distnet(const Architecture& arch, Rng& rng) {
  check_arch(arch);
  DistNetModel m;
  m.arch = arch;
  m.w1 = Param("w1", glorot_normal(arch.input_dim, arch.hidden1, rng));
  m.b1 = Param("b1", Matrix(1, arch.hidden1));
  m.w2 = Param("w2", glorot_normal(arch.hidden1, arch.hidden2, rng));
  m.b2 = Param("b2", Matrix(1, arch.hidden2));
  m.w3 = Param("w3", glorot_normal(arch.hidden2, arch.output_dim, rng));
  m.b3 = Param("b3", Matrix(1, arch.output_dim));
  m.bn1 = BatchNormState("bn1", arch.hidden1);
  m.bn2 = BatchNormState("bn2", arch.hidden2);
  return m;
}

namespace {

BayesLayer init_bayes_layer(const std::string& prefix, int fan_in, int fan_out, Rng& rng) {
  BayesLayer l;
  l.w_mu = Param(prefix + ".w_mu", gaussian(fan_in, fan_out, 0.0, 0.1, rng));
  l.w_rho = Param(prefix + ".w_rho", gaussian(fan_in, fan_out, -3.0, 0.1, rng));
  l.b_mu = Param(prefix + ".b_mu", gaussian(1, fan_out, 0.0, 0.1, rng));
  l.b_rho = Param(prefix + ".b_rho", gaussian(1, fan_out, -3.0, 0.1, rng));
  return l;
}

}  // namespace

BayesModel init_bayes(const Architecture& arch, Rng& rng, PriorConfig prior) {
  check_arch(arch);
  if (arch.output_dim != 1)
    throw ContractError("bayes architecture: output_dim must be 1");
  if (!(prior.sigma1 > prior.sigma2) || !(prior.sigma2 > 0.0))
    throw ContractError("prior: requires sigma1 > sigma2 > 0");
  BayesModel m;
  m.arch = arch;
  m.prior = prior;
  m.l1 = init_bayes_layer("l1", arch.input_dim, arch.hidden1, rng);
  m.l2 = init_bayes_layer("l2", arch.hidden1, arch.hidden2, rng);
  m.l3 = init_bayes_layer("l3", arch.hidden2, arch.output_dim, rng);
  m.bn1 = BatchNormState("bn1", arch.hidden1);
  m.bn2 = BatchNormState("bn2", arch.hidden2);
  return m;
}

WeightNoise draw_weight_noise(const Architecture& arch, Rng& rng) {
  WeightNoise n;
  auto draw = [&rng](int r, int c) {
    Matrix m(r, c);
    rng.fill_normal(m.data(), m.size());
    return m;
  };
  n.w1 = draw(arch.input_dim, arch.hidden1);
  n.b1 = draw(1, arch.hidden1);
  n.w2 = draw(arch.hidden1, arch.hidden2);
  n.b2 = draw(1, arch.hidden2);
  n.w3 = draw(arch.hidden2, arch.output_dim);
  n.b3 = draw(1, arch.output_dim);
  return n;
}

namespace {

struct DrawAccum {
  Tape& t;
  const PriorConfig& prior;
  Var log_q{-1};
  Var log_prior{-1};

  // w = mu + softplus(rho) * eps. log q is evaluated at the drawn w so the
  // pathwise gradient picks up both the noise route and the density route.
  Var draw(Param& mu_p, Param& rho_p, const Matrix& eps) {
    const Var mu = t.leaf(mu_p);
    const Var rho = t.leaf(rho_p);
    const Var sigma = t.softplus(rho);
    const Var w = t.add(mu, t.mul(sigma, t.constant(eps)));

    const long n = eps.size();
    const Var dev = t.sub(w, mu);
    const Var quad = t.mul(t.square(dev), t.reciprocal(t.square(sigma)));
    Var lq = t.add_const(
        t.add(t.scale(t.sum(t.log(sigma)), -1.0), t.scale(t.sum(quad), -0.5)),
        -0.5 * constants::ln_2pi * static_cast<double>(n));

    // Mixture prior in a stable form: log N1 + log(alpha + (1-alpha) e^delta)
    // with delta = log N2 - log N1 bounded above by log(sigma1/sigma2).
    const double s1 = prior.sigma1, s2 = prior.sigma2, alpha = prior.alpha;
    const double c1 = -std::log(s1) - 0.5 * constants::ln_2pi;
    const double kd = 0.5 / (s1 * s1) - 0.5 / (s2 * s2);
    const Var sq = t.square(w);
    const Var log_n1 = t.add_const(t.scale(sq, -0.5 / (s1 * s1)), c1);
    Var lp;
    if (alpha >= 1.0) {
      lp = t.sum(log_n1);
    } else if (alpha <= 0.0) {
      const double c2 = -std::log(s2) - 0.5 * constants::ln_2pi;
      lp = t.sum(t.add_const(t.scale(sq, -0.5 / (s2 * s2)), c2));
    } else {
      const Var delta = t.add_const(t.scale(sq, kd), std::log(s1 / s2));
      const Var inner = t.add_const(t.scale(t.exp(delta), 1.0 - alpha), alpha);
      lp = t.sum(t.add(log_n1, t.log(inner)));
    }

    log_q = log_q.id < 0 ? lq : t.add(log_q, lq);
    log_prior = log_prior.id < 0 ? lp : t.add(log_prior, lp);
    return w;
  }
};

}  // namespace

SampledWeights sample_weights(Tape& t, BayesModel& model, const WeightNoise& noise) {
  DrawAccum acc{t, model.prior};
  SampledWeights s;
  s.w1 = acc.draw(model.l1.w_mu, model.l1.w_rho, noise.w1);
  s.b1 = acc.draw(model.l1.b_mu, model.l1.b_rho, noise.b1);
  s.w2 = acc.draw(model.l2.w_mu, model.l2.w_rho, noise.w2);
  s.b2 = acc.draw(model.l2.b_mu, model.l2.b_rho, noise.b2);
  s.w3 = acc.draw(model.l3.w_mu, model.l3.w_rho, noise.w3);
  s.b3 = acc.draw(model.l3.b_mu, model.l3.b_rho, noise.b3);
  s.log_q = acc.log_q;
  s.log_prior = acc.log_prior;
  return s;
}

Var distnet_forward(Tape& t, DistNetModel& m, const Matrix& x, bool training,
                    bool update_stats) {
  if (x.cols() != m.arch.input_dim)
    throw ContractError("distnet_forward: feature dimension mismatch");
  const Var xc = t.constant(x);
  Var h = t.add_rowvec(t.matmul(xc, t.leaf(m.w1)), t.leaf(m.b1));
  h = t.tanh(t.batch_norm(h, m.bn1, training, update_stats));
  h = t.add_rowvec(t.matmul(h, t.leaf(m.w2)), t.leaf(m.b2));
  h = t.tanh(t.batch_norm(h, m.bn2, training, update_stats));
  Var z = t.add_rowvec(t.matmul(h, t.leaf(m.w3)), t.leaf(m.b3));
  return t.exp(t.clamp_max(z, kOutputExpClamp));
}

Var bayes_forward(Tape& t, BayesModel& m, const SampledWeights& w, const Matrix& x,
                  bool training, bool update_stats) {
  if (x.cols() != m.arch.input_dim)
    throw ContractError("bayes_forward: feature dimension mismatch");
  const Var xc = t.constant(x);
  Var h = t.add_rowvec(t.matmul(xc, w.w1), w.b1);
  h = t.softplus(t.batch_norm(h, m.bn1, training, update_stats));
  h = t.add_rowvec(t.matmul(h, w.w2), w.b2);
  h = t.softplus(t.batch_norm(h, m.bn2, training, update_stats));
  Var z = t.add_rowvec(t.matmul(h, w.w3), w.b3);
  return t.clamp_min(t.softplus(z), kBayesOutputFloor);
}

Matrix distnet_eval(DistNetModel& m, const Matrix& x) {
  Tape t;
  return t.value(distnet_forward(t, m, x, /*training=*/false, /*update_stats=*/false));
}

Matrix bayes_eval(BayesModel& m, const Matrix& x, Rng& rng) {
  Tape t;
  const WeightNoise noise = draw_weight_noise(m.arch, rng);
  const SampledWeights w = sample_weights(t, m, noise);
  return t.value(bayes_forward(t, m, w, x, /*training=*/false, /*update_stats=*/false));
}

DistParams distnet_params_from_outputs(Family f, double out0, double out1) {
  if (f == Family::kLognormal) return DistParams(f, std::log(out0), out1);
  return DistParams(f, out0, out1);
}

PredictiveRtd predictive_rtd(BayesModel& model, Family family, const Matrix& x_row,
                             int n_samples, Rng& rng) {
  if (n_samples < 2) throw ContractError("predictive_rtd: need at least 2 samples");
  if (x_row.rows() != 1) throw ContractError("predictive_rtd: expects a single row");
  PredictiveRtd out;
  out.samples.reserve(static_cast<size_t>(n_samples));
  Tape t;
  for (int i = 0; i < n_samples; ++i) {
    t.reset();
    const WeightNoise noise = draw_weight_noise(model.arch, rng);
    const SampledWeights w = sample_weights(t, model, noise);
    const Var y = bayes_forward(t, model, w, x_row, /*training=*/false,
                                /*update_stats=*/false);
    out.samples.push_back(t.scalar_value(y));
  }
  out.params = mle(family, out.samples);
  out.q25 = empirical_quantile(out.samples, 0.25);
  out.q50 = empirical_quantile(out.samples, 0.50);
  out.q75 = empirical_quantile(out.samples, 0.75);
  return out;
}

}  // namespace rtdnet
