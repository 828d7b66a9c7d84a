// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "rtdnet/dist.hpp"
#include "rtdnet/matrix.hpp"
#include "rtdnet/rng.hpp"
#include "rtdnet/tape.hpp"

namespace rtdnet {

enum class ModelKind { kDistNet, kBayes };

std::string model_kind_name(ModelKind k);
ModelKind model_kind_from_name(const std::string& name);

// Two hidden layers of 16 units each; output width is the parameter count
// of the distribution family for the deterministic net and 1 for the
// Bayesian net.
struct Architecture {
  int input_dim = 0;
  int hidden1 = 16;
  int hidden2 = 16;
  int output_dim = 1;
};

// Scale mixture of two zero-mean Gaussians used as the weight prior.
struct PriorConfig {
  double alpha = 0.5;
  double sigma1 = 0.3;
  double sigma2 = 0.01;
};

// Deterministic network: features -> positive distribution parameters.
// Hidden activations are tanh (batch norm between the linear map and the
// activation); the output layer is exponential with its argument clamped
// at 30 so an unlucky initialization cannot overflow the likelihood.
struct DistNetModel {
  Architecture arch;
  Param w1, b1, w2, b2, w3, b3;
  BatchNormState bn1, bn2;

  std::vector<Param*> trainable();
  std::vector<Param*> weight_matrices();  // L2 applies to these only
};

// Variational parameters of one Bayesian layer: per-weight (mu, rho) with
// sigma = softplus(rho).
struct BayesLayer {
  Param w_mu, w_rho, b_mu, b_rho;
};

// Bayesian network: features -> one sampled runtime per stochastic pass.
// All activations are softplus; the output is strictly positive.
struct BayesModel {
  Architecture arch;  // output_dim == 1
  BayesLayer l1, l2, l3;
  BatchNormState bn1, bn2;
  PriorConfig prior;

  std::vector<Param*> trainable();
  std::vector<Param*> mean_weight_matrices();  // L2 applies to these only
};

DistNetModel init_distnet(const Architecture& arch, Rng& rng);
BayesModel init_bayes(const Architecture& arch, Rng& rng, PriorConfig prior = {});

// Parameter-free noise for one Monte Carlo weight draw.
struct WeightNoise {
  Matrix w1, b1, w2, b2, w3, b3;
};

WeightNoise draw_weight_noise(const Architecture& arch, Rng& rng);

// One weight draw w = mu + softplus(rho) * eps plus its variational
// log-density log q(w|theta) and prior log-density log P(w), all on the
// tape so gradients flow through the reparameterization.
struct SampledWeights {
  Var w1, b1, w2, b2, w3, b3;
  Var log_q;
  Var log_prior;
};

SampledWeights sample_weights(Tape& t, BayesModel& model, const WeightNoise& noise);

// Forward passes; X is a standardized feature batch (rows x input_dim).
Var distnet_forward(Tape& t, DistNetModel& model, const Matrix& x, bool training,
                    bool update_stats = true);
Var bayes_forward(Tape& t, BayesModel& model, const SampledWeights& w, const Matrix& x,
                  bool training, bool update_stats = true);

// Eval-mode forward returning the positive outputs (batch x output_dim).
Matrix distnet_eval(DistNetModel& model, const Matrix& x);
// One stochastic eval-mode pass (batch x 1).
Matrix bayes_eval(BayesModel& model, const Matrix& x, Rng& rng);

// Positive network head -> distribution parameters. For the lognormal the
// first output is the median scale exp(mu).
DistParams distnet_params_from_outputs(Family f, double out0, double out1);

// Monte Carlo predictive distribution for one instance.
struct PredictiveRtd {
  std::vector<double> samples;
  DistParams params;  // MLE fit of the samples
  double q25 = 0.0, q50 = 0.0, q75 = 0.0;  // empirical quartiles
};

PredictiveRtd predictive_rtd(BayesModel& model, Family family, const Matrix& x_row,
                             int n_samples, Rng& rng);

}  // namespace rtdnet
