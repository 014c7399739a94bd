#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "kintools/error.hpp"

namespace kintools {

/// Input feature with its identity class and subgroup (attribute) class.
struct LabeledFeature {
  std::vector<double> x;
  int y_id = 0;
  int y_att = 0;
};

/// Adversarially trained adapter. The mapping M is one affine layer from d to
/// d/2 followed by tanh; each head is affine plus softmax. Training flips the
/// sign of the attribute gradient into M, scaled by lambda.
struct DebiasModel {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;  // in_dim / 2
  std::size_t num_ids = 0;
  std::size_t num_atts = 0;
  double lambda = 1.0;

  std::vector<double> w_map, b_map;  // out_dim x in_dim, out_dim
  std::vector<double> w_id, b_id;    // num_ids x out_dim, num_ids
  std::vector<double> w_att, b_att;  // num_atts x out_dim, num_atts
};

struct DebiasForward {
  std::vector<double> f_deb;
  std::vector<double> id_probs;
  std::vector<double> att_probs;
};

DebiasForward debias_forward(const DebiasModel& model, const std::vector<double>& x);

struct DebiasLosses {
  double id_loss = 0.0;        // mean NLL of the identity head
  double att_loss = 0.0;       // mean NLL of the attribute head
  double total = 0.0;          // id_loss + att_loss (head update objective)
  double mapping_objective = 0.0;  // id_loss - lambda * att_loss
};

DebiasLosses debias_losses(const DebiasModel& model, const std::vector<LabeledFeature>& batch);

/// Mean-over-batch gradients. Heads receive their own loss gradients; the
/// mapping receives d(id_loss)/dTheta_M - lambda * d(att_loss)/dTheta_M.
struct DebiasGradients {
  std::vector<double> w_map, b_map;
  std::vector<double> w_id, b_id;
  std::vector<double> w_att, b_att;
};

DebiasGradients debias_backward(const DebiasModel& model, const std::vector<LabeledFeature>& batch);

struct DebiasTrainOptions {
  double lambda = 1.0;
  int epochs = 20;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
};

struct DebiasTrainResult {
  DebiasModel model;
  std::vector<double> id_loss_per_epoch;
  std::vector<double> att_loss_per_epoch;
};

/// Minibatch gradient descent with a fixed learning rate and seed-controlled
/// shuffling; epochs = 0 returns the seeded initial model untouched.
DebiasTrainResult train_debias(const std::vector<LabeledFeature>& data,
                               const DebiasTrainOptions& opts);

std::vector<double> debias_apply(const DebiasModel& model, const std::vector<double>& x);

/// Checkpoint round trip: flat JSON of parameter arrays with shape metadata.
void save_checkpoint(const DebiasModel& model, std::ostream& out);
DebiasModel load_checkpoint(std::istream& in);

struct ProbeOptions {
  std::vector<std::size_t> layers = {512, 512, 256};
  int epochs = 12;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t batch_size = 32;
  double dropout = 0.0;  // train-time only; evaluation always runs dropout-off
};

struct ProbeResult {
  double accuracy = 0.0;                             // mean over folds
  std::vector<double> fold_accuracy;
  std::vector<std::vector<std::size_t>> confusion;   // pooled over folds
};

/// Cross-validated MLP classifier on top of feature vectors; quantifies how
/// much label information the features still carry.
ProbeResult leakage_probe(const std::vector<std::vector<double>>& features,
                          const std::vector<int>& labels, int folds,
                          const ProbeOptions& opts = {});

}  // namespace kintools
