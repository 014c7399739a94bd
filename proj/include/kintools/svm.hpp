#pragma once

#include <span>
#include <utility>
#include <vector>

#include "kintools/error.hpp"

namespace kintools {

/// L2-regularized, class-weighted, squared-hinge linear classifier. The bias
/// is folded into w as a last coordinate multiplying a constant-1 feature.
struct LinearModel {
  std::vector<double> w;  // length d + 1
  double lambda_pos = 0.0;
  double lambda_neg = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct SvmOptions {
  double tol = 1e-8;  // relative objective change
  int max_iter = 5000;
};

/// Class weights inversely proportional to class frequency:
/// lambda_pos = lambda (N+ + N-) / (2 N+), lambda_neg = lambda (N+ + N-) / (2 N-).
std::pair<double, double> class_weights(std::size_t n_pos, std::size_t n_neg, double lambda);

/// Objective 0.5 w'w + lambda_pos * sum_pos max(0, 1 - w'x)^2
///                  + lambda_neg * sum_neg max(0, 1 + w'x)^2
/// over bias-augmented rows. Exposed for oracle checks.
double cwsvm_objective(std::span<const double> w, const std::vector<std::vector<double>>& pos,
                       const std::vector<std::vector<double>>& neg, double lambda_pos,
                       double lambda_neg);

/// Analytic gradient of cwsvm_objective at w.
std::vector<double> cwsvm_gradient(std::span<const double> w,
                                   const std::vector<std::vector<double>>& pos,
                                   const std::vector<std::vector<double>>& neg, double lambda_pos,
                                   double lambda_neg);

/// Deterministic full-batch descent (zero init, backtracking line search) on
/// the smooth convex objective. lambda defaults to 10.
LinearModel train_cwsvm(const std::vector<std::vector<double>>& pos,
                        const std::vector<std::vector<double>>& neg, double lambda = 10.0,
                        const SvmOptions& opts = {});

/// w' [x; 1]
double decision(const LinearModel& model, std::span<const double> x);

}  // namespace kintools
