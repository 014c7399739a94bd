#include "kintools/svm.hpp"

#include <algorithm>
#include <cmath>

namespace kintools {

std::pair<double, double> class_weights(std::size_t n_pos, std::size_t n_neg, double lambda) {
  if (n_pos == 0 || n_neg == 0) throw Error(Errc::EmptyClass, "both classes need at least one sample");
  if (!(lambda > 0.0)) throw Error(Errc::InvalidHyperparameters, "lambda must be positive");
  double total = static_cast<double>(n_pos + n_neg);
  return {lambda * total / (2.0 * static_cast<double>(n_pos)),
          lambda * total / (2.0 * static_cast<double>(n_neg))};
}

namespace {

// w' [x; 1] for a raw (unaugmented) row.
double margin(std::span<const double> w, const std::vector<double>& x) {
  double s = w[x.size()];
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i];
  return s;
}

void check_rows(const std::vector<std::vector<double>>& rows, std::size_t d) {
  for (const auto& x : rows) {
    if (x.size() != d) throw Error(Errc::DimensionMismatch, "sample dimensions differ");
    for (double v : x)
      if (!std::isfinite(v)) throw Error(Errc::NonFinite, "non-finite training sample");
  }
}

}  // namespace

double cwsvm_objective(std::span<const double> w, const std::vector<std::vector<double>>& pos,
                       const std::vector<std::vector<double>>& neg, double lambda_pos,
                       double lambda_neg) {
  double obj = 0.0;
  for (double v : w) obj += v * v;
  obj *= 0.5;
  for (const auto& x : pos) {
    double slack = std::max(0.0, 1.0 - margin(w, x));
    obj += lambda_pos * slack * slack;
  }
  for (const auto& x : neg) {
    double slack = std::max(0.0, 1.0 + margin(w, x));
    obj += lambda_neg * slack * slack;
  }
  return obj;
}

std::vector<double> cwsvm_gradient(std::span<const double> w,
                                   const std::vector<std::vector<double>>& pos,
                                   const std::vector<std::vector<double>>& neg, double lambda_pos,
                                   double lambda_neg) {
  std::vector<double> g(w.begin(), w.end());
  auto accumulate = [&g](const std::vector<double>& x, double coeff) {
    for (std::size_t i = 0; i < x.size(); ++i) g[i] += coeff * x[i];
    g[x.size()] += coeff;
  };
  for (const auto& x : pos) {
    double slack = 1.0 - margin(w, x);
    if (slack > 0.0) accumulate(x, -2.0 * lambda_pos * slack);
  }
  for (const auto& x : neg) {
    double slack = 1.0 + margin(w, x);
    if (slack > 0.0) accumulate(x, 2.0 * lambda_neg * slack);
  }
  return g;
}

namespace {

// Generalized Hessian of the objective at w: I + 2 sum_active lambda_i x~ x~'.
// The regularizer keeps it positive definite, so Cholesky always succeeds.
std::vector<double> cwsvm_hessian(std::span<const double> w,
                                  const std::vector<std::vector<double>>& pos,
                                  const std::vector<std::vector<double>>& neg, double lambda_pos,
                                  double lambda_neg) {
  std::size_t n = w.size();
  std::vector<double> h(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;
  auto add_outer = [&h, n](const std::vector<double>& x, double coeff) {
    for (std::size_t i = 0; i <= x.size(); ++i) {
      double xi = i < x.size() ? x[i] : 1.0;
      for (std::size_t j = 0; j <= x.size(); ++j) {
        double xj = j < x.size() ? x[j] : 1.0;
        h[i * n + j] += coeff * xi * xj;
      }
    }
  };
  for (const auto& x : pos)
    if (1.0 - margin(w, x) > 0.0) add_outer(x, 2.0 * lambda_pos);
  for (const auto& x : neg)
    if (1.0 + margin(w, x) > 0.0) add_outer(x, 2.0 * lambda_neg);
  return h;
}

// Solves H d = g in place via Cholesky; H is symmetric positive definite.
std::vector<double> solve_spd(std::vector<double> h, std::vector<double> g) {
  std::size_t n = g.size();
  for (std::size_t j = 0; j < n; ++j) {
    double diag = h[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= h[j * n + k] * h[j * n + k];
    diag = std::sqrt(std::max(diag, 1e-300));
    h[j * n + j] = diag;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = h[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= h[i * n + k] * h[j * n + k];
      h[i * n + j] = v / diag;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {  // L y = g
    double v = g[i];
    for (std::size_t k = 0; k < i; ++k) v -= h[i * n + k] * g[k];
    g[i] = v / h[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {  // L' d = y
    double v = g[i];
    for (std::size_t k = i + 1; k < n; ++k) v -= h[k * n + i] * g[k];
    g[i] = v / h[i * n + i];
  }
  return g;
}

}  // namespace

LinearModel train_cwsvm(const std::vector<std::vector<double>>& pos,
                        const std::vector<std::vector<double>>& neg, double lambda,
                        const SvmOptions& opts) {
  if (pos.empty() || neg.empty()) throw Error(Errc::EmptyClass, "both classes need samples");
  std::size_t d = pos.front().size();
  check_rows(pos, d);
  check_rows(neg, d);
  auto [lp, ln] = class_weights(pos.size(), neg.size(), lambda);

  LinearModel model;
  model.lambda_pos = lp;
  model.lambda_neg = ln;
  model.w.assign(d + 1, 0.0);

  // Damped (semismooth) Newton on the piecewise-quadratic objective: the
  // active set usually settles within a few iterations and each step then
  // solves the local quadratic exactly.
  double obj = cwsvm_objective(model.w, pos, neg, lp, ln);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    std::vector<double> g = cwsvm_gradient(model.w, pos, neg, lp, ln);
    double gnorm2 = 0.0;
    for (double v : g) gnorm2 += v * v;
    if (std::sqrt(gnorm2) <= 1e-10 * (1.0 + std::abs(obj))) {
      model.converged = true;
      model.iterations = iter;
      break;
    }

    std::vector<double> dir =
        solve_spd(cwsvm_hessian(model.w, pos, neg, lp, ln), g);
    double descent = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) descent += g[i] * dir[i];
    if (descent <= 0.0) dir = g, descent = gnorm2;  // safeguard

    double step = 1.0;
    std::vector<double> trial(model.w.size());
    double next_obj = obj;
    while (true) {
      for (std::size_t i = 0; i < model.w.size(); ++i) trial[i] = model.w[i] - step * dir[i];
      next_obj = cwsvm_objective(trial, pos, neg, lp, ln);
      if (next_obj <= obj - 1e-4 * step * descent) break;
      step *= 0.5;
      if (step < 1e-18) {
        next_obj = obj;
        break;
      }
    }
    if (next_obj >= obj) {
      model.converged = true;
      model.iterations = iter;
      break;
    }
    model.w = trial;
    double change = (obj - next_obj) / std::max(1.0, std::abs(obj));
    obj = next_obj;
    model.iterations = iter + 1;
    if (change <= opts.tol && step == 1.0) {
      model.converged = true;
      break;
    }
  }
  model.objective = obj;
  return model;
}

double decision(const LinearModel& model, std::span<const double> x) {
  if (x.size() + 1 != model.w.size())
    throw Error(Errc::DimensionMismatch, "input dimension does not match the model");
  double s = model.w[x.size()];
  for (std::size_t i = 0; i < x.size(); ++i) s += model.w[i] * x[i];
  return s;
}

}  // namespace kintools
