// Brute-force reference implementations used only by tests. These stay
// independent of the library code paths they check: everything here works on
// explicit matrices and per-element loops.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kintools/rng.hpp"

namespace oracles {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(a, b) / (norm(a) * norm(b));
}

inline std::vector<double> unit(std::vector<double> v) {
  double n = norm(v);
  for (double& x : v) x /= n;
  return v;
}

inline std::vector<double> random_unit(kintools::Rng& rng, std::size_t d) {
  std::vector<double> v(d);
  for (double& x : v) x = rng.normal();
  return unit(v);
}

// Category utility from the explicit one-hot matrices: counts via the matrix
// product H^T S, then the utility formula over the normalized entries.
inline double category_utility(const std::vector<int>& h, int kh, const std::vector<int>& s,
                               int ks) {
  std::size_t n = h.size();
  std::vector<std::vector<double>> hm(n, std::vector<double>(kh, 0.0));
  std::vector<std::vector<double>> sm(n, std::vector<double>(ks, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    hm[i][h[i]] = 1.0;
    sm[i][s[i]] = 1.0;
  }
  std::vector<std::vector<double>> counts(kh, std::vector<double>(ks, 0.0));
  for (int k = 0; k < kh; ++k)
    for (int j = 0; j < ks; ++j)
      for (std::size_t i = 0; i < n; ++i) counts[k][j] += hm[i][k] * sm[i][j];

  double u = 0.0;
  for (int k = 0; k < kh; ++k) {
    double row = 0.0;
    for (int j = 0; j < ks; ++j) row += counts[k][j];
    if (row == 0.0) continue;
    double pk = row / static_cast<double>(n);
    double inner = 0.0;
    for (int j = 0; j < ks; ++j) {
      double pkj = counts[k][j] / static_cast<double>(n);
      inner += (pkj / pk) * (pkj / pk);
    }
    u += pk * inner;
  }
  for (int j = 0; j < ks; ++j) {
    double col = 0.0;
    for (int k = 0; k < kh; ++k) col += counts[k][j];
    double pj = col / static_cast<double>(n);
    u -= pj * pj;
  }
  return u;
}

// ||S - H_S G||_F^2 / n' with materialized matrices.
inline double frobenius_term(const std::vector<int>& h, int kh, const std::vector<int>& s,
                             int ks) {
  std::size_t n = h.size();
  std::vector<std::vector<double>> g(kh, std::vector<double>(ks, 0.0));
  std::vector<double> members(kh, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    g[h[i]][s[i]] += 1.0;
    members[h[i]] += 1.0;
  }
  for (int k = 0; k < kh; ++k)
    if (members[k] > 0.0)
      for (double& x : g[k]) x /= members[k];
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < ks; ++j) {
      double sij = (s[i] == j) ? 1.0 : 0.0;
      double diff = sij - g[h[i]][j];
      f += diff * diff;
    }
  }
  return f / static_cast<double>(n);
}

// Mutual information from the explicit probability table.
inline double nmi(const std::vector<int>& a, int ka, const std::vector<int>& b, int kb) {
  std::size_t n = a.size();
  std::vector<std::vector<double>> p(ka, std::vector<double>(kb, 0.0));
  std::vector<double> pa(ka, 0.0), pb(kb, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    p[a[i]][b[i]] += 1.0 / static_cast<double>(n);
    pa[a[i]] += 1.0 / static_cast<double>(n);
    pb[b[i]] += 1.0 / static_cast<double>(n);
  }
  double mi = 0.0, ha = 0.0, hb = 0.0;
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j)
      if (p[i][j] > 0.0) mi += p[i][j] * std::log(p[i][j] / (pa[i] * pb[j]));
  for (double x : pa)
    if (x > 0.0) ha -= x * std::log(x);
  for (double x : pb)
    if (x > 0.0) hb -= x * std::log(x);
  if (ha + hb <= 0.0) return 0.0;
  return 2.0 * mi / (ha + hb);
}

struct RateOracle {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double far = 0.0, fnr = 0.0, tar = 0.0, accuracy = 0.0;
};

inline RateOracle rates(const std::vector<double>& scores, const std::vector<bool>& genuine,
                        double theta) {
  RateOracle r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    bool accept = scores[i] > theta;
    if (genuine[i] && accept) r.tp++;
    if (genuine[i] && !accept) r.fn++;
    if (!genuine[i] && accept) r.fp++;
    if (!genuine[i] && !accept) r.tn++;
  }
  r.far = (r.fp + r.tn) ? double(r.fp) / double(r.fp + r.tn) : 0.0;
  r.fnr = (r.fn + r.tp) ? double(r.fn) / double(r.fn + r.tp) : 0.0;
  r.tar = 1.0 - r.fnr;
  r.accuracy = double(r.tp + r.tn) / double(scores.size());
  return r;
}

inline double threshold_for_far(const std::vector<double>& imposters, double target) {
  std::vector<double> candidates = imposters;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (double theta : candidates) {
    std::size_t above = 0;
    for (double s : imposters)
      if (s > theta) ++above;
    if (double(above) / double(imposters.size()) <= target) return theta;
  }
  return candidates.back();
}

inline double average_precision(const std::vector<std::string>& order,
                                const std::set<std::string>& relevant) {
  double hits = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (relevant.count(order[i])) {
      hits += 1.0;
      sum += hits / double(i + 1);
    }
  }
  return sum / double(relevant.size());
}

inline std::size_t first_hit_rank(const std::vector<std::string>& order,
                                  const std::set<std::string>& relevant) {
  for (std::size_t i = 0; i < order.size(); ++i)
    if (relevant.count(order[i])) return i + 1;
  return 0;
}

}  // namespace oracles
