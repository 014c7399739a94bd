#include "kintools/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace kintools {

void ScoredPairSet::validate() const {
  if (scores.size() != genuine.size())
    throw Error(Errc::LengthMismatch, "scores and labels differ in length");
  if (!rel.empty() && rel.size() != scores.size())
    throw Error(Errc::LengthMismatch, "rel tags differ in length");
  if (!subgroup.empty() && subgroup.size() != scores.size())
    throw Error(Errc::LengthMismatch, "subgroup tags differ in length");
  for (double s : scores)
    if (!(s >= -1.0 && s <= 1.0)) throw Error(Errc::NonFinite, "score outside [-1, 1]");
}

RateCounts rates_at_threshold(const ScoredPairSet& pairs, double theta) {
  pairs.validate();
  if (pairs.size() == 0) throw Error(Errc::EmptySet, "no scored pairs");
  RateCounts c;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    bool accept = pairs.scores[i] > theta;
    if (pairs.genuine[i]) {
      accept ? ++c.tp : ++c.fn;
    } else {
      accept ? ++c.fp : ++c.tn;
    }
  }
  c.far = (c.fp + c.tn) ? static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn) : 0.0;
  c.fnr = (c.fn + c.tp) ? static_cast<double>(c.fn) / static_cast<double>(c.fn + c.tp) : 0.0;
  c.tar = 1.0 - c.fnr;
  c.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(pairs.size());
  return c;
}

namespace {

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void require_both_labels(const ScoredPairSet& pairs) {
  bool has_pos = false, has_neg = false;
  for (bool g : pairs.genuine) (g ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw Error(Errc::DegenerateLabels, "need at least one genuine and one imposter pair");
}

}  // namespace

std::pair<double, double> optimal_threshold(const ScoredPairSet& pairs) {
  pairs.validate();
  if (pairs.size() == 0) throw Error(Errc::EmptySet, "no scored pairs");
  require_both_labels(pairs);
  double best_theta = 0.0, best_acc = -1.0;
  for (double theta : unique_sorted(pairs.scores)) {
    double acc = rates_at_threshold(pairs, theta).accuracy;
    if (acc > best_acc) {  // strict: keeps the smallest candidate on ties
      best_acc = acc;
      best_theta = theta;
    }
  }
  return {best_theta, best_acc};
}

TypeAccuracyReport verification_accuracy_by_type(const ScoredPairSet& pairs,
                                                 const std::map<std::string, double>& theta_per_type) {
  pairs.validate();
  if (pairs.size() == 0) throw Error(Errc::EmptySet, "no scored pairs");
  if (pairs.rel.size() != pairs.size())
    throw Error(Errc::MissingType, "every pair needs a relationship type");

  std::map<std::string, std::size_t> correct, total;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string& t = pairs.rel[i];
    auto theta = theta_per_type.find(t);
    if (theta == theta_per_type.end())
      throw Error(Errc::MissingType, "no threshold for type '" + t + "'");
    bool accept = pairs.scores[i] > theta->second;
    if (accept == static_cast<bool>(pairs.genuine[i])) correct[t]++;
    total[t]++;
  }
  TypeAccuracyReport report;
  double weighted = 0.0;
  for (const auto& [t, n] : total) {
    double acc = static_cast<double>(correct[t]) / static_cast<double>(n);
    report.accuracy[t] = acc;
    report.support[t] = n;
    weighted += acc * static_cast<double>(n);
  }
  report.weighted_average = weighted / static_cast<double>(pairs.size());
  return report;
}

double threshold_for_far(const std::vector<double>& imposter_scores, double target_far) {
  if (imposter_scores.empty()) throw Error(Errc::EmptySet, "no imposter scores");
  if (!(target_far > 0.0 && target_far < 1.0))
    throw Error(Errc::InvalidHyperparameters, "target FAR must be in (0, 1)");
  std::vector<double> sorted = unique_sorted(imposter_scores);
  double n = static_cast<double>(imposter_scores.size());
  // FAR(theta) = count(score > theta) / n is non-increasing in theta; walk
  // candidates from the smallest up and stop at the first that satisfies it.
  std::vector<double> all(imposter_scores);
  std::sort(all.begin(), all.end());
  for (double theta : sorted) {
    auto above = all.end() - std::upper_bound(all.begin(), all.end(), theta);
    if (static_cast<double>(above) / n <= target_far) return theta;
  }
  throw Error(Errc::UnreachableTarget, "no threshold reaches the target FAR");  // unreachable
}

std::vector<TarFarPoint> tar_at_far(const ScoredPairSet& pairs, const std::vector<double>& targets) {
  pairs.validate();
  require_both_labels(pairs);
  std::vector<double> imposters;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (!pairs.genuine[i]) imposters.push_back(pairs.scores[i]);
  std::vector<TarFarPoint> out;
  for (double target : targets) {
    TarFarPoint p;
    p.target = target;
    p.theta = threshold_for_far(imposters, target);
    p.tar = rates_at_threshold(pairs, p.theta).tar;
    out.push_back(p);
  }
  return out;
}

RateCurve det_curve(const ScoredPairSet& pairs) {
  pairs.validate();
  if (pairs.size() == 0) throw Error(Errc::EmptySet, "no scored pairs");
  require_both_labels(pairs);
  std::vector<double> thetas = unique_sorted(pairs.scores);
  thetas.insert(thetas.begin(), -std::numeric_limits<double>::infinity());
  thetas.push_back(std::numeric_limits<double>::infinity());
  RateCurve curve;
  for (double theta : thetas) {
    RateCounts c = rates_at_threshold(pairs, theta);
    curve.points.push_back({theta, c.far, c.fnr, c.tar, c.accuracy});
  }
  return curve;
}

double percent_error_far(double reported, double actual) {
  if (!(reported > 0.0)) throw Error(Errc::ZeroReported, "reported FAR must be positive");
  return (reported - actual) / reported * 100.0;
}

std::vector<SubgroupThresholdRow> subgroup_threshold_report(const ScoredPairSet& pairs,
                                                            double target_far) {
  pairs.validate();
  if (pairs.size() == 0) throw Error(Errc::EmptySet, "no scored pairs");
  if (pairs.subgroup.size() != pairs.size())
    throw Error(Errc::MissingSubgroup, "every pair needs a subgroup tag");

  std::map<std::string, ScoredPairSet> by_group;
  std::vector<double> pooled_imposters;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    ScoredPairSet& g = by_group[pairs.subgroup[i]];
    g.scores.push_back(pairs.scores[i]);
    g.genuine.push_back(pairs.genuine[i]);
    if (!pairs.genuine[i]) pooled_imposters.push_back(pairs.scores[i]);
  }
  for (const auto& [name, g] : by_group) {
    bool has_pos = false, has_neg = false;
    for (bool b : g.genuine) (b ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg)
      throw Error(Errc::MissingSubgroup, "subgroup '" + name + "' lacks genuine or imposter pairs");
  }

  double theta_global = threshold_for_far(pooled_imposters, target_far);
  std::vector<SubgroupThresholdRow> rows;
  for (const auto& [name, g] : by_group) {
    SubgroupThresholdRow row;
    row.subgroup = name;
    row.theta_global = theta_global;
    RateCounts at_g = rates_at_threshold(g, theta_global);
    row.far_at_global = at_g.far;
    row.tar_at_global = at_g.tar;
    row.acc_at_global = at_g.accuracy;
    row.percent_error_global = percent_error_far(target_far, at_g.far);

    std::vector<double> imposters;
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!g.genuine[i]) imposters.push_back(g.scores[i]);
    row.theta_subgroup = threshold_for_far(imposters, target_far);
    RateCounts at_s = rates_at_threshold(g, row.theta_subgroup);
    row.far_at_subgroup = at_s.far;
    row.tar_at_subgroup = at_s.tar;
    row.percent_error_subgroup = percent_error_far(target_far, at_s.far);

    auto [theta_opt, acc_opt] = optimal_threshold(g);
    row.theta_optimal = theta_opt;
    row.acc_at_optimal = acc_opt;
    rows.push_back(std::move(row));
  }
  return rows;
}

double average_precision(const RankedList& ranked) {
  if (ranked.relevant.empty()) throw Error(Errc::NoRelevant, "probe '" + ranked.probe + "'");
  double hits = 0.0, sum = 0.0;
  for (std::size_t pos = 0; pos < ranked.order.size(); ++pos) {
    if (ranked.relevant.count(ranked.order[pos])) {
      hits += 1.0;
      sum += hits / static_cast<double>(pos + 1);
    }
  }
  return sum / static_cast<double>(ranked.relevant.size());
}

double mean_average_precision(const std::vector<RankedList>& lists) {
  if (lists.empty()) throw Error(Errc::EmptySet, "no ranked lists");
  double sum = 0.0;
  for (const auto& l : lists) sum += average_precision(l);
  return sum / static_cast<double>(lists.size());
}

CmcCurve cmc(const std::vector<RankedList>& lists, const std::vector<int>& ranks) {
  if (lists.empty()) throw Error(Errc::EmptySet, "no ranked lists");
  std::size_t max_rank = 0;
  std::vector<std::size_t> first_hit;  // 1-based, or 0 when no hit
  for (const auto& l : lists) {
    if (l.relevant.empty()) throw Error(Errc::NoRelevant, "probe '" + l.probe + "'");
    max_rank = std::max(max_rank, l.order.size());
    std::size_t hit = 0;
    for (std::size_t pos = 0; pos < l.order.size(); ++pos) {
      if (l.relevant.count(l.order[pos])) {
        hit = pos + 1;
        break;
      }
    }
    first_hit.push_back(hit);
  }
  CmcCurve curve;
  curve.cmc.resize(max_rank, 0.0);
  for (std::size_t k = 1; k <= max_rank; ++k) {
    std::size_t count = 0;
    for (std::size_t h : first_hit)
      if (h != 0 && h <= k) ++count;
    curve.cmc[k - 1] = static_cast<double>(count) / static_cast<double>(lists.size());
  }
  for (int r : ranks) {
    if (r < 1) throw Error(Errc::InvalidHyperparameters, "ranks are 1-based");
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(r), max_rank);
    curve.at_rank[r] = curve.cmc.empty() ? 0.0 : curve.cmc[k - 1];
  }
  return curve;
}

double tri_subject_score(const Template& father, const Template& mother, const Template& child) {
  auto pooled = [](const Template& t) {
    if (t.media.empty()) throw Error(Errc::EmptyTemplate, "template " + t.subject() + " has no media");
    std::vector<std::vector<double>> rows;
    rows.reserve(t.media.size());
    for (const auto& e : t.media) rows.push_back(e.vec);
    return mean_pooled_unit(rows);
  };
  std::vector<double> f = pooled(father), m = pooled(mother), c = pooled(child);
  return 0.5 * (cosine_similarity(f, c) + cosine_similarity(m, c));
}

PrfReport precision_recall_f1(const std::vector<std::vector<std::size_t>>& confusion) {
  std::size_t k = confusion.size();
  if (k == 0) throw Error(Errc::EmptyMatrix, "empty confusion matrix");
  for (const auto& row : confusion)
    if (row.size() != k) throw Error(Errc::DimensionMismatch, "confusion matrix must be square");

  PrfReport report;
  double sp = 0.0, sr = 0.0, sf = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = confusion[c][c], fp = 0, fn = 0;
    for (std::size_t r = 0; r < k; ++r) {
      if (r != c) {
        fp += confusion[r][c];
        fn += confusion[c][r];
      }
    }
    ClassPrf prf;
    if (tp + fp == 0 || tp + fn == 0) prf.degenerate = true;
    prf.precision = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    prf.recall = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    if (prf.precision + prf.recall > 0.0)
      prf.f1 = 2.0 * prf.precision * prf.recall / (prf.precision + prf.recall);
    else
      prf.degenerate = true;
    sp += prf.precision;
    sr += prf.recall;
    sf += prf.f1;
    report.per_class.push_back(prf);
  }
  report.macro_precision = sp / static_cast<double>(k);
  report.macro_recall = sr / static_cast<double>(k);
  report.macro_f1 = sf / static_cast<double>(k);
  return report;
}

std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<int>& predicted,
                                                       const std::vector<int>& truth,
                                                       std::size_t num_classes) {
  if (predicted.size() != truth.size())
    throw Error(Errc::LengthMismatch, "prediction and truth differ in length");
  std::vector<std::vector<std::size_t>> m(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= num_classes ||
        static_cast<std::size_t>(predicted[i]) >= num_classes)
      throw Error(Errc::LengthMismatch, "class index out of range");
    m[truth[i]][predicted[i]]++;
  }
  return m;
}

namespace {

void print_double(std::ostream& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

}  // namespace

void write_rate_curve_csv(const RateCurve& curve, std::ostream& out) {
  out << "threshold,far,fnr,tar\n";
  for (const auto& p : curve.points) {
    print_double(out, p.threshold);
    out << ',';
    print_double(out, p.far);
    out << ',';
    print_double(out, p.fnr);
    out << ',';
    print_double(out, p.tar);
    out << '\n';
  }
}

void write_cmc_csv(const CmcCurve& curve, std::ostream& out) {
  out << "rank,cmc\n";
  for (std::size_t k = 0; k < curve.cmc.size(); ++k) {
    out << (k + 1) << ',';
    print_double(out, curve.cmc[k]);
    out << '\n';
  }
}

}  // namespace kintools
