#pragma once

#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "kintools/dataset.hpp"

namespace kintools {

/// Labeled similarity scores, optionally tagged with relationship type and
/// demographic subgroup. genuine[i] is true for KIN pairs.
struct ScoredPairSet {
  std::vector<double> scores;
  std::vector<bool> genuine;
  std::vector<std::string> rel;       // empty or size n
  std::vector<std::string> subgroup;  // empty or size n

  std::size_t size() const { return scores.size(); }
  void validate() const;
};

struct RateCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double far = 0.0, fnr = 0.0, tar = 0.0, accuracy = 0.0;
};

/// Counts and rates at one threshold under strict score > theta acceptance.
/// far = fp/(fp+tn), fnr = fn/(fn+tp), tar = 1 - fnr.
RateCounts rates_at_threshold(const ScoredPairSet& pairs, double theta);

/// Smallest unique score maximizing accuracy, with that accuracy.
std::pair<double, double> optimal_threshold(const ScoredPairSet& pairs);

struct TypeAccuracyReport {
  std::map<std::string, double> accuracy;       // per type
  std::map<std::string, std::size_t> support;   // pair counts per type
  double weighted_average = 0.0;
};

/// Per-type accuracy at per-type thresholds plus the pair-count weighted mean.
TypeAccuracyReport verification_accuracy_by_type(const ScoredPairSet& pairs,
                                                 const std::map<std::string, double>& theta_per_type);

/// Smallest unique imposter score theta with empirical FAR(theta) <= target.
double threshold_for_far(const std::vector<double>& imposter_scores, double target_far);

struct TarFarPoint {
  double target = 0.0;
  double theta = 0.0;
  double tar = 0.0;
};

std::vector<TarFarPoint> tar_at_far(const ScoredPairSet& pairs, const std::vector<double>& targets);

struct RatePoint {
  double threshold = 0.0;
  double far = 0.0;
  double fnr = 0.0;
  double tar = 0.0;
  double accuracy = 0.0;
};

/// Exact step curve: one point per unique score plus -inf/+inf endpoints,
/// sorted ascending by threshold. far and tar are non-increasing in theta.
struct RateCurve {
  std::vector<RatePoint> points;
};

RateCurve det_curve(const ScoredPairSet& pairs);

/// Signed percent difference (reported - actual) / reported * 100.
double percent_error_far(double reported, double actual);

struct SubgroupThresholdRow {
  std::string subgroup;
  double theta_global = 0.0;     // threshold from the pooled imposter set
  double far_at_global = 0.0;    // this subgroup's FAR at the global threshold
  double tar_at_global = 0.0;
  double acc_at_global = 0.0;
  double percent_error_global = 0.0;  // vs. the target FAR
  double theta_subgroup = 0.0;   // threshold from this subgroup's imposters
  double far_at_subgroup = 0.0;
  double tar_at_subgroup = 0.0;
  double percent_error_subgroup = 0.0;
  double theta_optimal = 0.0;    // accuracy-optimal threshold for the subgroup
  double acc_at_optimal = 0.0;
};

/// Global versus per-subgroup threshold calibration at a target FAR.
std::vector<SubgroupThresholdRow> subgroup_threshold_report(const ScoredPairSet& pairs,
                                                            double target_far);

/// One probe's retrieval outcome: gallery subjects in descending-score order
/// plus the set of subjects that count as correct. scores, when present, is
/// aligned with order.
struct RankedList {
  std::string probe;
  std::vector<std::string> order;
  std::set<std::string> relevant;
  std::vector<double> scores;
};

/// (1/P) * sum over the i-th relevant hit of i / rank(hit), ranks 1-based.
double average_precision(const RankedList& ranked);
double mean_average_precision(const std::vector<RankedList>& lists);

struct CmcCurve {
  std::vector<double> cmc;          // cmc[k-1] = fraction of probes hit by rank k
  std::map<int, double> at_rank;    // requested ranks
};

CmcCurve cmc(const std::vector<RankedList>& lists, const std::vector<int>& ranks);

/// Mean of the father-child and mother-child cosines between the mean-pooled
/// unit vectors of the three templates.
double tri_subject_score(const Template& father, const Template& mother, const Template& child);

struct ClassPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some denominator was zero and reported as 0
};

struct PrfReport {
  std::vector<ClassPrf> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

/// Per-class precision/recall/F1 from a confusion matrix (row = truth).
PrfReport precision_recall_f1(const std::vector<std::vector<std::size_t>>& confusion);

/// Row = truth class, column = predicted class.
std::vector<std::vector<std::size_t>> confusion_matrix(const std::vector<int>& predicted,
                                                       const std::vector<int>& truth,
                                                       std::size_t num_classes);

/// Plot-ready CSV emitters: threshold,far,fnr,tar and rank,cmc per line.
void write_rate_curve_csv(const RateCurve& curve, std::ostream& out);
void write_cmc_csv(const CmcCurve& curve, std::ostream& out);

}  // namespace kintools
