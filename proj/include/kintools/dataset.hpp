#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kintools/core.hpp"
#include "kintools/matcher.hpp"

namespace kintools {

/// Kin relationship types. The eleven family relations form the closed set
/// allowed in Family::relationships; Self tags within-subject genuine pairs
/// and None tags negatives.
enum class Rel {
  BB, SS, SIBS, FD, FS, MD, MS, GFGD, GFGS, GMGD, GMGS,
  Self,
  None,
};

const char* rel_name(Rel r);
Rel parse_rel(const std::string& s);  // UnknownRelationshipType on anything else
bool is_kin_rel(Rel r);               // true for the eleven family relations

struct Family {
  std::string fid;
  std::map<std::string, std::vector<std::string>> members;        // mid -> embedding ids
  std::map<std::pair<std::string, std::string>, Rel> relationships;  // (mid, mid) -> type
};

enum class PairLabel { Kin, NonKin };

struct SamplePair {
  std::string id_a;
  std::string id_b;
  Rel rel = Rel::None;
  PairLabel label = PairLabel::NonKin;
  int fold = 0;
};

/// All positive pairs of a family list: C(N,2) within-subject genuine pairs
/// per subject (tagged Self) plus N_a * N_b cross-member pairs for every
/// related member pair whose type is in `types`. Each pair has id_a < id_b
/// and the list is sorted lexicographically by (id_a, id_b).
std::vector<SamplePair> generate_positive_pairs(const std::vector<Family>& families,
                                                const std::set<Rel>& types);

struct NegativeSamplingOptions {
  /// When set, the balanced negatives are drawn within a subgroup and the
  /// count is then doubled with cross-subgroup pairs from the same fold.
  bool cross_subgroup_doubling = false;
  std::map<std::string, std::string> subgroup_of;  // id -> subgroup tag
};

/// Balanced negatives: per fold and per relationship type, as many NonKin
/// pairs as there are positives, drawn without replacement from cross-family
/// id pairs seen in that fold. Reproducible under `seed`.
std::vector<SamplePair> sample_negative_pairs(const std::vector<SamplePair>& positives,
                                              const std::vector<Family>& universe,
                                              std::uint64_t seed,
                                              const NegativeSamplingOptions& opts = {});

/// Deal subjects to k folds: sort by pair count descending (ties by subject id
/// ascending), then round-robin starting at fold 0.
std::map<std::string, int> assign_folds(const std::map<std::string, std::size_t>& subject_pair_counts,
                                        int k);

struct PruneResult {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> dropped;
};

/// Keep face i iff the nearest-rank percentile of row i is >= theta.
/// Defaults match the curation rule: median (P=50) against theta=0.2.
PruneResult prune_faces_by_median(const ScoreMatrix& scores, double theta = 0.2,
                                  double percentile = 50.0);

/// Nearest-rank percentile: the ceil(p/100 * N)-th smallest value.
double nearest_rank_percentile(std::vector<double> values, double percentile);

/// Average the frame encodings and renormalize; result is tagged as a track
/// and inherits the first frame's identity fields.
Embedding fuse_track(const std::vector<Embedding>& frames);

/// Accept a track iff the nearest-rank percentile of the per-face mean scores
/// is strictly above theta. Defaults: 25th percentile against theta=0.25.
bool track_match_decision(const std::vector<double>& sampled_scores, double theta = 0.25,
                          double percentile = 25.0);

/// A subject's bag of media encodings, compared as a unit.
struct Template {
  std::string fid;
  std::string mid;
  std::vector<Embedding> media;

  std::string subject() const { return fid + "/" + mid; }
};

// --- file formats ---

/// Full benchmark construction: positives for the requested types, folds
/// assigned per family by pair count (so no fid spans folds), then balanced
/// negatives per fold and type.
std::vector<SamplePair> build_benchmark(const std::vector<Family>& families,
                                        const std::set<Rel>& types, int folds, std::uint64_t seed,
                                        const NegativeSamplingOptions& opts = {});

/// Family file: a JSON object {fid, members:{mid:[ids]}, relationships:
/// [[mid,mid,type]]} or an array of such objects.
std::vector<Family> read_families_file(const std::string& path);

/// Pair list CSV with header id_a,id_b,rel,label,fold.
void write_pairs_csv(const std::vector<SamplePair>& pairs, const std::string& path);
std::vector<SamplePair> read_pairs_csv(const std::string& path);

}  // namespace kintools
