#pragma once

#include <vector>

#include "kintools/dataset.hpp"
#include "kintools/eval.hpp"
#include "kintools/svm.hpp"

namespace kintools {

/// Naive late fusion: mean of all pairwise cosine scores between the media of
/// the two templates.
double score_fusion(const Template& a, const Template& b);

/// Naive early fusion: mean of the media vectors, renormalized. Same contract
/// as fuse_track but modality-agnostic; the result keeps the subject tags.
Embedding feature_fusion(const Template& t);

/// Template adaptation for verification. Trains one classifier per side
/// (template media versus the shared negatives) and returns
/// 0.5 * P(q) + 0.5 * Q(p), where P(q) is the mean decision of p's model over
/// q's media. Symmetric by construction.
double probe_adaptation_score(const Template& p, const Template& q,
                              const std::vector<Embedding>& negatives, double lambda = 10.0);

struct AdaptedGallery {
  std::vector<std::string> subjects;  // one per template, "fid/mid"
  std::vector<LinearModel> models;
};

/// Gallery adaptation: for each template, negatives are the training
/// negatives plus the media of every other gallery template.
AdaptedGallery gallery_adapt(const std::vector<Template>& gallery,
                             const std::vector<Embedding>& train_negatives, double lambda = 10.0);

/// Score each gallery template by the mean decision of its adapted model over
/// the probe's media; descending order, ties by ascending subject id. The
/// relevant set is left empty for the caller to fill.
RankedList rank_gallery(const Template& probe, const AdaptedGallery& adapted);

}  // namespace kintools
