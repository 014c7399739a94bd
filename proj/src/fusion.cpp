#include "kintools/fusion.hpp"

#include <algorithm>
#include <numeric>

namespace kintools {

namespace {

void require_media(const Template& t) {
  if (t.media.empty()) throw Error(Errc::EmptyTemplate, "template " + t.subject() + " has no media");
}

std::vector<std::vector<double>> media_rows(const Template& t) {
  std::vector<std::vector<double>> rows;
  rows.reserve(t.media.size());
  for (const auto& e : t.media) rows.push_back(e.vec);
  return rows;
}

double mean_decision(const LinearModel& model, const Template& t) {
  double sum = 0.0;
  for (const auto& e : t.media) sum += decision(model, e.vec);
  return sum / static_cast<double>(t.media.size());
}

LinearModel adapt_to(const Template& t, const std::vector<Embedding>& negatives, double lambda) {
  std::vector<std::vector<double>> pos = media_rows(t);
  std::vector<std::vector<double>> neg;
  neg.reserve(negatives.size());
  for (const auto& e : negatives) neg.push_back(e.vec);
  return train_cwsvm(pos, neg, lambda);
}

}  // namespace

double score_fusion(const Template& a, const Template& b) {
  require_media(a);
  require_media(b);
  double sum = 0.0;
  for (const auto& ea : a.media)
    for (const auto& eb : b.media) sum += cosine_similarity(ea.vec, eb.vec);
  return sum / static_cast<double>(a.media.size() * b.media.size());
}

Embedding feature_fusion(const Template& t) {
  require_media(t);
  Embedding out = t.media.front();
  out.vec = mean_pooled_unit(media_rows(t));
  return out;
}

double probe_adaptation_score(const Template& p, const Template& q,
                              const std::vector<Embedding>& negatives, double lambda) {
  require_media(p);
  require_media(q);
  if (negatives.empty()) throw Error(Errc::EmptyNegatives, "probe adaptation needs negatives");
  LinearModel model_p = adapt_to(p, negatives, lambda);
  LinearModel model_q = adapt_to(q, negatives, lambda);
  return 0.5 * mean_decision(model_p, q) + 0.5 * mean_decision(model_q, p);
}

AdaptedGallery gallery_adapt(const std::vector<Template>& gallery,
                             const std::vector<Embedding>& train_negatives, double lambda) {
  if (gallery.size() < 2) throw Error(Errc::SingletonGallery, "gallery adaptation needs >= 2 templates");
  for (const auto& t : gallery) require_media(t);
  AdaptedGallery out;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    std::vector<Embedding> negatives = train_negatives;
    for (std::size_t j = 0; j < gallery.size(); ++j) {
      if (j == i) continue;
      negatives.insert(negatives.end(), gallery[j].media.begin(), gallery[j].media.end());
    }
    out.subjects.push_back(gallery[i].subject());
    out.models.push_back(adapt_to(gallery[i], negatives, lambda));
  }
  return out;
}

RankedList rank_gallery(const Template& probe, const AdaptedGallery& adapted) {
  require_media(probe);
  if (adapted.models.empty()) throw Error(Errc::EmptySet, "no adapted models");
  std::vector<std::pair<double, std::string>> scored;
  for (std::size_t i = 0; i < adapted.models.size(); ++i)
    scored.emplace_back(mean_decision(adapted.models[i], probe), adapted.subjects[i]);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  RankedList out;
  out.probe = probe.subject();
  for (const auto& [score, subject] : scored) {
    out.order.push_back(subject);
    out.scores.push_back(score);
  }
  return out;
}

}  // namespace kintools
