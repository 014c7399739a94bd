#include "kintools/matcher.hpp"

namespace kintools {

ScoreMatrix score_matrix(const std::vector<Embedding>& probe, const std::vector<Embedding>& reference) {
  if (probe.empty() || reference.empty())
    throw Error(Errc::EmptySet, "score_matrix needs nonempty probe and reference lists");
  std::size_t d = probe.front().vec.size();
  for (const auto& e : probe)
    if (e.vec.size() != d) throw Error(Errc::DimensionMismatch, "probe dimensions differ");
  for (const auto& e : reference)
    if (e.vec.size() != d) throw Error(Errc::DimensionMismatch, "probe/reference dimensions differ");

  ScoreMatrix m;
  m.rows = probe.size();
  m.cols = reference.size();
  m.values.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      m.values[i * m.cols + j] = cosine_similarity(probe[i].vec, reference[j].vec);
  return m;
}

}  // namespace kintools
