#pragma once

#include <vector>

#include "kintools/core.hpp"

namespace kintools {

/// Score threshold for the accept/reject decision. One convention everywhere:
/// similarity space, strict acceptance (score > theta).
struct Threshold {
  double theta = 0.0;
};

/// Dense probe-by-reference cosine score matrix.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::vector<double> row(std::size_t i) const {
    return {values.begin() + static_cast<std::ptrdiff_t>(i * cols),
            values.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols)};
  }
};

/// true iff score > theta. KIN/genuine maps to true.
inline bool match_decision(double score, Threshold theta) { return score > theta.theta; }

/// Entry (i, j) = cosine_similarity(probe[i], reference[j]).
ScoreMatrix score_matrix(const std::vector<Embedding>& probe, const std::vector<Embedding>& reference);

}  // namespace kintools
