#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "kintools/core.hpp"

namespace kintools {

/// Hard assignment of n instances to clusters 0..k-1.
struct Partition {
  std::vector<int> labels;
  int k = 0;
};

/// Partial ground truth: a one-hot partition of n' pre-labeled instances into
/// K' classes. Stored as (row index, class index) pairs; classes[i] is the
/// position of the 1 in row i of the one-hot matrix.
struct SideInfo {
  std::vector<std::size_t> member_rows;  // indices into the dataset, unique
  std::vector<int> classes;              // class of each labeled row, in [0, num_classes)
  int num_classes = 0;                   // K'

  bool empty() const { return member_rows.empty(); }
  std::size_t size() const { return member_rows.size(); }
  void validate(std::size_t n) const;
};

/// Partition-agreement utility over the normalized contingency matrix of the
/// two labelings: sum_k p_k+ * sum_j (p_kj / p_k+)^2 - sum_j p_+j^2.
/// Clusters with zero members contribute zero. Always >= 0.
double category_utility(const Partition& s, const Partition& h);

/// The squared-residual form of the same quantity: -||S - H_S G||_F^2 / n',
/// where S is the one-hot side-information matrix, H_S groups its rows by the
/// clusters of h, and G holds the per-cluster means of S rows (zero rows for
/// empty clusters). Normalizing by n' makes differences across candidate
/// partitions equal the negated differences of category_utility.
double utility_as_distance(const SideInfo& s, const Partition& h);

/// Mutual information normalized by the arithmetic mean of the two entropies,
/// 2I/(H_a + H_b), in [0, 1]. Returns 0 when both labelings are single-cluster.
double nmi(const Partition& a, const Partition& b);

struct SscOptions {
  int max_iter = 300;
  double tol = 1e-6;  // relative objective change
};

struct SscResult {
  Partition partition;
  std::vector<double> objective_curve;  // objective after each update step
  std::vector<double> confidence;       // cosine of each point to its centroid
  int iterations = 0;
  bool converged = false;
};

/// Side-info file: CSV rows of id,class_label (optional "id,class_label"
/// header). Class indices are assigned in first-appearance order.
SideInfo read_side_csv(const std::string& path, const Dataset& data);

/// Partition file: CSV rows of id,cluster,confidence with clusters ascending
/// and rows sorted by descending confidence within each cluster.
void write_partition_csv(const Dataset& data, const SscResult& result, std::ostream& out);

/// Semi-supervised K-means on the augmented representation [features | labels].
/// Minimizes sum_k sum_{i in C_k} (1 - cos(x_i, m_k1)) + lambda * sum over
/// labeled i of ||s_i - m_k2||^2. Feature rows are L2-normalized internally.
/// m_k1 is the plain mean of member feature rows; m_k2 averages the one-hot
/// rows of labeled members only (zero vector when a cluster has none).
///
/// Init: one centroid per side-information class from that class's feature
/// mean, the remaining K - K' by greedy farthest-point on cosine distance;
/// the seed picks the first centroid when there is no side information.
/// The objective is asserted non-increasing across iterations.
SscResult ssc_kmeans(const Dataset& data, const SideInfo& side, int k, double lambda,
                     std::uint64_t seed, const SscOptions& opts = {});

}  // namespace kintools
