#include "kintools/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "kintools/rng.hpp"

namespace kintools {

namespace {

void check_partition(const Partition& p) {
  if (p.k < 1) throw Error(Errc::InvalidK, "partition needs k >= 1");
  for (int c : p.labels)
    if (c < 0 || c >= p.k) throw Error(Errc::InvalidK, "cluster id out of range");
}

}  // namespace

void SideInfo::validate(std::size_t n) const {
  if (member_rows.size() != classes.size())
    throw Error(Errc::LengthMismatch, "side info rows and classes differ in length");
  if (!empty() && num_classes < 1) throw Error(Errc::InvalidK, "side info needs K' >= 1");
  std::set<std::size_t> seen;
  for (std::size_t r : member_rows) {
    if (r >= n) throw Error(Errc::LengthMismatch, "side info row index out of range");
    if (!seen.insert(r).second) throw Error(Errc::LengthMismatch, "duplicate side info row");
  }
  for (int c : classes)
    if (c < 0 || c >= num_classes) throw Error(Errc::InvalidK, "side info class out of range");
}

double category_utility(const Partition& s, const Partition& h) {
  check_partition(s);
  check_partition(h);
  if (s.labels.size() != h.labels.size())
    throw Error(Errc::LengthMismatch, "partitions cover different instance counts");
  std::size_t n = s.labels.size();
  if (n == 0) throw Error(Errc::LengthMismatch, "empty partitions");

  // counts[k][j]: instances in cluster k of h and class j of s
  std::vector<std::vector<std::size_t>> counts(h.k, std::vector<std::size_t>(s.k, 0));
  for (std::size_t i = 0; i < n; ++i) counts[h.labels[i]][s.labels[i]]++;

  double utility = 0.0;
  for (int k = 0; k < h.k; ++k) {
    std::size_t row = 0;
    for (int j = 0; j < s.k; ++j) row += counts[k][j];
    if (row == 0) continue;
    double p_k = static_cast<double>(row) / static_cast<double>(n);
    double inner = 0.0;
    for (int j = 0; j < s.k; ++j) {
      double p_kj = static_cast<double>(counts[k][j]) / static_cast<double>(n);
      inner += (p_kj / p_k) * (p_kj / p_k);
    }
    utility += p_k * inner;
  }
  for (int j = 0; j < s.k; ++j) {
    std::size_t col = 0;
    for (int k = 0; k < h.k; ++k) col += counts[k][j];
    double p_j = static_cast<double>(col) / static_cast<double>(n);
    utility -= p_j * p_j;
  }
  return utility;
}

double utility_as_distance(const SideInfo& s, const Partition& h) {
  if (s.size() != h.labels.size())
    throw Error(Errc::LengthMismatch, "side info and partition cover different instance counts");
  check_partition(h);
  std::size_t n = s.size();
  if (n == 0) throw Error(Errc::LengthMismatch, "empty side info");

  // G rows: per-cluster means of the one-hot S rows.
  std::vector<std::vector<double>> g(h.k, std::vector<double>(s.num_classes, 0.0));
  std::vector<std::size_t> members(h.k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    g[h.labels[i]][s.classes[i]] += 1.0;
    members[h.labels[i]]++;
  }
  for (int k = 0; k < h.k; ++k)
    if (members[k] > 0)
      for (double& x : g[k]) x /= static_cast<double>(members[k]);

  double frob = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = g[h.labels[i]];
    for (int j = 0; j < s.num_classes; ++j) {
      double diff = (j == s.classes[i] ? 1.0 : 0.0) - row[j];
      frob += diff * diff;
    }
  }
  return -frob / static_cast<double>(n);
}

double nmi(const Partition& a, const Partition& b) {
  check_partition(a);
  check_partition(b);
  if (a.labels.size() != b.labels.size())
    throw Error(Errc::LengthMismatch, "partitions cover different instance counts");
  std::size_t n = a.labels.size();
  if (n == 0) throw Error(Errc::LengthMismatch, "empty partitions");

  std::vector<std::vector<std::size_t>> joint(a.k, std::vector<std::size_t>(b.k, 0));
  std::vector<std::size_t> ca(a.k, 0), cb(b.k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    joint[a.labels[i]][b.labels[i]]++;
    ca[a.labels[i]]++;
    cb[b.labels[i]]++;
  }
  auto entropy = [n](const std::vector<std::size_t>& counts) {
    double h = 0.0;
    for (std::size_t c : counts) {
      if (c == 0) continue;
      double p = static_cast<double>(c) / static_cast<double>(n);
      h -= p * std::log(p);
    }
    return h;
  };
  double ha = entropy(ca), hb = entropy(cb);
  if (ha + hb <= 0.0) return 0.0;

  double mi = 0.0;
  for (int i = 0; i < a.k; ++i) {
    for (int j = 0; j < b.k; ++j) {
      if (joint[i][j] == 0) continue;
      double pij = static_cast<double>(joint[i][j]) / static_cast<double>(n);
      double pi = static_cast<double>(ca[i]) / static_cast<double>(n);
      double pj = static_cast<double>(cb[j]) / static_cast<double>(n);
      mi += pij * std::log(pij / (pi * pj));
    }
  }
  double value = 2.0 * mi / (ha + hb);
  return std::clamp(value, 0.0, 1.0);
}

namespace {

// Cosine distance against a centroid that is not necessarily unit length.
// A degenerate (zero) centroid scores as distance 1 so it stays comparable.
double cos_distance(std::span<const double> x, std::span<const double> m) {
  double dot = 0.0, nm = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * m[i];
    nm += m[i] * m[i];
  }
  nm = std::sqrt(nm);
  if (nm <= kZeroVectorTol) return 1.0;
  return 1.0 - dot / nm;  // x is unit length
}

struct Centroids {
  std::vector<std::vector<double>> feat;   // k x m
  std::vector<std::vector<double>> label;  // k x K'
  std::vector<std::size_t> members;
  std::vector<std::size_t> labeled_members;
};

}  // namespace

SscResult ssc_kmeans(const Dataset& data, const SideInfo& side, int k, double lambda,
                     std::uint64_t seed, const SscOptions& opts) {
  std::size_t n = data.size();
  if (n == 0) throw Error(Errc::EmptyDataset, "cannot cluster an empty dataset");
  side.validate(n);
  if (k < 1 || k < side.num_classes)
    throw Error(Errc::InvalidK, "need K >= K' and K >= 1, got K=" + std::to_string(k) +
                                    " K'=" + std::to_string(side.num_classes));
  if (static_cast<std::size_t>(k) > n)
    throw Error(Errc::InvalidK, "more clusters than points");
  if (lambda < 0.0 || opts.max_iter < 1 || opts.tol < 0.0)
    throw Error(Errc::InvalidHyperparameters, "lambda >= 0, max_iter >= 1, tol >= 0 required");

  std::size_t m = data.dim();
  int kc = side.num_classes;

  // Unit-normalized working copy of the feature rows.
  std::vector<std::vector<double>> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = l2_normalize(data[i].vec);

  // labeled[i] = class index, or -1.
  std::vector<int> labeled(n, -1);
  for (std::size_t i = 0; i < side.size(); ++i) labeled[side.member_rows[i]] = side.classes[i];

  auto label_distance = [&](std::size_t i, const std::vector<double>& mk2) {
    double d = 0.0;
    for (int j = 0; j < kc; ++j) {
      double diff = (j == labeled[i] ? 1.0 : 0.0) - mk2[j];
      d += diff * diff;
    }
    return d;
  };
  auto point_distance = [&](std::size_t i, const Centroids& c, int kk) {
    double d = cos_distance(x[i], c.feat[kk]);
    if (labeled[i] >= 0) d += lambda * label_distance(i, c.label[kk]);
    return d;
  };

  // --- Initialization ---
  Centroids cent;
  cent.feat.assign(k, std::vector<double>(m, 0.0));
  cent.label.assign(k, std::vector<double>(std::max(kc, 0), 0.0));
  cent.members.assign(k, 0);
  cent.labeled_members.assign(k, 0);

  int placed = 0;
  for (int c = 0; c < kc; ++c) {
    std::vector<double> mean(m, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labeled[i] == c) {
        for (std::size_t j = 0; j < m; ++j) mean[j] += x[i][j];
        ++count;
      }
    }
    if (count == 0) throw Error(Errc::InvalidK, "side info class with no rows");
    for (double& v : mean) v /= static_cast<double>(count);
    cent.feat[placed] = std::move(mean);
    cent.label[placed][c] = 1.0;
    ++placed;
  }

  Rng rng(seed);
  if (placed == 0) {
    std::size_t first = static_cast<std::size_t>(rng.below(n));
    cent.feat[0] = x[first];
    ++placed;
  }
  // Greedy farthest point on cosine distance for the remaining centroids.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < placed; ++c) nearest[i] = std::min(nearest[i], cos_distance(x[i], cent.feat[c]));
  while (placed < k) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (nearest[i] > nearest[best]) best = i;
    cent.feat[placed] = x[best];
    if (labeled[best] >= 0) cent.label[placed][labeled[best]] = 1.0;
    ++placed;
    for (std::size_t i = 0; i < n; ++i)
      nearest[i] = std::min(nearest[i], cos_distance(x[i], cent.feat[placed - 1]));
  }

  // --- Lloyd iterations on the augmented representation ---
  std::vector<int> assign(n, -1);
  SscResult result;
  double prev_obj = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int arg = 0;
      double best = point_distance(i, cent, 0);
      for (int c = 1; c < k; ++c) {
        double d = point_distance(i, cent, c);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      if (assign[i] != arg) changed = true;
      assign[i] = arg;
    }

    // Repair empty clusters: move the point farthest from its own centroid.
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) sizes[assign[i]]++;
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t worst = n;
      double worst_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[assign[i]] <= 1) continue;  // do not empty another cluster
        double d = point_distance(i, cent, assign[i]);
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      if (worst == n) break;  // nothing movable; leave empty
      sizes[assign[worst]]--;
      assign[worst] = c;
      sizes[c] = 1;
      changed = true;
    }

    // Update step: feature part is the member mean, label part averages
    // labeled members only and stays zero when a cluster has none.
    for (int c = 0; c < k; ++c) {
      std::fill(cent.feat[c].begin(), cent.feat[c].end(), 0.0);
      std::fill(cent.label[c].begin(), cent.label[c].end(), 0.0);
      cent.members[c] = 0;
      cent.labeled_members[c] = 0;
    }
    for (std::size_t i = 0; i < n; ++i) {
      int c = assign[i];
      for (std::size_t j = 0; j < m; ++j) cent.feat[c][j] += x[i][j];
      cent.members[c]++;
      if (labeled[i] >= 0) {
        cent.label[c][labeled[i]] += 1.0;
        cent.labeled_members[c]++;
      }
    }
    for (int c = 0; c < k; ++c) {
      if (cent.members[c] > 0)
        for (double& v : cent.feat[c]) v /= static_cast<double>(cent.members[c]);
      if (cent.labeled_members[c] > 0)
        for (double& v : cent.label[c]) v /= static_cast<double>(cent.labeled_members[c]);
    }

    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += point_distance(i, cent, assign[i]);
    if (obj > prev_obj + 1e-9 * (1.0 + std::abs(prev_obj)))
      throw Error(Errc::NonFinite, "objective increased between iterations");
    result.objective_curve.push_back(obj);
    result.iterations = iter + 1;

    bool tol_reached =
        std::isfinite(prev_obj) && std::abs(prev_obj - obj) <= opts.tol * std::max(1.0, std::abs(prev_obj));
    prev_obj = obj;
    if (!changed || tol_reached) {
      result.converged = true;
      break;
    }
  }

  result.partition.labels = std::move(assign);
  result.partition.k = k;
  result.confidence.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    result.confidence[i] = 1.0 - cos_distance(x[i], cent.feat[result.partition.labels[i]]);
  return result;
}

SideInfo read_side_csv(const std::string& path, const Dataset& data) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  SideInfo side;
  std::map<std::string, int> class_index;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("id,", 0) == 0) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 >= line.size())
      throw Error(Errc::ParseError, "side csv line " + std::to_string(lineno) + ": expected id,class");
    std::string id = line.substr(0, comma);
    std::string cls = line.substr(comma + 1);
    auto [it, fresh] = class_index.emplace(cls, static_cast<int>(class_index.size()));
    side.member_rows.push_back(data.position(id));
    side.classes.push_back(it->second);
    (void)fresh;
  }
  side.num_classes = static_cast<int>(class_index.size());
  side.validate(data.size());
  return side;
}

void write_partition_csv(const Dataset& data, const SscResult& result, std::ostream& out) {
  struct Row {
    int cluster;
    double confidence;
    const std::string* id;
  };
  std::vector<Row> rows;
  rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    rows.push_back({result.partition.labels[i], result.confidence[i], &data[i].id});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.cluster != b.cluster) return a.cluster < b.cluster;
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return *a.id < *b.id;
  });
  out << "id,cluster,confidence\n";
  char buf[64];
  for (const Row& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.confidence);
    out << *r.id << ',' << r.cluster << ',' << buf << '\n';
  }
}

}  // namespace kintools
