#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "kintools/clustering.hpp"
#include "oracles.hpp"

using namespace kintools;

namespace {

Partition make_partition(std::vector<int> labels, int k) { return Partition{std::move(labels), k}; }

// Random hard labeling where every cluster id in [0, k) appears at least once.
std::vector<int> random_labels(Rng& rng, std::size_t n, int k) {
  std::vector<int> labels(n);
  while (true) {
    std::vector<bool> used(k, false);
    for (auto& l : labels) {
      l = static_cast<int>(rng.below(k));
      used[l] = true;
    }
    if (std::all_of(used.begin(), used.end(), [](bool b) { return b; })) return labels;
  }
}

Dataset gaussian_clusters(Rng& rng, std::size_t n_per, int k, std::size_t d, double sigma,
                          std::vector<int>* truth) {
  std::vector<std::vector<double>> centers;
  for (int c = 0; c < k; ++c) centers.push_back(oracles::random_unit(rng, d));
  Dataset ds;
  int id = 0;
  for (int c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n_per; ++i) {
      std::vector<double> v = centers[c];
      for (double& x : v) x += sigma * rng.normal();
      Embedding e;
      e.id = "p" + std::to_string(id++);
      e.vec = oracles::unit(v);
      ds.add(std::move(e));
      truth->push_back(c);
    }
  }
  return ds;
}

// Stratified side info: the first `fraction` share of each class's rows.
SideInfo stratified_side(const std::vector<int>& truth, int k, double fraction) {
  SideInfo side;
  side.num_classes = k;
  std::vector<std::size_t> taken(k, 0), total(k, 0);
  for (int label : truth) total[label]++;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    int c = truth[i];
    if (static_cast<double>(taken[c]) < fraction * static_cast<double>(total[c])) {
      side.member_rows.push_back(i);
      side.classes.push_back(c);
      taken[c]++;
    }
  }
  if (side.member_rows.empty()) side.num_classes = 0;
  return side;
}

}  // namespace

TEST_CASE("category_utility on hand-checkable partitions") {
  // Two balanced clusters of four points, identical partitions.
  auto s = make_partition({0, 0, 0, 0, 1, 1, 1, 1}, 2);
  CHECK(category_utility(s, s) == doctest::Approx(0.5).epsilon(1e-12));

  // Single labeled class: utility collapses to zero for any h.
  auto single = make_partition({0, 0, 0, 0, 0, 0, 0, 0}, 1);
  auto h = make_partition({0, 1, 0, 1, 0, 1, 0, 1}, 2);
  CHECK(category_utility(single, h) == doctest::Approx(0.0));

  CHECK_THROWS_AS(category_utility(s, make_partition({0, 1}, 2)), Error);
}

TEST_CASE("category_utility equals the NCM oracle and stays nonnegative") {
  Rng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t n = 9;
    auto h = random_labels(rng, n, 3);
    auto s = random_labels(rng, n, 2);
    double got = category_utility(make_partition(s, 2), make_partition(h, 3));
    double want = oracles::category_utility(h, 3, s, 2);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
    CHECK(got >= -1e-15);
  }
}

TEST_CASE("utility_as_distance special cases") {
  // All side rows in one class and one cluster: zero residual.
  SideInfo s;
  s.member_rows = {0, 1, 2, 3};
  s.classes = {0, 0, 0, 0};
  s.num_classes = 1;
  CHECK(utility_as_distance(s, make_partition({0, 0, 0, 0}, 1)) == doctest::Approx(0.0));

  // Everything in one cluster: G collapses to the column means, so the
  // residual is the total scatter of S (here 4 rows, 2 classes, split 2/2).
  SideInfo s2;
  s2.member_rows = {0, 1, 2, 3};
  s2.classes = {0, 0, 1, 1};
  s2.num_classes = 2;
  double got = utility_as_distance(s2, make_partition({0, 0, 0, 0}, 1));
  // each row residual: (1-0.5)^2 + (0-0.5)^2 = 0.5; total 2.0; scaled by n'=4
  CHECK(got == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("category_utility differences equal negated Frobenius-term differences") {
  Rng rng(29);
  for (int trial = 0; trial < 80; ++trial) {
    std::size_t n = 4 + rng.below(9);  // n' <= 12
    int k = 2 + static_cast<int>(rng.below(3));
    int kc = 1 + static_cast<int>(rng.below(3));
    if (static_cast<std::size_t>(k) > n || static_cast<std::size_t>(kc) > n) continue;
    auto sv = random_labels(rng, n, kc);
    auto h1 = random_labels(rng, n, k);
    auto h2 = random_labels(rng, n, k);

    double du = category_utility(make_partition(sv, kc), make_partition(h1, k)) -
                category_utility(make_partition(sv, kc), make_partition(h2, k));

    SideInfo side;
    side.num_classes = kc;
    for (std::size_t i = 0; i < n; ++i) {
      side.member_rows.push_back(i);
      side.classes.push_back(sv[i]);
    }
    double f1 = -utility_as_distance(side, make_partition(h1, k));
    double f2 = -utility_as_distance(side, make_partition(h2, k));
    CHECK(du == doctest::Approx(-(f1 - f2)).epsilon(1e-9));

    // and the library Frobenius matches the materialized-matrix oracle
    CHECK(f1 == doctest::Approx(oracles::frobenius_term(h1, k, sv, kc)).epsilon(1e-12));
  }
}

TEST_CASE("nmi basics") {
  CHECK(nmi(make_partition({0, 1, 0, 1}, 2), make_partition({1, 0, 1, 0}, 2)) ==
        doctest::Approx(1.0));
  CHECK(nmi(make_partition({0, 0, 0, 0}, 1), make_partition({0, 1, 2, 0}, 3)) ==
        doctest::Approx(0.0));
  auto a = make_partition({0, 0, 1, 1}, 2);
  auto b = make_partition({0, 1, 1, 1}, 2);
  CHECK(nmi(a, b) == doctest::Approx(oracles::nmi(a.labels, 2, b.labels, 2)).epsilon(1e-12));
  CHECK_THROWS_AS(nmi(a, make_partition({0}, 1)), Error);
}

TEST_CASE("nmi symmetry and relabeling invariance") {
  Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n = 6 + rng.below(20);
    int ka = 2 + static_cast<int>(rng.below(3));
    int kb = 2 + static_cast<int>(rng.below(3));
    auto a = make_partition(random_labels(rng, n, ka), ka);
    auto b = make_partition(random_labels(rng, n, kb), kb);
    CHECK(nmi(a, b) == doctest::Approx(nmi(b, a)).epsilon(1e-12));

    // permute a's ids
    std::vector<int> perm(ka);
    for (int i = 0; i < ka; ++i) perm[i] = i;
    rng.shuffle(perm);
    Partition pa = a;
    for (auto& l : pa.labels) l = perm[l];
    CHECK(nmi(pa, b) == doctest::Approx(nmi(a, b)).epsilon(1e-12));
    CHECK(nmi(a, b) >= 0.0);
    CHECK(nmi(a, b) <= 1.0);
  }
}

namespace {

// Reference spherical K-means mirroring the documented solver contract
// (same init rule, cosine distance, mean centroids, farthest-point repair).
std::vector<int> reference_spherical_kmeans(const Dataset& data, const SideInfo& side, int k,
                                            std::uint64_t seed, int max_iter, double tol) {
  std::size_t n = data.size();
  std::vector<std::vector<double>> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = oracles::unit(data[i].vec);
  auto dist = [](const std::vector<double>& a, const std::vector<double>& c) {
    double nc = oracles::norm(c);
    if (nc <= 1e-12) return 1.0;
    return 1.0 - oracles::dot(a, c) / nc;
  };

  std::vector<std::vector<double>> centers;
  for (int c = 0; c < side.num_classes; ++c) {
    std::vector<double> mean(x[0].size(), 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < side.size(); ++i) {
      if (side.classes[i] == c) {
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += x[side.member_rows[i]][j];
        ++count;
      }
    }
    for (double& v : mean) v /= static_cast<double>(count);
    centers.push_back(std::move(mean));
  }
  Rng rng(seed);
  if (centers.empty()) centers.push_back(x[rng.below(n)]);
  while (static_cast<int>(centers.size()) < k) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) nearest = std::min(nearest, dist(x[i], c));
      if (nearest > best_d) {
        best_d = nearest;
        best = i;
      }
    }
    centers.push_back(x[best]);
  }

  std::vector<int> assign(n, -1);
  double prev = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int arg = 0;
      double best = dist(x[i], centers[0]);
      for (int c = 1; c < k; ++c) {
        double d = dist(x[i], centers[c]);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      if (assign[i] != arg) changed = true;
      assign[i] = arg;
    }
    std::vector<std::size_t> sizes(k, 0);
    for (int a : assign) sizes[a]++;
    for (int c = 0; c < k; ++c) {
      if (sizes[c] > 0) continue;
      std::size_t worst = n;
      double worst_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sizes[assign[i]] <= 1) continue;
        double d = dist(x[i], centers[assign[i]]);
        if (d > worst_d) {
          worst_d = d;
          worst = i;
        }
      }
      if (worst == n) break;
      sizes[assign[worst]]--;
      assign[worst] = c;
      sizes[c] = 1;
      changed = true;
    }
    for (int c = 0; c < k; ++c) std::fill(centers[c].begin(), centers[c].end(), 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < x[i].size(); ++j) centers[assign[i]][j] += x[i][j];
      counts[assign[i]]++;
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (double& v : centers[c]) v /= static_cast<double>(counts[c]);
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) obj += dist(x[i], centers[assign[i]]);
    bool tol_reached = std::isfinite(prev) && std::abs(prev - obj) <= tol * std::max(1.0, std::abs(prev));
    prev = obj;
    if (!changed || tol_reached) break;
  }
  return assign;
}

}  // namespace

TEST_CASE("ssc_kmeans with lambda=0 reduces to plain spherical k-means") {
  Rng rng(37);
  std::vector<int> truth;
  Dataset ds = gaussian_clusters(rng, 30, 3, 8, 0.5, &truth);

  SUBCASE("no side info") {
    SideInfo none;
    SscResult got = ssc_kmeans(ds, none, 3, 0.0, 99);
    auto want = reference_spherical_kmeans(ds, none, 3, 99, 300, 1e-6);
    CHECK(got.partition.labels == want);
  }
  SUBCASE("side info present but ignored by the objective") {
    SideInfo side = stratified_side(truth, 3, 0.2);
    SscResult got = ssc_kmeans(ds, side, 3, 0.0, 99);
    auto want = reference_spherical_kmeans(ds, side, 3, 99, 300, 1e-6);
    CHECK(got.partition.labels == want);
  }
}

TEST_CASE("ssc_kmeans recovers well-separated clusters perfectly") {
  Rng rng(41);
  std::vector<int> truth;
  Dataset ds = gaussian_clusters(rng, 40, 3, 8, 0.04, &truth);  // separation >> 6 sigma
  SideInfo side = stratified_side(truth, 3, 0.1);
  SscResult res = ssc_kmeans(ds, side, 3, 1.0, 7);

  Partition truth_part{truth, 3};
  CHECK(nmi(res.partition, truth_part) == doctest::Approx(1.0).epsilon(1e-12));

  // exhaustive label-matching: every cluster maps to exactly one truth class
  std::map<int, std::set<int>> seen;
  for (std::size_t i = 0; i < truth.size(); ++i) seen[res.partition.labels[i]].insert(truth[i]);
  for (const auto& [cluster, classes] : seen) CHECK(classes.size() == 1);
}

TEST_CASE("side info flips ambiguous splits that plain k-means gets wrong") {
  // Two clusters separated along one axis, with a dominant noise direction
  // orthogonal to it: the unconstrained objective prefers the wrong split.
  std::size_t d = 8, per = 120;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(1000 + seed);
    Dataset ds;
    std::vector<int> truth;
    for (int c = 0; c < 2; ++c) {
      for (std::size_t i = 0; i < per; ++i) {
        std::vector<double> v(d, 0.0);
        v[2] = 1.0;                          // base direction
        v[0] = (c == 0 ? 0.18 : -0.18);      // true separation
        v[1] = 0.9 * rng.normal();           // dominant nuisance direction
        for (std::size_t j = 3; j < d; ++j) v[j] = 0.05 * rng.normal();
        Embedding e;
        e.id = "s" + std::to_string(seed) + "_" + std::to_string(truth.size());
        e.vec = oracles::unit(v);
        ds.add(std::move(e));
        truth.push_back(c);
      }
    }
    SideInfo side = stratified_side(truth, 2, 0.3);
    Partition truth_part{truth, 2};

    SscResult constrained = ssc_kmeans(ds, side, 2, 2.0, seed);
    SscResult unconstrained = ssc_kmeans(ds, side, 2, 0.0, seed);
    double nmi_c = nmi(constrained.partition, truth_part);
    double nmi_u = nmi(unconstrained.partition, truth_part);
    if (nmi_c > nmi_u) ++wins;
  }
  CHECK(wins == 10);
}

TEST_CASE("ssc_kmeans objective is non-increasing and runs are deterministic") {
  Rng rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> truth;
    Dataset ds = gaussian_clusters(rng, 20, 4, 6, 0.6, &truth);
    SideInfo side = stratified_side(truth, 4, 0.25);
    SscResult a = ssc_kmeans(ds, side, 5, 1.5, 11 + trial);
    SscResult b = ssc_kmeans(ds, side, 5, 1.5, 11 + trial);
    CHECK(a.partition.labels == b.partition.labels);
    CHECK(a.objective_curve == b.objective_curve);
    for (std::size_t i = 1; i < a.objective_curve.size(); ++i)
      CHECK(a.objective_curve[i] <= a.objective_curve[i - 1] + 1e-9);
  }
}

TEST_CASE("ssc_kmeans input validation") {
  Dataset ds;
  SideInfo none;
  CHECK_THROWS_AS(ssc_kmeans(ds, none, 2, 1.0, 0), Error);  // empty dataset

  Rng rng(53);
  std::vector<int> truth;
  Dataset small = gaussian_clusters(rng, 4, 2, 4, 0.1, &truth);
  SideInfo side = stratified_side(truth, 2, 0.5);
  CHECK_THROWS_AS(ssc_kmeans(small, side, 1, 1.0, 0), Error);   // K < K'
  CHECK_THROWS_AS(ssc_kmeans(small, side, 99, 1.0, 0), Error);  // K > n
  CHECK_THROWS_AS(ssc_kmeans(small, side, 2, -1.0, 0), Error);  // bad lambda
}

TEST_CASE("side csv and partition csv") {
  Dataset ds;
  ds.add({"a", {}, {}, {}, Modality::Still, {1.0, 0.0}});
  ds.add({"b", {}, {}, {}, Modality::Still, {0.9, 0.1}});
  ds.add({"c", {}, {}, {}, Modality::Still, {0.0, 1.0}});
  ds.add({"d", {}, {}, {}, Modality::Still, {0.1, 0.9}});

  SideInfo side;
  side.member_rows = {0, 2};
  side.classes = {0, 1};
  side.num_classes = 2;
  SscResult res = ssc_kmeans(ds, side, 2, 1.0, 1);
  CHECK(res.partition.labels[0] == res.partition.labels[1]);
  CHECK(res.partition.labels[2] == res.partition.labels[3]);
  CHECK(res.partition.labels[0] != res.partition.labels[2]);

  std::stringstream out;
  write_partition_csv(ds, res, out);
  std::string text = out.str();
  CHECK(text.rfind("id,cluster,confidence\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}
