#include <cmath>
#include <sstream>

#include "doctest.h"
#include "kintools/eval.hpp"
#include "oracles.hpp"

using namespace kintools;

namespace {

ScoredPairSet toy_set() {
  ScoredPairSet s;
  s.scores = {0.9, 0.8, 0.1, 0.2};
  s.genuine = {true, true, false, false};
  return s;
}

ScoredPairSet random_set(Rng& rng, std::size_t n) {
  ScoredPairSet s;
  for (std::size_t i = 0; i < n; ++i) {
    s.scores.push_back(rng.uniform(-1.0, 1.0));
    s.genuine.push_back(rng.uniform() < 0.5);
  }
  return s;
}

}  // namespace

TEST_CASE("rates_at_threshold basics") {
  ScoredPairSet s = toy_set();
  RateCounts c = rates_at_threshold(s, 0.5);
  CHECK(c.tar == doctest::Approx(1.0));
  CHECK(c.far == doctest::Approx(0.0));
  CHECK(c.accuracy == doctest::Approx(1.0));

  RateCounts high = rates_at_threshold(s, 0.95);
  CHECK(high.tar == doctest::Approx(0.0));
  CHECK(high.far == doctest::Approx(0.0));

  CHECK_THROWS_AS(rates_at_threshold(ScoredPairSet{}, 0.0), Error);
}

TEST_CASE("rates_at_threshold equals the counting oracle at 50 thresholds") {
  Rng rng(101);
  ScoredPairSet s = random_set(rng, 1000);
  for (int t = 0; t < 50; ++t) {
    double theta = rng.uniform(-1.0, 1.0);
    RateCounts got = rates_at_threshold(s, theta);
    auto want = oracles::rates(s.scores, s.genuine, theta);
    CHECK(got.tp == want.tp);
    CHECK(got.fp == want.fp);
    CHECK(got.tn == want.tn);
    CHECK(got.fn == want.fn);
    CHECK(got.far == want.far);
    CHECK(got.fnr == want.fnr);
    CHECK(got.tar == want.tar);
    CHECK(got.accuracy == want.accuracy);
    CHECK(got.tar == 1.0 - got.fnr);  // exact complement
  }
}

TEST_CASE("optimal_threshold picks the smallest maximizing candidate") {
  auto [theta, acc] = optimal_threshold(toy_set());
  CHECK(theta == doctest::Approx(0.2));
  CHECK(acc == doctest::Approx(1.0));

  SUBCASE("interleaved scores match the exhaustive scan") {
    Rng rng(103);
    for (int trial = 0; trial < 20; ++trial) {
      ScoredPairSet s = random_set(rng, 60);
      auto [got_theta, got_acc] = optimal_threshold(s);
      double best_acc = -1.0, best_theta = 0.0;
      std::vector<double> candidates = s.scores;
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
      for (double theta2 : candidates) {
        double acc2 = oracles::rates(s.scores, s.genuine, theta2).accuracy;
        if (acc2 > best_acc) {
          best_acc = acc2;
          best_theta = theta2;
        }
      }
      CHECK(got_theta == best_theta);
      CHECK(got_acc == best_acc);
      for (double theta2 : candidates)
        CHECK(got_acc >= oracles::rates(s.scores, s.genuine, theta2).accuracy);
    }
  }
  SUBCASE("degenerate labels rejected") {
    ScoredPairSet s;
    s.scores = {0.5, 0.6};
    s.genuine = {true, true};
    CHECK_THROWS_WITH_AS(optimal_threshold(s), doctest::Contains("DegenerateLabels"), Error);
  }
}

TEST_CASE("verification_accuracy_by_type weights by pair count") {
  ScoredPairSet s;
  std::map<std::string, double> thetas{{"FD", 0.5}, {"MS", 0.5}};
  // FD: 10 pairs all correct; MS: 30 pairs, half right
  for (int i = 0; i < 10; ++i) {
    s.scores.push_back(0.9);
    s.genuine.push_back(true);
    s.rel.push_back("FD");
  }
  for (int i = 0; i < 30; ++i) {
    s.scores.push_back(i < 15 ? 0.9 : 0.1);
    s.genuine.push_back(true);
    s.rel.push_back("MS");
  }
  TypeAccuracyReport report = verification_accuracy_by_type(s, thetas);
  CHECK(report.accuracy.at("FD") == doctest::Approx(1.0));
  CHECK(report.accuracy.at("MS") == doctest::Approx(0.5));
  CHECK(report.weighted_average == doctest::Approx(0.625));

  SUBCASE("single type equals its own accuracy") {
    ScoredPairSet one;
    one.scores = {0.9, 0.1};
    one.genuine = {true, false};
    one.rel = {"BB", "BB"};
    TypeAccuracyReport r = verification_accuracy_by_type(one, {{"BB", 0.5}});
    CHECK(r.weighted_average == doctest::Approx(r.accuracy.at("BB")));
  }
  SUBCASE("weighted average equals a global recount over 11 types") {
    Rng rng(107);
    const char* types[] = {"BB", "SS", "SIBS", "FD", "FS", "MD", "MS", "GFGD", "GFGS", "GMGD", "GMGS"};
    ScoredPairSet all;
    std::map<std::string, double> theta_map;
    for (const char* t : types) theta_map[t] = 0.0;
    for (int i = 0; i < 400; ++i) {
      all.scores.push_back(rng.uniform(-1.0, 1.0));
      all.genuine.push_back(rng.uniform() < 0.5);
      all.rel.push_back(types[rng.below(11)]);
    }
    TypeAccuracyReport r = verification_accuracy_by_type(all, theta_map);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < all.size(); ++i)
      if ((all.scores[i] > 0.0) == static_cast<bool>(all.genuine[i])) ++correct;
    CHECK(r.weighted_average == doctest::Approx(double(correct) / double(all.size())).epsilon(1e-12));
  }
  SUBCASE("missing threshold or tag") {
    ScoredPairSet untagged = toy_set();
    CHECK_THROWS_WITH_AS(verification_accuracy_by_type(untagged, thetas),
                         doctest::Contains("MissingType"), Error);
  }
}

TEST_CASE("threshold_for_far") {
  std::vector<double> imposters{0.1, 0.2, 0.3, 0.9};
  CHECK(threshold_for_far(imposters, 0.25) == doctest::Approx(0.3));
  CHECK(threshold_for_far(imposters, 0.999999) == doctest::Approx(0.1));  // accept nearly all

  SUBCASE("agrees with the scan oracle on random sets") {
    Rng rng(109);
    std::vector<double> scores;
    for (int i = 0; i < 500; ++i) scores.push_back(rng.uniform(-1.0, 1.0));
    for (double target : {0.5, 0.2, 0.1, 0.01, 0.003})
      CHECK(threshold_for_far(scores, target) == oracles::threshold_for_far(scores, target));
  }
  CHECK_THROWS_AS(threshold_for_far({}, 0.5), Error);
  CHECK_THROWS_AS(threshold_for_far(imposters, 0.0), Error);
}

TEST_CASE("tar_at_far") {
  ScoredPairSet s;
  s.scores = {0.5, 0.6, 0.95, 0.4, 0.1, 0.2, 0.3, 0.9};
  s.genuine = {true, true, true, true, false, false, false, false};
  auto points = tar_at_far(s, {0.25});
  REQUIRE(points.size() == 1);
  CHECK(points[0].theta == doctest::Approx(0.3));
  CHECK(points[0].tar == doctest::Approx(0.75));

  SUBCASE("a target excluding no genuine gives tar 1") {
    ScoredPairSet sep = toy_set();
    auto p = tar_at_far(sep, {0.5});
    CHECK(p[0].tar == doctest::Approx(1.0));
  }
  SUBCASE("matches the composed oracle on random sets") {
    Rng rng(113);
    ScoredPairSet r = random_set(rng, 400);
    auto points2 = tar_at_far(r, {0.3, 0.1, 0.02});
    std::vector<double> imposters;
    for (std::size_t i = 0; i < r.size(); ++i)
      if (!r.genuine[i]) imposters.push_back(r.scores[i]);
    for (const auto& p : points2) {
      double theta = oracles::threshold_for_far(imposters, p.target);
      CHECK(p.theta == theta);
      CHECK(p.tar == oracles::rates(r.scores, r.genuine, theta).tar);
    }
  }
}

TEST_CASE("det_curve structure and invariants") {
  ScoredPairSet s = toy_set();
  RateCurve curve = det_curve(s);
  REQUIRE(curve.points.size() == 6);  // 4 unique scores + 2 endpoints
  CHECK(std::isinf(curve.points.front().threshold));
  CHECK(std::isinf(curve.points.back().threshold));
  bool hits_origin = false;
  for (const auto& p : curve.points)
    if (p.far == 0.0 && p.fnr == 0.0) hits_origin = true;
  CHECK(hits_origin);  // separable set

  SUBCASE("identical scores collapse to one interior point") {
    ScoredPairSet flat;
    flat.scores = {0.4, 0.4, 0.4};
    flat.genuine = {true, false, true};
    RateCurve c = det_curve(flat);
    CHECK(c.points.size() == 3);
  }
  SUBCASE("monotonicity on random sets") {
    Rng rng(127);
    ScoredPairSet r = random_set(rng, 300);
    RateCurve c = det_curve(r);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].far <= c.points[i - 1].far);
      CHECK(c.points[i].tar <= c.points[i - 1].tar);
      CHECK(c.points[i].tar == 1.0 - c.points[i].fnr);
      CHECK(c.points[i].threshold > c.points[i - 1].threshold);
    }
  }
  SUBCASE("csv emitter") {
    std::stringstream out;
    write_rate_curve_csv(curve, out);
    CHECK(out.str().rfind("threshold,far,fnr,tar\n", 0) == 0);
  }
}

TEST_CASE("percent_error_far") {
  CHECK(percent_error_far(0.001, 0.002) == doctest::Approx(-100.0));
  CHECK(percent_error_far(0.37, 0.37) == doctest::Approx(0.0));
  CHECK(percent_error_far(0.001, 0.0005) == doctest::Approx(50.0));
  CHECK_THROWS_WITH_AS(percent_error_far(0.0, 0.1), doctest::Contains("ZeroReported"), Error);
}

TEST_CASE("subgroup_threshold_report rebalances the achieved FAR") {
  // Two subgroups whose score distributions are shifted by 0.15.
  Rng rng(131);
  ScoredPairSet s;
  auto add_group = [&](const std::string& name, double shift, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      s.scores.push_back(std::clamp(shift + 0.1 * rng.normal(), -1.0, 1.0));
      s.genuine.push_back(false);
      s.subgroup.push_back(name);
      s.scores.push_back(std::clamp(0.5 + shift + 0.1 * rng.normal(), -1.0, 1.0));
      s.genuine.push_back(true);
      s.subgroup.push_back(name);
    }
  };
  add_group("g0", 0.0, 4000);
  add_group("g1", 0.15, 4000);

  double target = 0.01;
  auto rows = subgroup_threshold_report(s, target);
  REQUIRE(rows.size() == 2);
  bool straddle_low = false, straddle_high = false;
  for (const auto& row : rows) {
    if (row.far_at_global < target) straddle_low = true;
    if (row.far_at_global > target) straddle_high = true;
    // per-subgroup threshold is within the sampling granularity of the target
    CHECK(row.far_at_subgroup <= target);
    CHECK(row.far_at_subgroup >= target - 2.0 / 4000.0);
  }
  CHECK(straddle_low);
  CHECK(straddle_high);

  SUBCASE("single subgroup collapses to the global threshold") {
    ScoredPairSet one;
    for (std::size_t i = 0; i < 100; ++i) {
      one.scores.push_back(rng.uniform(-0.2, 0.2));
      one.genuine.push_back(false);
      one.subgroup.push_back("only");
      one.scores.push_back(rng.uniform(0.3, 0.9));
      one.genuine.push_back(true);
      one.subgroup.push_back("only");
    }
    auto r = subgroup_threshold_report(one, 0.05);
    REQUIRE(r.size() == 1);
    CHECK(r[0].theta_subgroup == r[0].theta_global);
    CHECK(r[0].acc_at_optimal >= r[0].acc_at_global);
  }
  SUBCASE("missing subgroup tags rejected") {
    ScoredPairSet untagged = toy_set();
    CHECK_THROWS_WITH_AS(subgroup_threshold_report(untagged, 0.1),
                         doctest::Contains("MissingSubgroup"), Error);
  }
}

TEST_CASE("average_precision") {
  RankedList l;
  l.probe = "p";
  l.order = {"a", "b", "c", "d"};
  l.relevant = {"a", "c"};
  CHECK(average_precision(l) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));

  RankedList top;
  top.order = {"a", "b", "c"};
  top.relevant = {"a", "b"};
  CHECK(average_precision(top) == doctest::Approx(1.0));

  RankedList deep;
  deep.order = {"a", "b", "c", "d", "e"};
  deep.relevant = {"e"};
  CHECK(average_precision(deep) == doctest::Approx(0.2));

  RankedList none;
  none.order = {"a"};
  CHECK_THROWS_WITH_AS(average_precision(none), doctest::Contains("NoRelevant"), Error);

  SUBCASE("score-sorted beats shuffled when relevant items score highest") {
    Rng rng(137);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::string> gallery;
      for (int i = 0; i < 12; ++i) gallery.push_back("g" + std::to_string(i));
      RankedList sorted;
      sorted.order = gallery;  // relevant first
      sorted.relevant = {"g0", "g1", "g2"};
      RankedList shuffled = sorted;
      rng.shuffle(shuffled.order);
      CHECK(average_precision(shuffled) <= average_precision(sorted) + 1e-15);
    }
  }
}

TEST_CASE("mean_average_precision") {
  RankedList a;
  a.order = {"x", "y"};
  a.relevant = {"x"};
  RankedList b;
  b.order = {"x", "y"};
  b.relevant = {"y"};
  CHECK(mean_average_precision({a, b}) == doctest::Approx(0.75));
  CHECK(mean_average_precision({a}) == doctest::Approx(1.0));

  SUBCASE("random lists match the mean of oracle APs") {
    Rng rng(139);
    std::vector<RankedList> lists;
    double sum = 0.0;
    for (int t = 0; t < 20; ++t) {
      RankedList l;
      for (int i = 0; i < 10; ++i) l.order.push_back("g" + std::to_string(i));
      rng.shuffle(l.order);
      for (int i = 0; i < 3; ++i) l.relevant.insert("g" + std::to_string(rng.below(10)));
      sum += oracles::average_precision(l.order, l.relevant);
      lists.push_back(std::move(l));
    }
    CHECK(mean_average_precision(lists) == doctest::Approx(sum / 20.0).epsilon(1e-12));
  }
}

TEST_CASE("cmc") {
  auto list_with_hit = [](std::size_t rank, std::size_t size) {
    RankedList l;
    for (std::size_t i = 0; i < size; ++i) l.order.push_back("g" + std::to_string(i));
    l.relevant = {"g" + std::to_string(rank - 1)};
    return l;
  };
  std::vector<RankedList> lists{list_with_hit(1, 4), list_with_hit(2, 4), list_with_hit(1, 4)};
  CmcCurve curve = cmc(lists, {1, 2});
  CHECK(curve.at_rank.at(1) == doctest::Approx(2.0 / 3.0));
  CHECK(curve.at_rank.at(2) == doctest::Approx(1.0));

  SUBCASE("all hits at rank 1 give a flat curve at 1") {
    std::vector<RankedList> flat{list_with_hit(1, 3), list_with_hit(1, 3)};
    CmcCurve c = cmc(flat, {1});
    for (double v : c.cmc) CHECK(v == doctest::Approx(1.0));
  }
  SUBCASE("random galleries match the brute-force first-hit scan; curve sane") {
    Rng rng(149);
    std::vector<RankedList> random_lists;
    for (int t = 0; t < 25; ++t) {
      RankedList l;
      for (int i = 0; i < 8; ++i) l.order.push_back("g" + std::to_string(i));
      rng.shuffle(l.order);
      l.relevant = {"g" + std::to_string(rng.below(8))};
      random_lists.push_back(std::move(l));
    }
    CmcCurve c = cmc(random_lists, {1, 5});
    for (std::size_t k = 1; k <= 8; ++k) {
      std::size_t count = 0;
      for (const auto& l : random_lists) {
        std::size_t hit = oracles::first_hit_rank(l.order, l.relevant);
        if (hit != 0 && hit <= k) ++count;
      }
      CHECK(c.cmc[k - 1] == doctest::Approx(double(count) / 25.0).epsilon(1e-12));
    }
    for (std::size_t k = 1; k < c.cmc.size(); ++k) CHECK(c.cmc[k] >= c.cmc[k - 1]);
    CHECK(c.cmc.back() == doctest::Approx(1.0));  // closed set

    std::stringstream out;
    write_cmc_csv(c, out);
    CHECK(out.str().rfind("rank,cmc\n", 0) == 0);
  }
}

TEST_CASE("tri_subject_score") {
  auto tpl = [](std::string mid, std::vector<double> v) {
    Template t;
    t.fid = "F";
    t.mid = std::move(mid);
    t.media.push_back({t.mid + "_0", {}, {}, {}, Modality::Still, std::move(v)});
    return t;
  };
  // cos(F,C)=0.4, cos(M,C)=0.6 by construction
  Template child = tpl("c", {1.0, 0.0, 0.0});
  Template father = tpl("f", {0.4, std::sqrt(1.0 - 0.16), 0.0});
  Template mother = tpl("m", {0.6, 0.0, std::sqrt(1.0 - 0.36)});
  CHECK(tri_subject_score(father, mother, child) == doctest::Approx(0.5).epsilon(1e-12));

  Template same = tpl("f2", {1.0, 0.0, 0.0});
  Template ortho = tpl("m2", {0.0, 1.0, 0.0});
  CHECK(tri_subject_score(same, ortho, child) == doctest::Approx(0.5).epsilon(1e-12));

  SUBCASE("random triplet equals the two-cosine oracle") {
    Rng rng(151);
    Template f = tpl("rf", oracles::random_unit(rng, 6));
    Template m = tpl("rm", oracles::random_unit(rng, 6));
    Template c = tpl("rc", oracles::random_unit(rng, 6));
    double want = 0.5 * (oracles::cosine(f.media[0].vec, c.media[0].vec) +
                         oracles::cosine(m.media[0].vec, c.media[0].vec));
    CHECK(tri_subject_score(f, m, c) == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("empty template rejected") {
    Template empty;
    empty.fid = "F";
    empty.mid = "x";
    CHECK_THROWS_WITH_AS(tri_subject_score(empty, mother, child),
                         doctest::Contains("EmptyTemplate"), Error);
  }
}

TEST_CASE("precision_recall_f1") {
  // one positive class: TP=2, FP=1, FN=1
  std::vector<std::vector<std::size_t>> confusion{{5, 1}, {1, 2}};
  PrfReport r = precision_recall_f1(confusion);
  CHECK(r.per_class[1].precision == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[1].recall == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class[1].f1 == doctest::Approx(2.0 / 3.0));

  SUBCASE("perfect classifier") {
    std::vector<std::vector<std::size_t>> perfect{{4, 0}, {0, 6}};
    PrfReport p = precision_recall_f1(perfect);
    CHECK(p.macro_precision == doctest::Approx(1.0));
    CHECK(p.macro_recall == doctest::Approx(1.0));
    CHECK(p.macro_f1 == doctest::Approx(1.0));
  }
  SUBCASE("zero-denominator classes report 0 with a flag") {
    std::vector<std::vector<std::size_t>> degenerate{{0, 4}, {0, 6}};
    PrfReport p = precision_recall_f1(degenerate);
    CHECK(p.per_class[0].degenerate);
    CHECK(p.per_class[0].precision == doctest::Approx(0.0));
  }
  SUBCASE("random 8-class confusion matches the per-cell oracle") {
    Rng rng(157);
    std::vector<std::vector<std::size_t>> m(8, std::vector<std::size_t>(8, 0));
    for (auto& row : m)
      for (auto& cell : row) cell = rng.below(20);
    PrfReport p = precision_recall_f1(m);
    for (std::size_t c = 0; c < 8; ++c) {
      std::size_t tp = m[c][c], col = 0, row = 0;
      for (std::size_t i = 0; i < 8; ++i) {
        col += m[i][c];
        row += m[c][i];
      }
      double prec = col ? double(tp) / double(col) : 0.0;
      double rec = row ? double(tp) / double(row) : 0.0;
      CHECK(p.per_class[c].precision == doctest::Approx(prec).epsilon(1e-12));
      CHECK(p.per_class[c].recall == doctest::Approx(rec).epsilon(1e-12));
    }
  }
}

TEST_CASE("confusion_matrix") {
  std::vector<int> truth{0, 1, 2, 0};
  CHECK(confusion_matrix(truth, truth, 3)[0][0] == 2);
  CHECK(confusion_matrix(truth, truth, 3)[1][2] == 0);

  std::vector<int> one_wrong{0, 1, 1, 0};
  auto m = confusion_matrix(one_wrong, truth, 3);
  CHECK(m[2][1] == 1);
  CHECK(m[2][2] == 0);

  SUBCASE("row sums equal class supports on random labels") {
    Rng rng(163);
    std::vector<int> pred, tr;
    for (int i = 0; i < 200; ++i) {
      pred.push_back(static_cast<int>(rng.below(5)));
      tr.push_back(static_cast<int>(rng.below(5)));
    }
    auto cm = confusion_matrix(pred, tr, 5);
    for (int c = 0; c < 5; ++c) {
      std::size_t row_sum = 0, support = 0;
      for (int j = 0; j < 5; ++j) row_sum += cm[c][j];
      for (int y : tr)
        if (y == c) ++support;
      CHECK(row_sum == support);
    }
  }
}
