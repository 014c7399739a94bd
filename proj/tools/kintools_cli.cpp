// Batch front door: cluster / verify / retrieve / build-pairs / debias.
// Exit codes: 0 success, 2 unreadable or malformed input, 3 invalid
// arguments or configuration, 4 data-contract violation.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kintools/clustering.hpp"
#include "kintools/dataset.hpp"
#include "kintools/debias.hpp"
#include "kintools/eval.hpp"
#include "kintools/fusion.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace kintools;

namespace {

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::IoError:
    case Errc::ParseError:
      return 2;
    case Errc::InvalidK:
    case Errc::InvalidFoldCount:
    case Errc::InvalidHyperparameters:
      return 3;
    default:
      return 4;
  }
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write '" + (dir / name).string() + "'");
  return out;
}

double pair_score(const Dataset& data, const SamplePair& p) {
  double s = cosine_similarity(data.at(p.id_a).vec, data.at(p.id_b).vec);
  return std::clamp(s, -1.0, 1.0);
}

ScoredPairSet score_pairs(const Dataset& data, const std::vector<SamplePair>& pairs,
                          bool want_subgroups) {
  if (pairs.empty()) throw Error(Errc::EmptySet, "pair list is empty");
  ScoredPairSet s;
  bool subgroups_ok = want_subgroups;
  for (const auto& p : pairs) {
    s.scores.push_back(pair_score(data, p));
    s.genuine.push_back(p.label == PairLabel::Kin);
    s.rel.push_back(rel_name(p.rel));
    if (want_subgroups) {
      const auto& ga = data.at(p.id_a).subgroup;
      const auto& gb = data.at(p.id_b).subgroup;
      if (!ga || !gb) {
        subgroups_ok = false;
      } else {
        s.subgroup.push_back(*ga == *gb ? *ga : "cross");
      }
    }
  }
  if (want_subgroups && !subgroups_ok)
    throw Error(Errc::MissingSubgroup, "per-subgroup mode needs subgroup tags on every embedding");
  return s;
}

ordered_json rates_block(const RateCounts& c) {
  return ordered_json{{"tp", c.tp},   {"fp", c.fp},   {"tn", c.tn},       {"fn", c.fn},
                      {"far", c.far}, {"fnr", c.fnr}, {"tar", c.tar},     {"accuracy", c.accuracy}};
}

// --- cluster ---

struct ClusterArgs {
  std::string embeddings, side, out;
  int k = 0;
  double lambda = 1.0;
  std::uint64_t seed = 0;
};

int run_cluster(const ClusterArgs& args) {
  Dataset data = read_jsonl_file(args.embeddings);
  SideInfo side = read_side_csv(args.side, data);
  SscResult result = ssc_kmeans(data, side, args.k, args.lambda, args.seed);

  fs::create_directories(args.out);
  {
    auto out = open_out(args.out, "partition.csv");
    write_partition_csv(data, result, out);
  }
  ordered_json report;
  report["clustering"] = {{"k", args.k},
                          {"lambda", args.lambda},
                          {"seed", args.seed},
                          {"iterations", result.iterations},
                          {"converged", result.converged},
                          {"objective", result.objective_curve.back()}};
  if (!side.empty()) {
    Partition labeled_part, side_part;
    labeled_part.k = result.partition.k;
    side_part.k = side.num_classes;
    for (std::size_t i = 0; i < side.size(); ++i) {
      labeled_part.labels.push_back(result.partition.labels[side.member_rows[i]]);
      side_part.labels.push_back(side.classes[i]);
    }
    report["nmi"] = {{"labeled_rows", side.size()},
                     {"nmi_vs_side_info", nmi(labeled_part, side_part)}};
  }
  auto out = open_out(args.out, "report.json");
  out << report.dump(2) << '\n';
  return 0;
}

// --- verify ---

struct VerifyArgs {
  std::string embeddings, pairs, out;
  std::string mode = "global";
  std::vector<double> targets;
};

int run_verify(const VerifyArgs& args) {
  Dataset data = read_jsonl_file(args.embeddings);
  std::vector<SamplePair> pairs = read_pairs_csv(args.pairs);
  ScoredPairSet scored = score_pairs(data, pairs, args.mode == "per-subgroup");

  fs::create_directories(args.out);
  ordered_json report;

  if (args.mode == "global") {
    auto [theta, acc] = optimal_threshold(scored);
    report["global"] = {{"threshold", theta}, {"accuracy", acc}};
    report["global"]["rates"] = rates_block(rates_at_threshold(scored, theta));
  } else if (args.mode == "per-type") {
    std::map<std::string, ScoredPairSet> by_type;
    for (std::size_t i = 0; i < scored.size(); ++i) {
      ScoredPairSet& t = by_type[scored.rel[i]];
      t.scores.push_back(scored.scores[i]);
      t.genuine.push_back(scored.genuine[i]);
    }
    std::map<std::string, double> thetas;
    for (const auto& [type, subset] : by_type) thetas[type] = optimal_threshold(subset).first;
    TypeAccuracyReport by = verification_accuracy_by_type(scored, thetas);
    ordered_json types;
    for (const auto& [type, acc] : by.accuracy)
      types[type] = {{"threshold", thetas.at(type)}, {"accuracy", acc}, {"pairs", by.support.at(type)}};
    report["per_type"] = types;
    report["per_type_weighted_average"] = by.weighted_average;
  } else if (args.mode == "per-subgroup") {
    std::vector<double> targets = args.targets.empty() ? std::vector<double>{1e-3} : args.targets;
    ordered_json blocks;
    for (double target : targets) {
      ordered_json rows;
      for (const auto& row : subgroup_threshold_report(scored, target)) {
        rows[row.subgroup] = {{"theta_global", row.theta_global},
                              {"far_at_global", row.far_at_global},
                              {"tar_at_global", row.tar_at_global},
                              {"acc_at_global", row.acc_at_global},
                              {"percent_error_global", row.percent_error_global},
                              {"theta_subgroup", row.theta_subgroup},
                              {"far_at_subgroup", row.far_at_subgroup},
                              {"tar_at_subgroup", row.tar_at_subgroup},
                              {"percent_error_subgroup", row.percent_error_subgroup},
                              {"theta_optimal", row.theta_optimal},
                              {"acc_at_optimal", row.acc_at_optimal}};
      }
      char key[64];
      std::snprintf(key, sizeof(key), "%.17g", target);
      blocks[key] = rows;
    }
    report["per_subgroup"] = blocks;
  } else {
    throw Error(Errc::InvalidHyperparameters, "mode must be global, per-type, or per-subgroup");
  }

  if (!args.targets.empty()) {
    ordered_json block = ordered_json::array();
    for (const auto& p : tar_at_far(scored, args.targets))
      block.push_back({{"target_far", p.target}, {"threshold", p.theta}, {"tar", p.tar}});
    report["tar_at_far"] = block;
  }

  {
    auto out = open_out(args.out, "det.csv");
    write_rate_curve_csv(det_curve(scored), out);
  }
  auto out = open_out(args.out, "report.json");
  out << report.dump(2) << '\n';
  return 0;
}

// --- retrieve ---

struct RetrieveArgs {
  std::string embeddings, probes, gallery, out;
  std::string fusion = "score";
  double lambda = 10.0;
};

std::vector<Template> read_subjects_csv(const std::string& path, const Dataset& data) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  std::vector<std::pair<std::string, std::string>> subjects;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line == "fid,mid") continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error(Errc::ParseError, "subject csv line " + std::to_string(lineno) + ": expected fid,mid");
    subjects.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  std::vector<Template> out;
  for (const auto& [fid, mid] : subjects) {
    Template t;
    t.fid = fid;
    t.mid = mid;
    for (const auto& e : data.embeddings())
      if (e.fid == fid && e.mid == mid) t.media.push_back(e);
    if (t.media.empty())
      throw Error(Errc::EmptyTemplate, "subject " + t.subject() + " has no embeddings");
    out.push_back(std::move(t));
  }
  return out;
}

int run_retrieve(const RetrieveArgs& args) {
  Dataset data = read_jsonl_file(args.embeddings);
  std::vector<Template> probes = read_subjects_csv(args.probes, data);
  std::vector<Template> gallery = read_subjects_csv(args.gallery, data);
  if (probes.empty() || gallery.empty())
    throw Error(Errc::InvalidHyperparameters, "probes and gallery must be nonempty");

  auto relevant_for = [&gallery](const Template& probe) {
    std::set<std::string> rel;
    for (const auto& g : gallery)
      if (g.fid == probe.fid) rel.insert(g.subject());
    return rel;
  };

  std::vector<RankedList> lists;
  if (args.fusion == "ta") {
    AdaptedGallery adapted = gallery_adapt(gallery, {}, args.lambda);
    for (const auto& probe : probes) {
      RankedList l = rank_gallery(probe, adapted);
      l.relevant = relevant_for(probe);
      lists.push_back(std::move(l));
    }
  } else if (args.fusion == "score" || args.fusion == "feature") {
    for (const auto& probe : probes) {
      std::vector<std::pair<double, std::string>> scoredsubj;
      for (const auto& g : gallery) {
        double s = args.fusion == "score"
                       ? score_fusion(probe, g)
                       : cosine_similarity(feature_fusion(probe).vec, feature_fusion(g).vec);
        scoredsubj.emplace_back(s, g.subject());
      }
      std::sort(scoredsubj.begin(), scoredsubj.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      RankedList l;
      l.probe = probe.subject();
      for (const auto& [s, subject] : scoredsubj) {
        l.order.push_back(subject);
        l.scores.push_back(s);
      }
      l.relevant = relevant_for(probe);
      lists.push_back(std::move(l));
    }
  } else {
    throw Error(Errc::InvalidHyperparameters, "fusion must be score, feature, or ta");
  }

  fs::create_directories(args.out);
  {
    auto out = open_out(args.out, "ranked.csv");
    out << "probe,rank,gallery_subject,score\n";
    char buf[64];
    for (const auto& l : lists) {
      for (std::size_t r = 0; r < l.order.size(); ++r) {
        std::snprintf(buf, sizeof(buf), "%.17g", l.scores[r]);
        out << l.probe << ',' << (r + 1) << ',' << l.order[r] << ',' << buf << '\n';
      }
    }
  }
  CmcCurve curve = cmc(lists, {1, 5, 10});
  {
    auto out = open_out(args.out, "cmc.csv");
    write_cmc_csv(curve, out);
  }
  ordered_json report;
  report["retrieval"] = {{"fusion", args.fusion},
                         {"probes", lists.size()},
                         {"gallery_size", gallery.size()},
                         {"map", mean_average_precision(lists)}};
  ordered_json ranks;
  for (const auto& [k, v] : curve.at_rank) ranks["rank_" + std::to_string(k)] = v;
  report["cmc"] = ranks;
  auto out = open_out(args.out, "report.json");
  out << report.dump(2) << '\n';
  return 0;
}

// --- build-pairs ---

struct BuildPairsArgs {
  std::string families, out, embeddings;
  std::vector<std::string> types;
  int folds = 5;
  std::uint64_t seed = 0;
  bool cross_subgroup = false;
};

int run_build_pairs(const BuildPairsArgs& args) {
  std::vector<Family> families = read_families_file(args.families);
  std::set<Rel> types;
  if (args.types.empty()) {
    for (int r = 0; r <= static_cast<int>(Rel::GMGS); ++r) types.insert(static_cast<Rel>(r));
  } else {
    for (const auto& t : args.types) types.insert(parse_rel(t));
  }
  NegativeSamplingOptions opts;
  if (args.cross_subgroup) {
    if (args.embeddings.empty())
      throw Error(Errc::InvalidHyperparameters,
                  "--cross-subgroup needs --embeddings to supply subgroup tags");
    Dataset data = read_jsonl_file(args.embeddings);
    opts.cross_subgroup_doubling = true;
    for (const auto& e : data.embeddings())
      if (e.subgroup) opts.subgroup_of[e.id] = *e.subgroup;
  }
  std::vector<SamplePair> pairs = build_benchmark(families, types, args.folds, args.seed, opts);
  fs::create_directories(args.out);
  write_pairs_csv(pairs, (fs::path(args.out) / "pairs.csv").string());
  return 0;
}

// --- debias ---

struct DebiasArgs {
  std::string embeddings, out;
  double lambda = -1.0;
  int epochs = 20;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int folds = 2;
};

int run_debias(const DebiasArgs& args) {
  if (args.lambda < 0.0)
    throw Error(Errc::InvalidHyperparameters, "--lambda must be >= 0");
  Dataset data = read_jsonl_file(args.embeddings);
  if (data.size() == 0) throw Error(Errc::EmptyDataset, "no embeddings");

  std::map<std::string, int> id_classes, att_classes;
  std::vector<LabeledFeature> features;
  for (const auto& e : data.embeddings()) {
    if (!e.fid || !e.mid || !e.subgroup)
      throw Error(Errc::MissingSubgroup,
                  "embedding '" + e.id + "' needs fid, mid, and subgroup tags");
    LabeledFeature f;
    f.x = e.vec;
    std::string subject = *e.fid + "/" + *e.mid;
    f.y_id = id_classes.emplace(subject, static_cast<int>(id_classes.size())).first->second;
    f.y_att = att_classes.emplace(*e.subgroup, static_cast<int>(att_classes.size())).first->second;
    features.push_back(std::move(f));
  }

  DebiasTrainOptions opts;
  opts.lambda = args.lambda;
  opts.epochs = args.epochs;
  opts.lr = args.lr;
  opts.seed = args.seed;
  DebiasTrainResult trained = train_debias(features, opts);

  ProbeOptions probe;
  probe.seed = args.seed;
  std::vector<std::vector<double>> raw, mapped;
  std::vector<int> att_labels;
  for (const auto& f : features) {
    raw.push_back(f.x);
    mapped.push_back(debias_apply(trained.model, f.x));
    att_labels.push_back(f.y_att);
  }
  ProbeResult before = leakage_probe(raw, att_labels, args.folds, probe);
  ProbeResult after = leakage_probe(mapped, att_labels, args.folds, probe);

  fs::create_directories(args.out);
  {
    auto out = open_out(args.out, "checkpoint.json");
    save_checkpoint(trained.model, out);
  }
  ordered_json report;
  report["debias"] = {{"lambda", args.lambda},
                      {"epochs", args.epochs},
                      {"lr", args.lr},
                      {"seed", args.seed},
                      {"identities", id_classes.size()},
                      {"subgroups", att_classes.size()},
                      {"id_loss_per_epoch", trained.id_loss_per_epoch},
                      {"att_loss_per_epoch", trained.att_loss_per_epoch}};
  report["leakage"] = {{"folds", args.folds},
                       {"chance", att_classes.empty() ? 0.0 : 1.0 / att_classes.size()},
                       {"before", before.accuracy},
                       {"after", after.accuracy},
                       {"drop", before.accuracy - after.accuracy}};
  auto out = open_out(args.out, "report.json");
  out << report.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinship recognition toolkit for precomputed face embeddings"};
  app.require_subcommand(1);

  ClusterArgs cluster_args;
  auto* cluster = app.add_subcommand("cluster", "semi-supervised clustering for label proposal");
  cluster->add_option("--embeddings", cluster_args.embeddings, "embeddings JSONL")->required();
  cluster->add_option("--side", cluster_args.side, "side-info CSV (id,class_label)")->required();
  cluster->add_option("--k", cluster_args.k, "cluster count")->required();
  cluster->add_option("--lambda", cluster_args.lambda, "side-info weight (default 1.0)");
  cluster->add_option("--seed", cluster_args.seed, "RNG seed");
  cluster->add_option("--out", cluster_args.out, "output directory")->required();

  VerifyArgs verify_args;
  auto* verify = app.add_subcommand("verify", "pairwise verification metrics");
  verify->add_option("--embeddings", verify_args.embeddings, "embeddings JSONL")->required();
  verify->add_option("--pairs", verify_args.pairs, "pair list CSV")->required();
  verify->add_option("--mode", verify_args.mode, "global | per-type | per-subgroup");
  verify->add_option("--targets", verify_args.targets, "FAR targets")->delimiter(',');
  verify->add_option("--out", verify_args.out, "output directory")->required();

  RetrieveArgs retrieve_args;
  auto* retrieve = app.add_subcommand("retrieve", "template search and retrieval");
  retrieve->add_option("--embeddings", retrieve_args.embeddings, "embeddings JSONL")->required();
  retrieve->add_option("--probes", retrieve_args.probes, "probe subjects CSV (fid,mid)")->required();
  retrieve->add_option("--gallery", retrieve_args.gallery, "gallery subjects CSV (fid,mid)")->required();
  retrieve->add_option("--fusion", retrieve_args.fusion, "score | feature | ta");
  retrieve->add_option("--lambda", retrieve_args.lambda, "TA loss trade-off (default 10)");
  retrieve->add_option("--out", retrieve_args.out, "output directory")->required();

  BuildPairsArgs build_args;
  auto* build = app.add_subcommand("build-pairs", "families to labeled, folded pair lists");
  build->add_option("--families", build_args.families, "family JSON file")->required();
  build->add_option("--types", build_args.types, "relationship types (default: all)")->delimiter(',');
  build->add_option("--folds", build_args.folds, "fold count (default 5)");
  build->add_option("--seed", build_args.seed, "RNG seed");
  build->add_option("--embeddings", build_args.embeddings, "embeddings JSONL (for subgroup tags)");
  build->add_flag("--cross-subgroup", build_args.cross_subgroup,
                  "double negatives with cross-subgroup pairs");
  build->add_option("--out", build_args.out, "output directory")->required();

  DebiasArgs debias_args;
  auto* debias = app.add_subcommand("debias", "adversarial subgroup removal");
  debias->add_option("--embeddings", debias_args.embeddings, "embeddings JSONL with tags")->required();
  debias->add_option("--lambda", debias_args.lambda, "gradient reversal scale")->required();
  debias->add_option("--epochs", debias_args.epochs, "training epochs (default 20)");
  debias->add_option("--lr", debias_args.lr, "learning rate (default 1e-3)");
  debias->add_option("--seed", debias_args.seed, "RNG seed");
  debias->add_option("--folds", debias_args.folds, "probe cross-validation folds (default 2)");
  debias->add_option("--out", debias_args.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  }

  try {
    if (*cluster) return run_cluster(cluster_args);
    if (*verify) return run_verify(verify_args);
    if (*retrieve) return run_retrieve(retrieve_args);
    if (*build) return run_build_pairs(build_args);
    if (*debias) return run_debias(debias_args);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 4;
  }
  return 3;
}
