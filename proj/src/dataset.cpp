#include "kintools/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kintools/rng.hpp"

namespace kintools {

namespace {

constexpr const char* kRelNames[] = {"BB",   "SS",   "SIBS", "FD",   "FS",   "MD",  "MS",
                                     "GFGD", "GFGS", "GMGD", "GMGS", "SELF", "NONE"};

}  // namespace

const char* rel_name(Rel r) { return kRelNames[static_cast<int>(r)]; }

Rel parse_rel(const std::string& s) {
  for (int i = 0; i <= static_cast<int>(Rel::None); ++i)
    if (s == kRelNames[i]) return static_cast<Rel>(i);
  throw Error(Errc::UnknownRelationshipType, "'" + s + "'");
}

bool is_kin_rel(Rel r) { return r != Rel::Self && r != Rel::None; }

std::vector<SamplePair> generate_positive_pairs(const std::vector<Family>& families,
                                                const std::set<Rel>& types) {
  for (Rel t : types)
    if (!is_kin_rel(t))
      throw Error(Errc::UnknownRelationshipType, std::string("'") + rel_name(t) + "' is not a kin relationship");

  std::vector<SamplePair> pairs;
  for (const auto& fam : families) {
    // Within-subject genuine pairs: all C(N,2) combinations per member.
    for (const auto& [mid, ids] : fam.members) {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
          SamplePair p;
          p.id_a = std::min(ids[i], ids[j]);
          p.id_b = std::max(ids[i], ids[j]);
          if (p.id_a == p.id_b) throw Error(Errc::ParseError, "duplicate face id within member " + mid);
          p.rel = Rel::Self;
          p.label = PairLabel::Kin;
          pairs.push_back(std::move(p));
        }
      }
    }
    // Cross-member kin pairs: full face product per related member pair.
    for (const auto& [mids, rel] : fam.relationships) {
      if (!types.count(rel)) continue;
      auto a = fam.members.find(mids.first);
      auto b = fam.members.find(mids.second);
      if (a == fam.members.end() || b == fam.members.end())
        throw Error(Errc::ParseError, "relationship references unknown member in family " + fam.fid);
      for (const auto& ia : a->second) {
        for (const auto& ib : b->second) {
          SamplePair p;
          p.id_a = std::min(ia, ib);
          p.id_b = std::max(ia, ib);
          p.rel = rel;
          p.label = PairLabel::Kin;
          pairs.push_back(std::move(p));
        }
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const SamplePair& a, const SamplePair& b) {
    return std::tie(a.id_a, a.id_b) < std::tie(b.id_a, b.id_b);
  });
  return pairs;
}

namespace {

void emit_negatives(std::vector<std::pair<std::string, std::string>>& candidates, std::size_t& next,
                    const std::map<Rel, std::size_t>& per_type, int fold,
                    std::vector<SamplePair>& out) {
  for (const auto& [rel, count] : per_type) {
    for (std::size_t c = 0; c < count; ++c, ++next) {
      SamplePair p;
      p.id_a = candidates[next].first;
      p.id_b = candidates[next].second;
      p.rel = rel;
      p.label = PairLabel::NonKin;
      p.fold = fold;
      out.push_back(std::move(p));
    }
  }
}

}  // namespace

std::vector<SamplePair> sample_negative_pairs(const std::vector<SamplePair>& positives,
                                              const std::vector<Family>& universe,
                                              std::uint64_t seed,
                                              const NegativeSamplingOptions& opts) {
  std::map<std::string, std::string> fid_of;
  for (const auto& fam : universe)
    for (const auto& [mid, ids] : fam.members)
      for (const auto& id : ids) fid_of[id] = fam.fid;

  auto subgroup = [&opts](const std::string& id) -> const std::string& {
    auto it = opts.subgroup_of.find(id);
    if (it == opts.subgroup_of.end())
      throw Error(Errc::MissingSubgroup, "id '" + id + "' has no subgroup tag");
    return it->second;
  };

  // Group positives by fold, collecting per-type counts and the id pool.
  std::map<int, std::map<Rel, std::size_t>> needed;
  std::map<int, std::set<std::string>> pool;
  for (const auto& p : positives) {
    needed[p.fold][p.rel]++;
    pool[p.fold].insert(p.id_a);
    pool[p.fold].insert(p.id_b);
  }

  Rng rng(seed);
  std::vector<SamplePair> negatives;
  for (auto& [fold, per_type] : needed) {
    // Enumerate every cross-family candidate pair in this fold, then shuffle.
    std::vector<std::string> ids(pool[fold].begin(), pool[fold].end());
    std::vector<std::pair<std::string, std::string>> same_group, cross_group;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto fa = fid_of.find(ids[i]);
      if (fa == fid_of.end()) throw Error(Errc::ParseError, "id '" + ids[i] + "' not in any family");
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        if (fid_of.at(ids[j]) == fa->second) continue;
        if (opts.cross_subgroup_doubling && subgroup(ids[i]) != subgroup(ids[j]))
          cross_group.emplace_back(ids[i], ids[j]);
        else
          same_group.emplace_back(ids[i], ids[j]);
      }
    }
    std::size_t total = 0;
    for (const auto& [rel, count] : per_type) total += count;
    if (same_group.size() < total || (opts.cross_subgroup_doubling && cross_group.size() < total))
      throw Error(Errc::InsufficientCandidates,
                  "fold " + std::to_string(fold) + " cannot supply " + std::to_string(total) +
                      " negatives");
    rng.shuffle(same_group);
    std::size_t next = 0;
    emit_negatives(same_group, next, per_type, fold, negatives);
    if (opts.cross_subgroup_doubling) {
      rng.shuffle(cross_group);
      next = 0;
      emit_negatives(cross_group, next, per_type, fold, negatives);
    }
  }
  return negatives;
}

std::map<std::string, int> assign_folds(const std::map<std::string, std::size_t>& subject_pair_counts,
                                        int k) {
  if (k < 2) throw Error(Errc::InvalidFoldCount, "need at least 2 folds");
  std::vector<std::pair<std::string, std::size_t>> subjects(subject_pair_counts.begin(),
                                                            subject_pair_counts.end());
  std::sort(subjects.begin(), subjects.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::map<std::string, int> folds;
  for (std::size_t i = 0; i < subjects.size(); ++i)
    folds[subjects[i].first] = static_cast<int>(i % static_cast<std::size_t>(k));
  return folds;
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) throw Error(Errc::EmptyScores, "percentile of an empty list");
  if (percentile <= 0.0 || percentile > 100.0)
    throw Error(Errc::InvalidHyperparameters, "percentile must be in (0, 100]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

PruneResult prune_faces_by_median(const ScoreMatrix& scores, double theta, double percentile) {
  if (scores.rows == 0 || scores.cols == 0) throw Error(Errc::EmptyMatrix, "no scores to prune on");
  PruneResult out;
  for (std::size_t i = 0; i < scores.rows; ++i) {
    if (nearest_rank_percentile(scores.row(i), percentile) >= theta)
      out.kept.push_back(i);
    else
      out.dropped.push_back(i);
  }
  return out;
}

Embedding fuse_track(const std::vector<Embedding>& frames) {
  if (frames.empty()) throw Error(Errc::EmptyTrack, "no frames to fuse");
  std::vector<std::vector<double>> rows;
  rows.reserve(frames.size());
  for (const auto& f : frames) rows.push_back(f.vec);
  Embedding out = frames.front();
  out.vec = mean_pooled_unit(rows);  // ZeroVector on antipodal cancellation
  out.modality = Modality::Track;
  return out;
}

bool track_match_decision(const std::vector<double>& sampled_scores, double theta, double percentile) {
  if (sampled_scores.empty()) throw Error(Errc::EmptyScores, "no per-face scores");
  return nearest_rank_percentile(sampled_scores, percentile) > theta;
}

std::vector<SamplePair> build_benchmark(const std::vector<Family>& families,
                                        const std::set<Rel>& types, int folds, std::uint64_t seed,
                                        const NegativeSamplingOptions& opts) {
  std::vector<SamplePair> positives = generate_positive_pairs(families, types);

  std::map<std::string, std::string> fid_of;
  for (const auto& fam : families)
    for (const auto& [mid, ids] : fam.members)
      for (const auto& id : ids) fid_of[id] = fam.fid;

  std::map<std::string, std::size_t> pair_counts;
  for (const auto& fam : families) pair_counts[fam.fid] = 0;
  for (const auto& p : positives) pair_counts[fid_of.at(p.id_a)]++;

  std::map<std::string, int> fold_of = assign_folds(pair_counts, folds);
  for (auto& p : positives) p.fold = fold_of.at(fid_of.at(p.id_a));

  std::vector<SamplePair> negatives = sample_negative_pairs(positives, families, seed, opts);
  positives.insert(positives.end(), negatives.begin(), negatives.end());
  std::sort(positives.begin(), positives.end(), [](const SamplePair& a, const SamplePair& b) {
    return std::tie(a.fold, a.id_a, a.id_b) < std::tie(b.fold, b.id_a, b.id_b);
  });
  return positives;
}

// --- file formats ---

namespace {

Family parse_family(const nlohmann::json& obj) {
  if (!obj.is_object()) throw Error(Errc::ParseError, "family entry is not an object");
  Family fam;
  fam.fid = obj.at("fid").get<std::string>();
  for (const auto& [mid, ids] : obj.at("members").items()) {
    std::vector<std::string> list;
    for (const auto& id : ids) list.push_back(id.get<std::string>());
    fam.members.emplace(mid, std::move(list));
  }
  if (obj.contains("relationships")) {
    for (const auto& entry : obj.at("relationships")) {
      if (!entry.is_array() || entry.size() != 3)
        throw Error(Errc::ParseError, "relationship entries are [mid, mid, type]");
      Rel rel = parse_rel(entry[2].get<std::string>());
      if (!is_kin_rel(rel))
        throw Error(Errc::UnknownRelationshipType,
                    std::string("'") + rel_name(rel) + "' not allowed in a family relationship");
      fam.relationships[{entry[0].get<std::string>(), entry[1].get<std::string>()}] = rel;
    }
  }
  return fam;
}

}  // namespace

std::vector<Family> read_families_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("family file: ") + e.what());
  }
  std::vector<Family> out;
  try {
    if (doc.is_array())
      for (const auto& entry : doc) out.push_back(parse_family(entry));
    else
      out.push_back(parse_family(doc));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("family file: ") + e.what());
  }
  return out;
}

void write_pairs_csv(const std::vector<SamplePair>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path + "'");
  out << "id_a,id_b,rel,label,fold\n";
  for (const auto& p : pairs) {
    out << p.id_a << ',' << p.id_b << ',' << rel_name(p.rel) << ','
        << (p.label == PairLabel::Kin ? "KIN" : "NONKIN") << ',' << p.fold << '\n';
  }
}

std::vector<SamplePair> read_pairs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  std::vector<SamplePair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("id_a,", 0) == 0) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5)
      throw Error(Errc::ParseError, "pairs csv line " + std::to_string(lineno) + ": expected 5 fields");
    SamplePair p;
    p.id_a = fields[0];
    p.id_b = fields[1];
    p.rel = parse_rel(fields[2]);
    if (fields[3] == "KIN")
      p.label = PairLabel::Kin;
    else if (fields[3] == "NONKIN")
      p.label = PairLabel::NonKin;
    else
      throw Error(Errc::ParseError, "pairs csv line " + std::to_string(lineno) + ": bad label");
    try {
      p.fold = std::stoi(fields[4]);
    } catch (const std::exception&) {
      throw Error(Errc::ParseError, "pairs csv line " + std::to_string(lineno) + ": bad fold");
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace kintools
