#include "kintools/core.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace kintools {

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Still: return "still";
    case Modality::Track: return "track";
    case Modality::Audio: return "audio";
  }
  return "still";
}

Modality parse_modality(const std::string& s) {
  if (s == "still") return Modality::Still;
  if (s == "track") return Modality::Track;
  if (s == "audio") return Modality::Audio;
  throw Error(Errc::ParseError, "unknown modality '" + s + "'");
}

void Dataset::add(Embedding e) {
  if (e.vec.empty()) throw Error(Errc::DimensionMismatch, "embedding '" + e.id + "' has empty vector");
  for (double x : e.vec) {
    if (!std::isfinite(x)) throw Error(Errc::NonFinite, "embedding '" + e.id + "' has non-finite entry");
  }
  if (dim_ == 0) {
    dim_ = e.vec.size();
  } else if (e.vec.size() != dim_) {
    throw Error(Errc::DimensionMismatch, "embedding '" + e.id + "' has dimension " +
                                             std::to_string(e.vec.size()) + ", dataset uses " +
                                             std::to_string(dim_));
  }
  if (index_.count(e.id)) throw Error(Errc::ParseError, "duplicate embedding id '" + e.id + "'");
  index_.emplace(e.id, embeddings_.size());
  embeddings_.push_back(std::move(e));
}

std::size_t Dataset::position(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(Errc::EmptyDataset, "unknown embedding id '" + id + "'");
  return it->second;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> l2_normalize(std::span<const double> v) {
  double n = l2_norm(v);
  if (n <= kZeroVectorTol) throw Error(Errc::ZeroVector, "cannot normalize a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw Error(Errc::DimensionMismatch, "cosine arguments of length " + std::to_string(a.size()) +
                                             " vs " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na <= kZeroVectorTol || nb <= kZeroVectorTol)
    throw Error(Errc::ZeroVector, "cosine of a zero vector");
  return dot / (na * nb);
}

std::vector<double> mean_pooled_unit(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error(Errc::EmptySet, "mean of zero vectors");
  std::size_t d = rows.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw Error(Errc::DimensionMismatch, "mixed dimensions in pooled set");
    for (std::size_t i = 0; i < d; ++i) mean[i] += r[i];
  }
  for (double& x : mean) x /= static_cast<double>(rows.size());
  return l2_normalize(mean);
}

namespace {

std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(Errc::ParseError, std::string("field '") + key + "' must be a string or null");
  return it->get<std::string>();
}

Embedding parse_row(const nlohmann::json& obj) {
  if (!obj.is_object()) throw Error(Errc::ParseError, "row is not a JSON object");
  Embedding e;
  auto id = obj.find("id");
  if (id == obj.end() || !id->is_string()) throw Error(Errc::ParseError, "missing string field 'id'");
  e.id = id->get<std::string>();
  e.fid = optional_string(obj, "fid");
  e.mid = optional_string(obj, "mid");
  e.subgroup = optional_string(obj, "subgroup");
  if (auto m = optional_string(obj, "modality")) e.modality = parse_modality(*m);
  auto vec = obj.find("vec");
  if (vec == obj.end() || !vec->is_array() || vec->empty())
    throw Error(Errc::ParseError, "missing nonempty array field 'vec'");
  e.vec.reserve(vec->size());
  for (const auto& x : *vec) {
    if (!x.is_number()) throw Error(Errc::ParseError, "'vec' entries must be numbers");
    e.vec.push_back(x.get<double>());
  }
  return e;
}

}  // namespace

Dataset read_jsonl(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      ds.add(parse_row(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ds;
}

Dataset read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return read_jsonl(in);
}

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InvalidK: return "InvalidK";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::UnknownRelationshipType: return "UnknownRelationshipType";
    case Errc::InsufficientCandidates: return "InsufficientCandidates";
    case Errc::InvalidFoldCount: return "InvalidFoldCount";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::EmptyTrack: return "EmptyTrack";
    case Errc::EmptyScores: return "EmptyScores";
    case Errc::EmptySet: return "EmptySet";
    case Errc::DegenerateLabels: return "DegenerateLabels";
    case Errc::MissingType: return "MissingType";
    case Errc::UnreachableTarget: return "UnreachableTarget";
    case Errc::ZeroReported: return "ZeroReported";
    case Errc::MissingSubgroup: return "MissingSubgroup";
    case Errc::NoRelevant: return "NoRelevant";
    case Errc::EmptyTemplate: return "EmptyTemplate";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::NonFinite: return "NonFinite";
    case Errc::EmptyNegatives: return "EmptyNegatives";
    case Errc::SingletonGallery: return "SingletonGallery";
    case Errc::InvalidHyperparameters: return "InvalidHyperparameters";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
  }
  return "Error";
}

}  // namespace kintools
