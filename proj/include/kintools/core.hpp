#pragma once

#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "kintools/error.hpp"

namespace kintools {

/// Norms at or below this are treated as zero vectors everywhere.
inline constexpr double kZeroVectorTol = 1e-12;

enum class Modality { Still, Track, Audio };

const char* modality_name(Modality m);
Modality parse_modality(const std::string& s);

/// A single encoded piece of media plus its identity/demographic tags.
/// Vectors are stored as 64-bit floats; 32-bit input is widened on ingestion.
struct Embedding {
  std::string id;
  std::optional<std::string> fid;       // family id
  std::optional<std::string> mid;       // member id within family
  std::optional<std::string> subgroup;  // demographic tag
  Modality modality = Modality::Still;
  std::vector<double> vec;
};

/// Immutable-after-construction collection of embeddings with a shared
/// dimension and unique ids.
class Dataset {
 public:
  Dataset() = default;

  /// Enforces: finite entries, nonempty vector, dimension consistent with
  /// previous rows, id unique.
  void add(Embedding e);

  const std::vector<Embedding>& embeddings() const { return embeddings_; }
  std::size_t size() const { return embeddings_.size(); }
  std::size_t dim() const { return dim_; }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t position(const std::string& id) const;
  const Embedding& at(const std::string& id) const { return embeddings_[position(id)]; }
  const Embedding& operator[](std::size_t i) const { return embeddings_[i]; }

 private:
  std::vector<Embedding> embeddings_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

double l2_norm(std::span<const double> v);

/// Scales v to unit L2 norm. Throws ZeroVector when the norm is <= 1e-12.
std::vector<double> l2_normalize(std::span<const double> v);

/// Exact cosine of the angle between a and b. Throws ZeroVector when either
/// argument has norm <= 1e-12 and DimensionMismatch on unequal lengths.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Arithmetic mean of the rows followed by l2_normalize. Shared by track
/// pooling, template feature fusion, and tri-subject scoring.
std::vector<double> mean_pooled_unit(const std::vector<std::vector<double>>& rows);

/// Reads embeddings from JSON Lines: one object per line with keys
/// id, fid, mid, subgroup, modality, vec. Blank lines are skipped; any
/// malformed row raises ParseError naming the 1-based line number.
Dataset read_jsonl(std::istream& in);
Dataset read_jsonl_file(const std::string& path);

}  // namespace kintools
