#pragma once

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vlmfair {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Modality { kImage, kText };

std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);

// Well-known label keys. "relevant" names the ground-truth image of a
// retrieval query.
inline constexpr std::string_view kClassLabel = "class";
inline constexpr std::string_view kGroupLabel = "group";
inline constexpr std::string_view kRelevantLabel = "relevant";

using Labels = std::map<std::string, std::string, std::less<>>;

inline constexpr double kUnitTolerance = 1e-9;

struct Embedding {
  std::string id;
  Vector vector;
  Modality modality = Modality::kText;
  Labels labels;

  Eigen::Index dim() const { return vector.size(); }
  std::optional<std::string> label(std::string_view key) const;
};

/// Returns `v / ||v||`, or `v` untouched when its norm already rounds to one
/// (within 4 ulp), so re-normalizing stored unit vectors is bit-stable.
/// Throws ZeroVector when the norm is below 1e-12.
Vector normalized(const Vector& v);

bool is_unit(const Vector& v, double tol = kUnitTolerance);

/// Throws DimensionMismatch unless every embedding has dimension `d` (or the
/// first one's dimension when `d` is empty). Returns the common dimension.
Eigen::Index common_dimension(const std::vector<Embedding>& embeddings,
                              std::optional<Eigen::Index> d = std::nullopt);

}  // namespace vlmfair
