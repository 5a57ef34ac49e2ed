#include "vlmfair/embedding.hpp"

#include <cmath>
#include <limits>

#include "vlmfair/error.hpp"

namespace vlmfair {

std::string_view to_string(Modality m) {
  return m == Modality::kImage ? "image" : "text";
}

Modality parse_modality(std::string_view s) {
  if (s == "image") return Modality::kImage;
  if (s == "text") return Modality::kText;
  throw Error(ErrorCode::kInvalidArgument, "unknown modality '" + std::string(s) + "'");
}

std::optional<std::string> Embedding::label(std::string_view key) const {
  auto it = labels.find(key);
  if (it == labels.end()) return std::nullopt;
  return it->second;
}

Vector normalized(const Vector& v) {
  const double n = v.norm();
  if (!(n >= 1e-12)) throw Error(ErrorCode::kZeroVector, "vector norm below 1e-12");
  if (std::abs(n - 1.0) <= 4 * std::numeric_limits<double>::epsilon()) return v;
  return v / n;
}

bool is_unit(const Vector& v, double tol) { return std::abs(v.norm() - 1.0) <= tol; }

Eigen::Index common_dimension(const std::vector<Embedding>& embeddings,
                              std::optional<Eigen::Index> d) {
  Eigen::Index dim = d.value_or(embeddings.empty() ? 0 : embeddings.front().dim());
  for (const auto& e : embeddings) {
    if (e.dim() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "embedding '" + e.id + "' has dimension " + std::to_string(e.dim()) +
                      ", expected " + std::to_string(dim));
    }
  }
  return dim;
}

}  // namespace vlmfair
