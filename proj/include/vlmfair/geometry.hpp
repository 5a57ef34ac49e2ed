#pragma once

#include <string>
#include <vector>

#include "vlmfair/embedding.hpp"

namespace vlmfair {

struct GroupPrototype {
  std::string group;
  Vector vector;  // unit norm
};

inline constexpr double kDefaultRankTolerance = 1e-10;

// Orthonormal basis of the span of prototype differences p_g - p_ref.
//
// The projector is B * B^T, never A (A^T A)^{-1} A^T: the basis comes out of a
// thin SVD of the raw difference matrix, so near-collinear prototypes only
// lose the directions whose singular value falls under the tolerance.
class AttributeSubspace {
 public:
  /// Validates orthonormality (B^T B = I within 1e-8 entrywise) and the rank
  /// bound; throws InvalidArgument otherwise. Used by file loaders.
  static AttributeSubspace from_basis(Matrix basis, std::vector<std::string> source_groups,
                                      std::string reference_group);

  const Matrix& basis() const { return basis_; }
  Eigen::Index rank() const { return basis_.cols(); }
  Eigen::Index dim() const { return basis_.rows(); }
  const std::vector<std::string>& source_groups() const { return source_groups_; }
  const std::string& reference_group() const { return reference_group_; }

  Vector project_parallel(const Vector& v) const;
  Vector project_orthogonal(const Vector& v) const;

 private:
  AttributeSubspace(Matrix basis, std::vector<std::string> groups, std::string reference)
      : basis_(std::move(basis)),
        source_groups_(std::move(groups)),
        reference_group_(std::move(reference)) {}

  void check_dim(const Vector& v) const;

  Matrix basis_;  // d x r, orthonormal columns
  std::vector<std::string> source_groups_;
  std::string reference_group_;

  friend AttributeSubspace build_subspace(const std::vector<GroupPrototype>&, const std::string&,
                                          double);
};

struct Decomposition {
  Vector parallel;
  Vector orthogonal;
  double norm_parallel = 0.0;
  double norm_orthogonal = 0.0;
};

/// Builds the attribute subspace from n >= 2 unit prototypes. An empty
/// `reference` selects the first prototype. Singular directions with
/// sigma <= rank_tolerance * sigma_max are dropped.
///
/// Errors: InvalidArgument (fewer than two prototypes, non-unit vectors),
/// DuplicateGroup, DimensionMismatch, UnknownReference, DegenerateSubspace
/// (every difference vanishes, i.e. rank 0).
AttributeSubspace build_subspace(const std::vector<GroupPrototype>& prototypes,
                                 const std::string& reference = {},
                                 double rank_tolerance = kDefaultRankTolerance);

Decomposition decompose(const Vector& e, const AttributeSubspace& subspace);

inline Vector project_parallel(const Vector& v, const AttributeSubspace& s) {
  return s.project_parallel(v);
}
inline Vector project_orthogonal(const Vector& v, const AttributeSubspace& s) {
  return s.project_orthogonal(v);
}

}  // namespace vlmfair
