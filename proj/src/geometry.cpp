#include "vlmfair/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <set>

#include "vlmfair/error.hpp"

namespace vlmfair {
namespace {

// Largest singular value at or below this is treated as "all prototypes coincide".
constexpr double kAbsoluteSingularFloor = 1e-12;

}  // namespace

AttributeSubspace AttributeSubspace::from_basis(Matrix basis, std::vector<std::string> source_groups,
                                                std::string reference_group) {
  const Eigen::Index r = basis.cols();
  if (r < 1 || basis.rows() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "subspace basis must be d x r with r >= 1, d >= 2");
  }
  if (r > basis.rows()) throw Error(ErrorCode::kInvalidArgument, "rank exceeds dimension");
  if (!source_groups.empty() && r > static_cast<Eigen::Index>(source_groups.size()) - 1) {
    throw Error(ErrorCode::kInvalidArgument, "rank exceeds n - 1 source groups");
  }
  const Matrix gram = basis.transpose() * basis;
  const double dev = (gram - Matrix::Identity(r, r)).cwiseAbs().maxCoeff();
  if (dev > 1e-8) {
    throw Error(ErrorCode::kInvalidArgument,
                "basis columns are not orthonormal (max |B^T B - I| = " + std::to_string(dev) + ")");
  }
  return AttributeSubspace(std::move(basis), std::move(source_groups), std::move(reference_group));
}

void AttributeSubspace::check_dim(const Vector& v) const {
  if (v.size() != dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "vector has dimension " + std::to_string(v.size()) +
                                                   ", subspace has " + std::to_string(dim()));
  }
}

Vector AttributeSubspace::project_parallel(const Vector& v) const {
  check_dim(v);
  return basis_ * (basis_.transpose() * v);
}

Vector AttributeSubspace::project_orthogonal(const Vector& v) const {
  return v - project_parallel(v);
}

AttributeSubspace build_subspace(const std::vector<GroupPrototype>& prototypes,
                                 const std::string& reference, double rank_tolerance) {
  if (prototypes.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "need at least two group prototypes");
  }
  if (!(rank_tolerance >= 0.0) || rank_tolerance >= 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "rank tolerance must lie in [0, 1)");
  }
  const Eigen::Index d = prototypes.front().vector.size();
  std::set<std::string> seen;
  std::vector<std::string> groups;
  for (const auto& p : prototypes) {
    if (p.vector.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "prototype '" + p.group + "' has dimension " +
                                                     std::to_string(p.vector.size()) + ", expected " +
                                                     std::to_string(d));
    }
    if (!seen.insert(p.group).second) throw Error(ErrorCode::kDuplicateGroup, p.group);
    if (!is_unit(p.vector)) {
      throw Error(ErrorCode::kNonUnitInput, "prototype '" + p.group + "' is not unit norm");
    }
    groups.push_back(p.group);
  }
  if (d < 2) throw Error(ErrorCode::kInvalidArgument, "dimension must be at least 2");

  const std::string ref = reference.empty() ? prototypes.front().group : reference;
  const auto ref_it = std::find_if(prototypes.begin(), prototypes.end(),
                                   [&](const GroupPrototype& p) { return p.group == ref; });
  if (ref_it == prototypes.end()) throw Error(ErrorCode::kUnknownReference, ref);

  Matrix directions(d, static_cast<Eigen::Index>(prototypes.size()) - 1);
  Eigen::Index col = 0;
  for (const auto& p : prototypes) {
    if (&p == &*ref_it) continue;
    directions.col(col++) = p.vector - ref_it->vector;
  }

  Eigen::JacobiSVD<Matrix> svd(directions, Eigen::ComputeThinU);
  const auto& sigma = svd.singularValues();  // descending
  const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
  if (!(sigma_max > kAbsoluteSingularFloor)) {
    throw Error(ErrorCode::kDegenerateSubspace, "all prototypes coincide; attribute subspace is empty");
  }
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > rank_tolerance * sigma_max) ++rank;

  return AttributeSubspace(svd.matrixU().leftCols(rank), std::move(groups), ref);
}

Decomposition decompose(const Vector& e, const AttributeSubspace& subspace) {
  Decomposition out;
  out.parallel = subspace.project_parallel(e);
  out.orthogonal = e - out.parallel;
  out.norm_parallel = out.parallel.norm();
  out.norm_orthogonal = out.orthogonal.norm();
  return out;
}

}  // namespace vlmfair
