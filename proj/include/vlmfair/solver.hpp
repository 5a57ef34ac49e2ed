#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vlmfair/embedding.hpp"
#include "vlmfair/geometry.hpp"

namespace vlmfair {

// Component norms at or below this take the one-dimensional (no-op) paths.
inline constexpr double kDefaultDegeneracyEpsilon = 1e-6;
// Admissible slack on ||e_par||^2 + ||e_perp||^2 = 1 for the scalar solvers.
inline constexpr double kNormPairTolerance = 1e-6;

struct SolverOptions {
  double eps_deg = kDefaultDegeneracyEpsilon;
};

enum class Degeneracy { kNone, kFairAlready, kPureAttribute };

std::string_view to_string(Degeneracy d);

// Outcome of debiasing one embedding. `u_star` always has unit norm. For the
// degenerate cases it is a copy of the input.
//
// `cross_bound_term` is this embedding's share of the cross-utility bound,
// sqrt(2 * self_utility_loss); at the minimax optimum it coincides with
// sqrt(2 (1 - ||e_perp||) alpha* / ||e_par||).
struct DebiasResult {
  std::string id;
  Vector u_star;
  double alpha_star = 0.0;
  double norm_parallel = 0.0;
  double norm_orthogonal = 0.0;
  double leakage = 0.0;
  double self_utility_loss = 0.0;
  Degeneracy degenerate = Degeneracy::kNone;
  double cross_bound_term = 0.0;
};

// A point of the leakage / self-utility trade-off, parametrized by the weight
// alpha in [0, ||e_par||] given to the attribute direction:
//   u(alpha) = alpha * e_par/||e_par|| + sqrt(1 - alpha^2) * e_perp/||e_perp||
//   L(alpha) = alpha
//   V(alpha) = 1 - alpha ||e_par|| - sqrt(1 - alpha^2) ||e_perp||
// The normalized versions map both objectives onto [0, 1] over that interval.
struct ParetoPoint {
  double alpha = 0.0;
  double leakage = 0.0;
  double self_utility_loss = 0.0;
  double normalized_leakage = 0.0;
  double normalized_loss = 0.0;
};

ParetoPoint pareto_point(double norm_parallel, double norm_orthogonal, double alpha);

/// Minimax (Chebyshev) optimum of the normalized objectives,
///   alpha* = (E - ||e_perp|| sqrt(E^2 - ||e_par||^2)) / (E^2 + ||e_perp||^2),
///   E = ||e_par|| + (1 - ||e_perp||) / ||e_par||,
/// the smaller root of the equalization condition L~ = V~. The radicand is
/// evaluated as (1 - ||e_perp||)((1 - ||e_perp||)/||e_par||^2 + 2), which is
/// nonnegative by construction.
///
/// Throws DegenerateInput when either norm is <= eps_deg or their squares do
/// not sum to one within 1e-6; such inputs belong on the no-op paths.
double closed_form_alpha(double norm_parallel, double norm_orthogonal,
                         double eps_deg = kDefaultDegeneracyEpsilon);

/// Independent numeric route to alpha*: dense grid over [0, ||e_par||] for the
/// minimizer of max(L~, V~), then bisection on L~ - V~ inside the bracketing
/// grid cell until the interval stops shrinking. Needs grid_points >= 1000.
double oracle_alpha(double norm_parallel, double norm_orthogonal, int grid_points = 4096,
                    double eps_deg = kDefaultDegeneracyEpsilon);

/// Debiases one unit embedding against `subspace`.
///
/// ||e_par|| <= eps_deg: already fair, returned unchanged. ||e_perp|| <= eps_deg:
/// pure attribute content, returned unchanged. Otherwise u* is assembled from
/// the closed-form alpha*, with leakage = alpha* and
/// self_utility_loss = (1 - ||e_perp||) alpha* / ||e_par||.
///
/// Errors: DimensionMismatch, NonUnitInput.
DebiasResult debias(const Embedding& e, const AttributeSubspace& subspace,
                    const SolverOptions& options = {});

enum class ExtremeMode {
  kFullProjection,  // alpha = 0: u = e_perp / ||e_perp||
  kIdentity,        // alpha = ||e_par||: u = e
};

/// The two endpoints of the Pareto front, kept as baseline arms. Full
/// projection throws DegenerateInput when ||e_perp|| <= eps_deg.
DebiasResult debias_extreme(const Embedding& e, const AttributeSubspace& subspace,
                            ExtremeMode mode, const SolverOptions& options = {});

/// Upper bound on |<u_I, u_T> - <e_I, e_T>| for an image/text pair debiased
/// independently: the sum of both per-modality terms.
double cross_utility_bound(const DebiasResult& image, const DebiasResult& text);

/// The generic bound sqrt(2 l_I) + sqrt(2 l_T) in terms of self-utility losses.
double self_utility_cross_bound(double self_loss_image, double self_loss_text);

/// Debiases every embedding, optionally on `threads` workers. Output order
/// matches input order and does not depend on the thread count.
std::vector<DebiasResult> debias_batch(const std::vector<Embedding>& embeddings,
                                       const AttributeSubspace& subspace,
                                       const SolverOptions& options = {}, int threads = 1);

}  // namespace vlmfair
