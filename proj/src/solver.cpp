#include "vlmfair/solver.hpp"

#include <algorithm>
#include <cmath>

#include "vlmfair/error.hpp"
#include "vlmfair/parallel.hpp"

namespace vlmfair {
namespace {

void check_scalar_domain(double q, double p, double eps_deg) {
  if (!(q > eps_deg) || !(p > eps_deg)) {
    throw Error(ErrorCode::kDegenerateInput,
                "component norms must exceed " + std::to_string(eps_deg) + " (got ||e_par|| = " +
                    std::to_string(q) + ", ||e_perp|| = " + std::to_string(p) + ")");
  }
  if (!(std::abs(q * q + p * p - 1.0) <= kNormPairTolerance)) {
    throw Error(ErrorCode::kDegenerateInput,
                "||e_par||^2 + ||e_perp||^2 deviates from 1 by more than 1e-6");
  }
}

// V(alpha) rewritten as (1 - p) + p * alpha^2 / (1 + sqrt(1 - alpha^2)) - alpha q.
// Same function as 1 - alpha q - sqrt(1 - alpha^2) p, without the cancellation
// when p is close to 1.
double self_utility_loss_at(double q, double p, double alpha) {
  const double c = std::sqrt(std::max(0.0, 1.0 - alpha * alpha));
  return (1.0 - p) + p * (alpha * alpha) / (1.0 + c) - alpha * q;
}

}  // namespace

std::string_view to_string(Degeneracy d) {
  switch (d) {
    case Degeneracy::kNone: return "none";
    case Degeneracy::kFairAlready: return "fair_already";
    case Degeneracy::kPureAttribute: return "pure_attribute";
  }
  return "none";
}

ParetoPoint pareto_point(double q, double p, double alpha) {
  ParetoPoint pt;
  pt.alpha = alpha;
  pt.leakage = alpha;
  pt.self_utility_loss = self_utility_loss_at(q, p, alpha);
  pt.normalized_leakage = alpha / q;
  pt.normalized_loss = pt.self_utility_loss / (1.0 - p);
  return pt;
}

double closed_form_alpha(double q, double p, double eps_deg) {
  check_scalar_domain(q, p, eps_deg);
  const double one_minus_p = 1.0 - p;
  const double e = q + one_minus_p / q;
  double radicand = one_minus_p * (one_minus_p / (q * q) + 2.0);  // E^2 - q^2
  if (radicand < 0.0) {
    if (radicand < -1e-12) {
      throw Error(ErrorCode::kDegenerateInput, "negative discriminant " + std::to_string(radicand));
    }
    radicand = 0.0;
  }
  const double alpha = (e - p * std::sqrt(radicand)) / (e * e + p * p);
  // (C1) 0 < alpha < ||e_par||, (C2) alpha < 1/E.
  if (!(alpha > 0.0 && alpha < q && alpha * e < 1.0)) {
    throw Error(ErrorCode::kInvariantViolation,
                "closed-form alpha " + std::to_string(alpha) + " is infeasible");
  }
  return alpha;
}

double oracle_alpha(double q, double p, int grid_points, double eps_deg) {
  check_scalar_domain(q, p, eps_deg);
  if (grid_points < 1000) throw Error(ErrorCode::kInvalidArgument, "grid_points must be >= 1000");

  const double one_minus_p = 1.0 - p;
  auto gap = [&](double a) {  // L~ - V~, strictly increasing on [0, q]
    return a / q - self_utility_loss_at(q, p, a) / one_minus_p;
  };
  auto worst = [&](double a) {
    return std::max(a / q, self_utility_loss_at(q, p, a) / one_minus_p);
  };

  const int last = grid_points - 1;
  auto node = [&](int i) { return q * static_cast<double>(i) / last; };
  int best = 0;
  double best_val = worst(node(0));
  for (int i = 1; i <= last; ++i) {
    const double v = worst(node(i));
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }

  double lo = node(std::max(0, best - 1));
  double hi = node(std::min(last, best + 1));
  if (!(gap(lo) <= 0.0 && gap(hi) >= 0.0)) {
    lo = 0.0;
    hi = q;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (gap(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

DebiasResult debias(const Embedding& e, const AttributeSubspace& subspace,
                    const SolverOptions& options) {
  if (e.vector.size() != subspace.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding '" + e.id + "' has dimension " +
                                                   std::to_string(e.vector.size()) +
                                                   ", subspace has " +
                                                   std::to_string(subspace.dim()));
  }
  if (!is_unit(e.vector)) throw Error(ErrorCode::kNonUnitInput, "embedding '" + e.id + "'");

  const Decomposition dec = decompose(e.vector, subspace);
  const double q = dec.norm_parallel;
  const double p = dec.norm_orthogonal;

  DebiasResult r;
  r.id = e.id;
  r.norm_parallel = q;
  r.norm_orthogonal = p;

  if (q <= options.eps_deg || p <= options.eps_deg) {
    r.degenerate = q <= options.eps_deg ? Degeneracy::kFairAlready : Degeneracy::kPureAttribute;
    r.u_star = e.vector;
    r.alpha_star = q;
    r.leakage = q;
    return r;
  }

  const double alpha = closed_form_alpha(q, p, options.eps_deg);
  r.alpha_star = alpha;
  r.leakage = alpha;
  r.self_utility_loss = (1.0 - p) * alpha / q;
  r.cross_bound_term = std::sqrt(2.0 * (1.0 - p) * alpha / q);
  r.u_star = std::sqrt(1.0 - alpha * alpha) / p * dec.orthogonal + alpha / q * dec.parallel;
  return r;
}

DebiasResult debias_extreme(const Embedding& e, const AttributeSubspace& subspace, ExtremeMode mode,
                            const SolverOptions& options) {
  if (e.vector.size() != subspace.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding '" + e.id + "'");
  }
  if (!is_unit(e.vector)) throw Error(ErrorCode::kNonUnitInput, "embedding '" + e.id + "'");
  const Decomposition dec = decompose(e.vector, subspace);

  DebiasResult r;
  r.id = e.id;
  r.norm_parallel = dec.norm_parallel;
  r.norm_orthogonal = dec.norm_orthogonal;
  if (mode == ExtremeMode::kIdentity) {
    r.u_star = e.vector;
    r.alpha_star = dec.norm_parallel;
    r.leakage = dec.norm_parallel;
    return r;
  }
  if (dec.norm_orthogonal <= options.eps_deg) {
    throw Error(ErrorCode::kDegenerateInput,
                "embedding '" + e.id + "' lies in the attribute subspace; nothing to project onto");
  }
  r.u_star = dec.orthogonal / dec.norm_orthogonal;
  r.alpha_star = 0.0;
  r.leakage = 0.0;
  r.self_utility_loss = 1.0 - dec.norm_orthogonal;
  r.cross_bound_term = std::sqrt(2.0 * r.self_utility_loss);
  return r;
}

double cross_utility_bound(const DebiasResult& image, const DebiasResult& text) {
  return image.cross_bound_term + text.cross_bound_term;
}

double self_utility_cross_bound(double self_loss_image, double self_loss_text) {
  return std::sqrt(2.0 * std::max(0.0, self_loss_image)) +
         std::sqrt(2.0 * std::max(0.0, self_loss_text));
}

std::vector<DebiasResult> debias_batch(const std::vector<Embedding>& embeddings,
                                       const AttributeSubspace& subspace,
                                       const SolverOptions& options, int threads) {
  std::vector<DebiasResult> out(embeddings.size());
  parallel_for(embeddings.size(), threads,
               [&](std::size_t i) { out[i] = debias(embeddings[i], subspace, options); });
  return out;
}

}  // namespace vlmfair
