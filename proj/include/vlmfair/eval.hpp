#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlmfair/embedding.hpp"
#include "vlmfair/geometry.hpp"
#include "vlmfair/metrics.hpp"
#include "vlmfair/solver.hpp"

namespace vlmfair {

enum class DebiasMode { kNone, kTextOnly, kImageOnly, kBoth, kFullProjectionBoth };

std::string_view to_string(DebiasMode mode);
DebiasMode parse_debias_mode(std::string_view s);

// Everything a downstream task needs: raw embeddings, which text embedding is
// the prompt of each class, the attribute subspace and the debias arm.
struct Workspace {
  std::vector<Embedding> image_embeddings;
  std::vector<Embedding> text_embeddings;
  std::map<std::string, std::string> class_prompts;  // class -> text embedding id
  std::optional<AttributeSubspace> subspace;          // required unless mode is kNone
  DebiasMode debias_mode = DebiasMode::kNone;
  SolverOptions solver;
  int threads = 1;
};

/// Applies the workspace's debias arm to one side. Embeddings of the other
/// modality, or every embedding under kNone, pass through as identity results.
std::vector<DebiasResult> apply_debias(const Workspace& ws, const std::vector<Embedding>& embeddings,
                                       Modality side);

/// Zero-shot classification: each labeled image gets the class whose
/// (possibly debiased) prompt has the highest cosine similarity. Exact ties go
/// to the lexicographically smallest class name.
/// Errors: MissingLabels, InvalidArgument (no class prompts), MissingEmbedding.
std::vector<ClassifiedSample> classify_zero_shot(const Workspace& ws);

/// Ranks every image for each query by cosine similarity (ties by candidate
/// id) and keeps the top `depth`. Queries are treated as text. A query's
/// "relevant" label becomes the outcome's relevant id.
/// Errors: EmptyCandidates, MissingLabels (candidate without a group).
std::vector<RetrievalOutcome> retrieve(const Workspace& ws, const std::vector<Embedding>& queries,
                                       int depth);

struct SynthSpec {
  int d = 64;
  int n_groups = 2;
  int n_classes = 2;
  int samples_per_cell = 500;
  double leakage_strength = 0.8;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
};

struct SynthData {
  std::vector<Embedding> images;      // labels: class, group
  std::vector<Embedding> prompts;     // one per class, label: class
  std::vector<Embedding> captions;    // one per image, labels: class, group, relevant
  std::vector<GroupPrototype> prototypes;
  std::vector<std::string> classes;
  std::vector<std::string> groups;
};

/// Deterministic biased dataset with orthonormal planted directions: a neutral
/// direction, one content direction per class, and regular-simplex attribute
/// directions per group. Image = neutral + content + leakage * attribute +
/// noise; the prompt of class k leans towards group k mod n_groups.
/// Errors: DimensionTooSmall (d < n_classes + n_groups), InvalidArgument.
SynthData generate_synthetic(const SynthSpec& spec);

struct MetricSpec {
  bool classify = false;
  bool retrieve = false;
  int M = 0;  // MaxSkew depth; 0 = min(1000, pool size)
  std::vector<int> recall_k = {5, 10};
};

struct SolverStats {
  std::size_t debiased = 0;
  std::size_t fair_already = 0;
  std::size_t pure_attribute = 0;
  double mean_alpha = 0.0;
  double mean_self_utility_loss = 0.0;
  double max_cross_bound = 0.0;
};

struct BoundCheck {
  std::size_t pairs = 0;
  std::size_t self_utility_violations = 0;  // |<u_I,u_T> - <e_I,e_T>| > sqrt(2 l_I) + sqrt(2 l_T)
  std::size_t reported_violations = 0;      // ... > cross_utility_bound of the pair
  double max_cross_change = 0.0;
  bool passed = true;
};

struct ClassificationReport {
  std::size_t samples = 0;
  double accuracy = 0.0;
  EoViolations eo;
  F1Report f1;
};

struct RetrievalReport {
  std::size_t neutral_queries = 0;
  std::size_t matched_queries = 0;
  int M = 0;
  std::optional<double> max_skew;
  std::map<int, double> recall;
};

struct EvalReport {
  nlohmann::json config;
  std::optional<ClassificationReport> classification;
  std::optional<RetrievalReport> retrieval;
  SolverStats solver;
  BoundCheck bounds;

  nlohmann::json to_json() const;
};

/// Runs the requested tasks on `ws` and collects metrics, solver statistics
/// and a pairwise check of the cross-utility bounds. Queries with a
/// "relevant" label feed Recall@K; the rest feed MaxSkew@M.
EvalReport run_report(const Workspace& ws, const std::vector<Embedding>& queries,
                      const MetricSpec& metrics);

}  // namespace vlmfair
