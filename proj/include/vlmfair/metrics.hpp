#pragma once

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace vlmfair {

struct ClassifiedSample {
  std::string true_class;
  std::string predicted_class;
  std::string group;
};

// Candidate id -> group label of a retrieval pool, shared by every query
// ranked against that pool.
using CandidateGroups = std::unordered_map<std::string, std::string>;

struct RetrievalOutcome {
  std::string query_id;
  std::vector<std::string> ranked_ids;  // most similar first
  std::string relevant_id;              // empty for neutral (fairness-only) queries
  std::shared_ptr<const CandidateGroups> candidate_groups;
};

struct GroupCounts {
  std::string prompt_id;
  std::map<std::string, long long> counts;
  long long total = 0;
};

struct EoViolations {
  double delta_avg = 0.0;  // mean over classes of the largest pairwise TPR gap
  double delta_max = 0.0;  // largest over classes of the mean pairwise TPR gap
};

/// Equal-opportunity violations over the declared classes and groups. Every
/// (class, group) cell needs at least one positive sample (EmptyCell
/// otherwise); labels outside the declared sets raise UnknownLabel. Needs at
/// least two groups.
EoViolations eo_violations(const std::vector<ClassifiedSample>& samples,
                           const std::vector<std::string>& classes,
                           const std::vector<std::string>& groups);

/// MaxSkew@M with the natural logarithm. Per query, group shares among the top
/// M ranked ids are compared with their base rates in the candidate pool;
/// groups absent from the top M never attain the max.
/// Errors: GroupAbsentFromCandidates, MTooLarge, MissingLabels.
double max_skew(const std::vector<RetrievalOutcome>& outcomes, int M,
                const std::vector<std::string>& groups);

/// Euclidean distance of the group distribution from uniform.
/// Errors: EmptyGeneration (total <= 0), UnknownLabel, InvalidArgument.
double statistical_parity(const GroupCounts& counts, const std::vector<std::string>& groups);

/// Fraction of queries with a relevant id whose target is in the top K.
double recall_at_k(const std::vector<RetrievalOutcome>& outcomes, int K);

struct F1Report {
  double macro_f1 = 0.0;
  std::map<std::string, double> per_class;
  std::vector<std::string> undefined;  // 0/0 cells, scored as 0
};

F1Report f1_scores(const std::vector<ClassifiedSample>& samples,
                   const std::vector<std::string>& classes);

}  // namespace vlmfair
