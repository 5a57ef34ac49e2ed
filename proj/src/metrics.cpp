#include "vlmfair/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "vlmfair/error.hpp"

namespace vlmfair {
namespace {

std::size_t index_of(const std::vector<std::string>& names, const std::string& name,
                     const char* what) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw Error(ErrorCode::kUnknownLabel, std::string(what) + " '" + name + "' is not declared");
  }
  return static_cast<std::size_t>(it - names.begin());
}

void require_distinct(const std::vector<std::string>& names, const char* what) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) {
      throw Error(ErrorCode::kInvalidArgument, std::string("duplicate ") + what + " '" + n + "'");
    }
  }
}

}  // namespace

EoViolations eo_violations(const std::vector<ClassifiedSample>& samples,
                           const std::vector<std::string>& classes,
                           const std::vector<std::string>& groups) {
  if (classes.empty()) throw Error(ErrorCode::kInvalidArgument, "no classes declared");
  if (groups.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two groups");
  require_distinct(classes, "class");
  require_distinct(groups, "group");

  const std::size_t nk = classes.size(), ng = groups.size();
  std::vector<long long> positives(nk * ng, 0), hits(nk * ng, 0);
  for (const auto& s : samples) {
    const std::size_t k = index_of(classes, s.true_class, "class");
    const std::size_t g = index_of(groups, s.group, "group");
    ++positives[k * ng + g];
    if (s.predicted_class == s.true_class) ++hits[k * ng + g];
  }

  EoViolations out;
  const double pairs = 0.5 * static_cast<double>(ng * (ng - 1));
  for (std::size_t k = 0; k < nk; ++k) {
    std::vector<double> tpr(ng);
    for (std::size_t g = 0; g < ng; ++g) {
      const long long n = positives[k * ng + g];
      if (n == 0) {
        throw Error(ErrorCode::kEmptyCell,
                    "no samples with class '" + classes[k] + "' in group '" + groups[g] + "'");
      }
      tpr[g] = static_cast<double>(hits[k * ng + g]) / static_cast<double>(n);
    }
    double largest = 0.0, sum = 0.0;
    for (std::size_t a = 0; a < ng; ++a) {
      for (std::size_t b = a + 1; b < ng; ++b) {
        const double gap = std::abs(tpr[a] - tpr[b]);
        largest = std::max(largest, gap);
        sum += gap;
      }
    }
    out.delta_avg += largest;
    out.delta_max = std::max(out.delta_max, sum / pairs);
  }
  out.delta_avg /= static_cast<double>(nk);
  return out;
}

double max_skew(const std::vector<RetrievalOutcome>& outcomes, int M,
                const std::vector<std::string>& groups) {
  if (M < 1) throw Error(ErrorCode::kInvalidArgument, "M must be >= 1");
  if (outcomes.empty()) throw Error(ErrorCode::kInvalidArgument, "no retrieval outcomes");
  require_distinct(groups, "group");

  double total = 0.0;
  for (const auto& o : outcomes) {
    if (!o.candidate_groups) {
      throw Error(ErrorCode::kMissingLabels, "query '" + o.query_id + "' has no candidate groups");
    }
    const auto& pool = *o.candidate_groups;
    if (static_cast<std::size_t>(M) > pool.size() ||
        static_cast<std::size_t>(M) > o.ranked_ids.size()) {
      throw Error(ErrorCode::kMTooLarge, "M = " + std::to_string(M) + " exceeds the " +
                                             std::to_string(std::min(pool.size(), o.ranked_ids.size())) +
                                             " ranked candidates of query '" + o.query_id + "'");
    }
    std::vector<double> base(groups.size(), 0.0), top(groups.size(), 0.0);
    for (const auto& [id, g] : pool) base[index_of(groups, g, "group")] += 1.0;
    for (int i = 0; i < M; ++i) {
      auto it = pool.find(o.ranked_ids[static_cast<std::size_t>(i)]);
      if (it == pool.end()) {
        throw Error(ErrorCode::kMissingLabels,
                    "ranked id '" + o.ranked_ids[static_cast<std::size_t>(i)] + "' not in candidate pool");
      }
      top[index_of(groups, it->second, "group")] += 1.0;
    }
    double best = -HUGE_VAL;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (base[g] == 0.0) throw Error(ErrorCode::kGroupAbsentFromCandidates, groups[g]);
      if (top[g] == 0.0) continue;
      const double gamma = base[g] / static_cast<double>(pool.size());
      const double gamma_hat = top[g] / static_cast<double>(M);
      best = std::max(best, std::log(gamma_hat / gamma));
    }
    total += best;
  }
  return total / static_cast<double>(outcomes.size());
}

double statistical_parity(const GroupCounts& counts, const std::vector<std::string>& groups) {
  if (groups.empty()) throw Error(ErrorCode::kInvalidArgument, "no groups declared");
  require_distinct(groups, "group");
  if (counts.total <= 0) throw Error(ErrorCode::kEmptyGeneration, counts.prompt_id);
  long long sum = 0;
  for (const auto& [g, c] : counts.counts) {
    index_of(groups, g, "group");
    if (c < 0) throw Error(ErrorCode::kInvalidArgument, "negative count for group '" + g + "'");
    sum += c;
  }
  if (sum != counts.total) {
    throw Error(ErrorCode::kInvalidArgument, "counts of prompt '" + counts.prompt_id + "' sum to " +
                                                 std::to_string(sum) + ", total is " +
                                                 std::to_string(counts.total));
  }
  const double uniform = 1.0 / static_cast<double>(groups.size());
  double acc = 0.0;
  for (const auto& g : groups) {
    auto it = counts.counts.find(g);
    const double share =
        it == counts.counts.end() ? 0.0 : static_cast<double>(it->second) / counts.total;
    acc += (share - uniform) * (share - uniform);
  }
  return std::sqrt(acc);
}

double recall_at_k(const std::vector<RetrievalOutcome>& outcomes, int K) {
  if (K < 1) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  std::size_t queries = 0, found = 0;
  for (const auto& o : outcomes) {
    if (o.relevant_id.empty()) continue;
    ++queries;
    const std::size_t depth = std::min(o.ranked_ids.size(), static_cast<std::size_t>(K));
    const auto end = o.ranked_ids.begin() + static_cast<std::ptrdiff_t>(depth);
    if (std::find(o.ranked_ids.begin(), end, o.relevant_id) != end) ++found;
  }
  if (queries == 0) throw Error(ErrorCode::kInvalidArgument, "no queries carry a relevant id");
  return static_cast<double>(found) / static_cast<double>(queries);
}

F1Report f1_scores(const std::vector<ClassifiedSample>& samples,
                   const std::vector<std::string>& classes) {
  if (classes.empty()) throw Error(ErrorCode::kInvalidArgument, "no classes declared");
  require_distinct(classes, "class");
  std::vector<long long> tp(classes.size(), 0), fp(classes.size(), 0), fn(classes.size(), 0);
  for (const auto& s : samples) {
    const std::size_t t = index_of(classes, s.true_class, "class");
    const std::size_t p = index_of(classes, s.predicted_class, "predicted class");
    if (t == p) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  F1Report out;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const long long denom = 2 * tp[k] + fp[k] + fn[k];
    double f1 = 0.0;
    if (denom == 0) {
      out.undefined.push_back(classes[k]);
    } else {
      f1 = 2.0 * static_cast<double>(tp[k]) / static_cast<double>(denom);
    }
    out.per_class[classes[k]] = f1;
    out.macro_f1 += f1;
  }
  out.macro_f1 /= static_cast<double>(classes.size());
  return out;
}

}  // namespace vlmfair
