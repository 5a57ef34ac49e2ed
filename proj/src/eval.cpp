#include "vlmfair/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <unordered_map>

#include "vlmfair/error.hpp"
#include "vlmfair/parallel.hpp"
#include "vlmfair/random.hpp"

namespace vlmfair {
namespace {

constexpr double kContentScale = 0.5;
constexpr double kBoundSlack = 1e-9;

bool debiases(DebiasMode mode, Modality side) {
  switch (mode) {
    case DebiasMode::kNone: return false;
    case DebiasMode::kTextOnly: return side == Modality::kText;
    case DebiasMode::kImageOnly: return side == Modality::kImage;
    case DebiasMode::kBoth:
    case DebiasMode::kFullProjectionBoth: return true;
  }
  return false;
}

DebiasResult passthrough(const Embedding& e) {
  DebiasResult r;
  r.id = e.id;
  r.u_star = e.vector;
  return r;
}

std::string require_label(const Embedding& e, std::string_view key) {
  auto v = e.label(key);
  if (!v) {
    throw Error(ErrorCode::kMissingLabels,
                "embedding '" + e.id + "' has no '" + std::string(key) + "' label");
  }
  return *v;
}

struct RankedCandidate {
  double score;
  const std::string* id;
};

std::vector<RetrievalOutcome> rank_all(const std::vector<Embedding>& candidates,
                                       const std::vector<DebiasResult>& candidate_vecs,
                                       const std::vector<Embedding>& queries,
                                       const std::vector<DebiasResult>& query_vecs, int depth,
                                       int threads) {
  if (candidates.empty()) throw Error(ErrorCode::kEmptyCandidates, "no candidate images");
  auto groups = std::make_shared<CandidateGroups>();
  for (const auto& c : candidates) groups->emplace(c.id, require_label(c, kGroupLabel));

  const std::size_t keep =
      std::min(candidates.size(), static_cast<std::size_t>(std::max(depth, 1)));
  std::vector<RetrievalOutcome> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t q) {
    std::vector<RankedCandidate> ranked(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      ranked[i] = {query_vecs[q].u_star.dot(candidate_vecs[i].u_star), &candidates[i].id};
    }
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                      ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        return *a.id < *b.id;
                      });
    RetrievalOutcome& o = out[q];
    o.query_id = queries[q].id;
    o.relevant_id = queries[q].label(kRelevantLabel).value_or("");
    o.candidate_groups = groups;
    o.ranked_ids.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) o.ranked_ids.push_back(*ranked[i].id);
  });
  return out;
}

std::vector<const Embedding*> class_prompt_embeddings(const Workspace& ws) {
  std::unordered_map<std::string, const Embedding*> texts;
  for (const auto& t : ws.text_embeddings) texts.emplace(t.id, &t);
  std::vector<const Embedding*> out;
  for (const auto& [cls, id] : ws.class_prompts) {
    auto it = texts.find(id);
    if (it == texts.end()) {
      throw Error(ErrorCode::kMissingEmbedding, "class '" + cls + "' prompt '" + id + "'");
    }
    out.push_back(it->second);
  }
  return out;
}

std::vector<ClassifiedSample> classify_prepared(const Workspace& ws,
                                                const std::vector<DebiasResult>& images,
                                                const std::vector<DebiasResult>& prompts) {
  std::vector<std::string> classes;
  for (const auto& [cls, id] : ws.class_prompts) classes.push_back(cls);  // sorted by std::map
  std::vector<ClassifiedSample> out(ws.image_embeddings.size());
  parallel_for(out.size(), ws.threads, [&](std::size_t i) {
    const Embedding& img = ws.image_embeddings[i];
    std::size_t best = 0;
    double best_score = -HUGE_VAL;
    for (std::size_t k = 0; k < prompts.size(); ++k) {
      const double s = images[i].u_star.dot(prompts[k].u_star);
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    out[i] = {require_label(img, kClassLabel), classes[best], require_label(img, kGroupLabel)};
  });
  return out;
}

void check_workspace(const Workspace& ws) {
  if (ws.debias_mode != DebiasMode::kNone && !ws.subspace) {
    throw Error(ErrorCode::kInvalidArgument,
                "debias mode '" + std::string(to_string(ws.debias_mode)) + "' needs a subspace");
  }
}

// Regular simplex vertices in n-1 dimensions (unit norm, centered), via the
// Helmert basis of the sum-zero hyperplane.
Matrix simplex_vertices(int n) {
  Matrix v = Matrix::Zero(n - 1, n);
  for (int j = 1; j < n; ++j) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1));
    for (int g = 0; g < j; ++g) v(j - 1, g) = scale;
    v(j - 1, j) = -static_cast<double>(j) * scale;
  }
  for (int g = 0; g < n; ++g) v.col(g).normalize();
  return v;
}

std::string cell_id(const char* prefix, int k, int g, int i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-c%d-g%d-%05d", prefix, k, g, i);
  return buf;
}

}  // namespace

std::string_view to_string(DebiasMode mode) {
  switch (mode) {
    case DebiasMode::kNone: return "none";
    case DebiasMode::kTextOnly: return "text_only";
    case DebiasMode::kImageOnly: return "image_only";
    case DebiasMode::kBoth: return "both";
    case DebiasMode::kFullProjectionBoth: return "full_projection_both";
  }
  return "none";
}

DebiasMode parse_debias_mode(std::string_view s) {
  for (auto m : {DebiasMode::kNone, DebiasMode::kTextOnly, DebiasMode::kImageOnly,
                 DebiasMode::kBoth, DebiasMode::kFullProjectionBoth}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown debias mode '" + std::string(s) + "'");
}

std::vector<DebiasResult> apply_debias(const Workspace& ws, const std::vector<Embedding>& embeddings,
                                       Modality side) {
  check_workspace(ws);
  std::vector<DebiasResult> out(embeddings.size());
  const bool active = debiases(ws.debias_mode, side);
  parallel_for(embeddings.size(), ws.threads, [&](std::size_t i) {
    const Embedding& e = embeddings[i];
    if (!active) {
      out[i] = ws.subspace ? debias_extreme(e, *ws.subspace, ExtremeMode::kIdentity, ws.solver)
                           : passthrough(e);
    } else if (ws.debias_mode == DebiasMode::kFullProjectionBoth) {
      out[i] = debias_extreme(e, *ws.subspace, ExtremeMode::kFullProjection, ws.solver);
    } else {
      out[i] = debias(e, *ws.subspace, ws.solver);
    }
  });
  return out;
}

std::vector<ClassifiedSample> classify_zero_shot(const Workspace& ws) {
  if (ws.class_prompts.empty()) throw Error(ErrorCode::kInvalidArgument, "no class prompts");
  std::vector<Embedding> prompts;
  for (const Embedding* e : class_prompt_embeddings(ws)) prompts.push_back(*e);
  return classify_prepared(ws, apply_debias(ws, ws.image_embeddings, Modality::kImage),
                           apply_debias(ws, prompts, Modality::kText));
}

std::vector<RetrievalOutcome> retrieve(const Workspace& ws, const std::vector<Embedding>& queries,
                                       int depth) {
  return rank_all(ws.image_embeddings, apply_debias(ws, ws.image_embeddings, Modality::kImage),
                  queries, apply_debias(ws, queries, Modality::kText), depth, ws.threads);
}

SynthData generate_synthetic(const SynthSpec& spec) {
  if (spec.n_groups < 2) throw Error(ErrorCode::kInvalidArgument, "n_groups must be >= 2");
  if (spec.n_classes < 1) throw Error(ErrorCode::kInvalidArgument, "n_classes must be >= 1");
  if (spec.samples_per_cell < 1) {
    throw Error(ErrorCode::kInvalidArgument, "samples_per_cell must be >= 1");
  }
  if (!(spec.leakage_strength >= 0.0 && spec.leakage_strength < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "leakage_strength must lie in [0, 1)");
  }
  if (!(spec.noise_sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_sigma < 0");
  if (spec.d < 2 || spec.d < spec.n_classes + spec.n_groups) {
    throw Error(ErrorCode::kDimensionTooSmall,
                "d = " + std::to_string(spec.d) + " < n_classes + n_groups = " +
                    std::to_string(spec.n_classes + spec.n_groups));
  }

  Rng rng(spec.seed);
  const int K = spec.n_classes, G = spec.n_groups, d = spec.d;

  // Columns: neutral | content_0..K-1 | attribute basis (G-1).
  Matrix gauss(d, K + G);
  for (Eigen::Index c = 0; c < gauss.cols(); ++c) {
    for (Eigen::Index r = 0; r < d; ++r) gauss(r, c) = rng.normal();
  }
  const Matrix frame = Eigen::HouseholderQR<Matrix>(gauss).householderQ() * Matrix::Identity(d, K + G);
  const Vector neutral = frame.col(0);
  const Matrix attribute = frame.rightCols(G - 1) * simplex_vertices(G);  // d x G, unit columns
  auto content = [&](int k) { return frame.col(1 + k); };

  SynthData data;
  for (int k = 0; k < K; ++k) data.classes.push_back("class_" + std::to_string(k));
  for (int g = 0; g < G; ++g) data.groups.push_back("group_" + std::to_string(g));

  const double s = spec.leakage_strength;
  for (int k = 0; k < K; ++k) {
    for (int g = 0; g < G; ++g) {
      for (int i = 0; i < spec.samples_per_cell; ++i) {
        const double leak = rng.uniform(0.0, 2.0);
        const double relevance = rng.uniform(0.5, 1.5);
        Vector raw = neutral + relevance * kContentScale * content(k) + leak * s * attribute.col(g);
        for (Eigen::Index r = 0; r < d; ++r) raw(r) += spec.noise_sigma * rng.normal();
        Vector caption = raw;
        for (Eigen::Index r = 0; r < d; ++r) caption(r) += 2.0 * spec.noise_sigma * rng.normal();

        Embedding img{cell_id("img", k, g, i), raw.normalized(), Modality::kImage,
                      {{"class", data.classes[k]}, {"group", data.groups[g]}}};
        Embedding cap{cell_id("cap", k, g, i), caption.normalized(), Modality::kText,
                      {{"class", data.classes[k]}, {"group", data.groups[g]}, {"relevant", img.id}}};
        data.images.push_back(std::move(img));
        data.captions.push_back(std::move(cap));
      }
    }
  }
  for (int k = 0; k < K; ++k) {
    const Vector v = neutral + kContentScale * content(k) + s * attribute.col(k % G);
    data.prompts.push_back({"prompt-" + data.classes[k], v.normalized(), Modality::kText,
                            {{"class", data.classes[k]}}});
  }
  for (int g = 0; g < G; ++g) {
    data.prototypes.push_back({data.groups[g], (neutral + attribute.col(g)).normalized()});
  }
  return data;
}

EvalReport run_report(const Workspace& ws, const std::vector<Embedding>& queries,
                      const MetricSpec& metrics) {
  check_workspace(ws);
  EvalReport report;
  auto& cfg = report.config;
  cfg["debias_mode"] = to_string(ws.debias_mode);
  cfg["eps_deg"] = ws.solver.eps_deg;
  cfg["images"] = ws.image_embeddings.size();
  cfg["texts"] = ws.text_embeddings.size();
  cfg["queries"] = queries.size();
  cfg["class_prompts"] = ws.class_prompts;
  cfg["max_skew_log_base"] = "e";
  cfg["tasks"] = nlohmann::json::array();
  if (metrics.classify) cfg["tasks"].push_back("classify");
  if (metrics.retrieve) cfg["tasks"].push_back("retrieve");
  if (ws.subspace) {
    cfg["subspace"] = {{"d", ws.subspace->dim()},
                       {"rank", ws.subspace->rank()},
                       {"reference_group", ws.subspace->reference_group()},
                       {"source_groups", ws.subspace->source_groups()}};
  }
  if (!metrics.classify && !metrics.retrieve) return report;

  const auto image_res = apply_debias(ws, ws.image_embeddings, Modality::kImage);
  std::vector<const DebiasResult*> all_results;
  for (const auto& r : image_res) all_results.push_back(&r);

  struct Pair {
    const Embedding* image;
    const DebiasResult* image_res;
    const Embedding* text;
    const DebiasResult* text_res;
  };
  std::vector<Pair> pairs;

  std::vector<Embedding> prompts;
  std::vector<DebiasResult> prompt_res;
  if (metrics.classify) {
    if (ws.class_prompts.empty()) throw Error(ErrorCode::kInvalidArgument, "no class prompts");
    for (const Embedding* e : class_prompt_embeddings(ws)) prompts.push_back(*e);
    prompt_res = apply_debias(ws, prompts, Modality::kText);
    const auto samples = classify_prepared(ws, image_res, prompt_res);

    std::vector<std::string> classes;
    for (const auto& [cls, id] : ws.class_prompts) classes.push_back(cls);
    std::set<std::string> group_set;
    std::size_t correct = 0;
    for (const auto& s : samples) {
      group_set.insert(s.group);
      if (s.true_class == s.predicted_class) ++correct;
    }
    ClassificationReport c;
    c.samples = samples.size();
    c.accuracy = samples.empty() ? 0.0 : static_cast<double>(correct) / samples.size();
    c.eo = eo_violations(samples, classes, {group_set.begin(), group_set.end()});
    c.f1 = f1_scores(samples, classes);
    report.classification = std::move(c);

    for (std::size_t i = 0; i < ws.image_embeddings.size(); ++i) {
      for (std::size_t k = 0; k < prompts.size(); ++k) {
        pairs.push_back({&ws.image_embeddings[i], &image_res[i], &prompts[k], &prompt_res[k]});
      }
    }
  }

  std::vector<Embedding> neutral, matched;
  std::vector<DebiasResult> matched_res;
  std::vector<DebiasResult> neutral_res;
  if (metrics.retrieve) {
    for (const auto& q : queries) (q.label(kRelevantLabel) ? matched : neutral).push_back(q);
    RetrievalReport rr;
    rr.neutral_queries = neutral.size();
    rr.matched_queries = matched.size();
    rr.M = metrics.M > 0 ? metrics.M
                         : static_cast<int>(std::min<std::size_t>(1000, ws.image_embeddings.size()));
    std::set<std::string> group_set;
    for (const auto& img : ws.image_embeddings) group_set.insert(require_label(img, kGroupLabel));
    const std::vector<std::string> groups(group_set.begin(), group_set.end());

    neutral_res = apply_debias(ws, neutral, Modality::kText);
    if (!neutral.empty()) {
      const auto outcomes = rank_all(ws.image_embeddings, image_res, neutral, neutral_res, rr.M,
                                     ws.threads);
      rr.max_skew = max_skew(outcomes, rr.M, groups);
    }
    matched_res = apply_debias(ws, matched, Modality::kText);
    if (!matched.empty() && !metrics.recall_k.empty()) {
      const int depth = *std::max_element(metrics.recall_k.begin(), metrics.recall_k.end());
      const auto outcomes =
          rank_all(ws.image_embeddings, image_res, matched, matched_res, depth, ws.threads);
      for (int k : metrics.recall_k) rr.recall[k] = recall_at_k(outcomes, k);

      std::unordered_map<std::string, std::size_t> image_index;
      for (std::size_t i = 0; i < ws.image_embeddings.size(); ++i) {
        image_index.emplace(ws.image_embeddings[i].id, i);
      }
      for (std::size_t q = 0; q < matched.size(); ++q) {
        auto it = image_index.find(*matched[q].label(kRelevantLabel));
        if (it == image_index.end()) continue;
        pairs.push_back({&ws.image_embeddings[it->second], &image_res[it->second], &matched[q],
                         &matched_res[q]});
      }
    }
    report.retrieval = std::move(rr);
  }
  for (const auto* group : {&prompt_res, &neutral_res, &matched_res}) {
    for (const auto& r : *group) all_results.push_back(&r);
  }

  if (ws.debias_mode != DebiasMode::kNone) {
    SolverStats& st = report.solver;
    const bool image_side = debiases(ws.debias_mode, Modality::kImage);
    const bool text_side = debiases(ws.debias_mode, Modality::kText);
    std::size_t solved = 0;
    for (std::size_t i = 0; i < all_results.size(); ++i) {
      const bool is_image = i < image_res.size();
      if ((is_image && !image_side) || (!is_image && !text_side)) continue;
      const DebiasResult& r = *all_results[i];
      ++st.debiased;
      if (r.degenerate == Degeneracy::kFairAlready) {
        ++st.fair_already;
      } else if (r.degenerate == Degeneracy::kPureAttribute) {
        ++st.pure_attribute;
      } else {
        ++solved;
        st.mean_alpha += r.alpha_star;
        st.mean_self_utility_loss += r.self_utility_loss;
      }
    }
    if (solved > 0) {
      st.mean_alpha /= static_cast<double>(solved);
      st.mean_self_utility_loss /= static_cast<double>(solved);
    }
  }

  BoundCheck& bc = report.bounds;
  bc.pairs = pairs.size();
  for (const auto& p : pairs) {
    const double change = std::abs(p.image_res->u_star.dot(p.text_res->u_star) -
                                   p.image->vector.dot(p.text->vector));
    const double loss_i = 1.0 - p.image_res->u_star.dot(p.image->vector);
    const double loss_t = 1.0 - p.text_res->u_star.dot(p.text->vector);
    const double reported = cross_utility_bound(*p.image_res, *p.text_res);
    bc.max_cross_change = std::max(bc.max_cross_change, change);
    report.solver.max_cross_bound = std::max(report.solver.max_cross_bound, reported);
    if (change > self_utility_cross_bound(loss_i, loss_t) + kBoundSlack) ++bc.self_utility_violations;
    if (change > reported + kBoundSlack) ++bc.reported_violations;
  }
  bc.passed = bc.self_utility_violations == 0 && bc.reported_violations == 0;
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["config"] = config;
  if (classification) {
    const auto& c = *classification;
    j["classification"] = {{"samples", c.samples},
                           {"accuracy", c.accuracy},
                           {"delta_eo_avg", c.eo.delta_avg},
                           {"delta_eo_max", c.eo.delta_max},
                           {"macro_f1", c.f1.macro_f1},
                           {"per_class_f1", c.f1.per_class},
                           {"f1_undefined_classes", c.f1.undefined}};
  }
  if (retrieval) {
    const auto& r = *retrieval;
    nlohmann::json recall = nlohmann::json::object();
    for (const auto& [k, v] : r.recall) recall[std::to_string(k)] = v;
    j["retrieval"] = {{"neutral_queries", r.neutral_queries},
                      {"matched_queries", r.matched_queries},
                      {"M", r.M},
                      {"max_skew_at_m", r.max_skew ? nlohmann::json(*r.max_skew) : nlohmann::json()},
                      {"recall_at_k", recall}};
  }
  j["solver"] = {{"debiased", solver.debiased},
                 {"fair_already", solver.fair_already},
                 {"pure_attribute", solver.pure_attribute},
                 {"mean_alpha", solver.mean_alpha},
                 {"mean_self_utility_loss", solver.mean_self_utility_loss},
                 {"max_cross_bound", solver.max_cross_bound}};
  j["bounds"] = {{"pairs", bounds.pairs},
                 {"self_utility_violations", bounds.self_utility_violations},
                 {"reported_violations", bounds.reported_violations},
                 {"max_cross_change", bounds.max_cross_change},
                 {"passed", bounds.passed}};
  return j;
}

}  // namespace vlmfair
