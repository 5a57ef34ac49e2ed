#include "vlmfair/prototypes.hpp"

#include <set>
#include <unordered_map>

#include "vlmfair/error.hpp"
#include "vlmfair/hash.hpp"

namespace vlmfair {

Vector spherical_mean(const Vector& anchor, const std::vector<Vector>& variants) {
  if (!is_unit(anchor)) throw Error(ErrorCode::kNonUnitInput, "anchor embedding is not unit norm");
  Vector sum = anchor;
  for (const auto& v : variants) {
    if (v.size() != anchor.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "variant dimension " + std::to_string(v.size()) +
                                                     " differs from anchor " +
                                                     std::to_string(anchor.size()));
    }
    if (!is_unit(v)) throw Error(ErrorCode::kNonUnitInput, "variant embedding is not unit norm");
    sum += v;
  }
  const double n = sum.norm();
  if (!(n > kAntipodalEpsilon)) {
    throw Error(ErrorCode::kAntipodalCollapse,
                "anchor and variants cancel out (sum norm " + std::to_string(n) + ")");
  }
  return sum / n;
}

std::vector<GroupPrototype> build_prototypes(const std::vector<PromptVariantSet>& sets) {
  std::set<std::string> seen;
  std::vector<GroupPrototype> out;
  out.reserve(sets.size());
  const Eigen::Index d = sets.empty() ? 0 : sets.front().anchor_embedding.size();
  for (const auto& s : sets) {
    if (!seen.insert(s.group).second) throw Error(ErrorCode::kDuplicateGroup, s.group);
    if (s.anchor_embedding.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "group '" + s.group + "' has dimension " +
                                                     std::to_string(s.anchor_embedding.size()) +
                                                     ", expected " + std::to_string(d));
    }
    try {
      out.push_back({s.group, spherical_mean(s.anchor_embedding, s.variant_embeddings)});
    } catch (const Error& e) {
      throw Error(e.code(), "group '" + s.group + "': " + e.what());
    }
  }
  return out;
}

std::vector<PromptVariantSet> resolve_variant_sets(const VariantSpec& spec,
                                                   const std::vector<Embedding>& embeddings) {
  std::unordered_map<std::string, const Embedding*> by_id;
  for (const auto& e : embeddings) by_id.emplace(e.id, &e);

  auto lookup = [&](const std::string& group, const std::string& text) -> const Vector& {
    auto it = by_id.find(sha256_hex(text));
    if (it == by_id.end()) {
      throw Error(ErrorCode::kMissingEmbedding,
                  "group '" + group + "': no embedding for text \"" + text + "\"");
    }
    return it->second->vector;
  };

  std::set<std::string> seen;
  std::vector<PromptVariantSet> sets;
  for (const auto& g : spec.groups) {
    if (!seen.insert(g.name).second) throw Error(ErrorCode::kDuplicateGroup, g.name);
    PromptVariantSet s;
    s.group = g.name;
    s.anchor_text = g.anchor;
    s.variant_texts = g.variants;
    s.anchor_embedding = lookup(g.name, g.anchor);
    for (const auto& v : g.variants) s.variant_embeddings.push_back(lookup(g.name, v));
    sets.push_back(std::move(s));
  }
  return sets;
}

}  // namespace vlmfair
