#pragma once

#include <string>
#include <vector>

#include "vlmfair/embedding.hpp"
#include "vlmfair/geometry.hpp"

namespace vlmfair {

inline constexpr double kAntipodalEpsilon = 1e-6;

// One group's anchor prompt plus its rephrasings. Texts are carried for
// provenance only; the prototype is computed from the embeddings.
struct PromptVariantSet {
  std::string group;
  std::string anchor_text;
  std::vector<std::string> variant_texts;
  Vector anchor_embedding;
  std::vector<Vector> variant_embeddings;
};

/// Normalized sum of the anchor and all variants; the unit vector maximizing
/// total cosine similarity to them. With no variants this is the anchor.
/// Throws AntipodalCollapse when the sum has norm <= 1e-6.
Vector spherical_mean(const Vector& anchor, const std::vector<Vector>& variants);

/// One prototype per set, in input order. Errors carry the group name.
std::vector<GroupPrototype> build_prototypes(const std::vector<PromptVariantSet>& sets);

// Text-only description of an attribute's groups as read from the variant-set
// JSON; embeddings are attached later by looking texts up by SHA-256 id.
struct VariantSpec {
  struct Group {
    std::string name;
    std::string anchor;
    std::vector<std::string> variants;
  };
  std::string attribute;
  std::vector<Group> groups;
};

/// Attaches embeddings to every text of `spec`, looking each one up by
/// id = sha256_hex(text). Throws MissingEmbedding naming the first absent
/// text, DuplicateGroup for repeated group names.
std::vector<PromptVariantSet> resolve_variant_sets(const VariantSpec& spec,
                                                   const std::vector<Embedding>& embeddings);

}  // namespace vlmfair
