#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vlmfair/embedding.hpp"
#include "vlmfair/geometry.hpp"
#include "vlmfair/metrics.hpp"
#include "vlmfair/prototypes.hpp"
#include "vlmfair/solver.hpp"

namespace vlmfair::io {

enum class Dtype { kF32, kF64 };
enum class Container { kJsonl, kEmbf };

std::string_view to_string(Dtype dtype);
Dtype parse_dtype(std::string_view s);

// JSON Lines: one header object {"format_version":1,"d":..,"count":..,"dtype":..}
// followed by one record per line {"id","modality","labels","vector"}. EMBF is
// the little-endian binary equivalent documented in docs/embf.md. Loading
// sniffs the magic, so either container is accepted anywhere.
//
// Vectors are re-normalized on load. Errors: MalformedHeader, MalformedRecord,
// DimensionMismatch, DuplicateId, ZeroVector, Io.
std::vector<Embedding> load_embeddings(const std::filesystem::path& path);

void save_embeddings(const std::filesystem::path& path, const std::vector<Embedding>& embeddings,
                     Dtype dtype = Dtype::kF64, Container container = Container::kJsonl);

// Serialized EMBF bytes, exposed for the format tests.
std::string encode_embf(const std::vector<Embedding>& embeddings, Dtype dtype);
std::vector<Embedding> decode_embf(std::string_view bytes);

/// Shortest-safe fixed format used for every f64 written by hand: %.17g.
std::string format_double(double v);

// Prototype files are embedding files: id = group name, label group = name.
std::vector<GroupPrototype> load_prototypes(const std::filesystem::path& path);
void save_prototypes(const std::filesystem::path& path, const std::vector<GroupPrototype>& protos);

nlohmann::json subspace_to_json(const AttributeSubspace& s);
AttributeSubspace subspace_from_json(const nlohmann::json& j);
AttributeSubspace load_subspace(const std::filesystem::path& path);
void save_subspace(const std::filesystem::path& path, const AttributeSubspace& s);

/// One JSON object per line, fields in a fixed order.
std::string debias_result_line(const DebiasResult& r);
void save_debias_results(const std::filesystem::path& path, const std::vector<DebiasResult>& results);

VariantSpec load_variant_spec(const std::filesystem::path& path);
VariantSpec parse_variant_spec(const nlohmann::json& j);

/// CSV with header "prompt_id,group,count"; rows of one prompt are merged in
/// file order of first appearance.
std::vector<GroupCounts> load_group_counts(const std::filesystem::path& path);
std::vector<GroupCounts> parse_group_counts(std::string_view csv);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

void save_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace vlmfair::io
