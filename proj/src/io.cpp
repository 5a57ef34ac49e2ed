#include "vlmfair/io.hpp"

#include <bit>
#include <cstdint>
#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_set>

#include "vlmfair/error.hpp"

namespace vlmfair::io {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr char kMagic[4] = {'E', 'M', 'B', 'F'};
constexpr std::uint32_t kFormatVersion = 1;

std::string json_string(std::string_view s) { return json(std::string(s)).dump(); }

std::string labels_json(const Labels& labels) {
  json j = json::object();
  for (const auto& [k, v] : labels) j[k] = v;
  return j.dump();
}

std::string format_value(double v, Dtype dtype) {
  if (dtype == Dtype::kF64) return format_double(v);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(v)));
  return buf;
}

double quantize(double v, Dtype dtype) {
  return dtype == Dtype::kF32 ? static_cast<double>(static_cast<float>(v)) : v;
}

// Shared post-processing of both containers: unique ids, dimension, normalization.
void finalize(std::vector<Embedding>& out, Eigen::Index d) {
  std::unordered_set<std::string> ids;
  for (auto& e : out) {
    if (e.vector.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch, "record '" + e.id + "' has " +
                                                     std::to_string(e.vector.size()) +
                                                     " values, header says d = " + std::to_string(d));
    }
    if (!ids.insert(e.id).second) throw Error(ErrorCode::kDuplicateId, e.id);
    try {
      e.vector = normalized(e.vector);
    } catch (const Error&) {
      throw Error(ErrorCode::kZeroVector, "record '" + e.id + "' has norm below 1e-12");
    }
  }
}

Labels parse_labels(const json& j, const std::string& id) {
  Labels labels;
  if (j.is_null()) return labels;
  if (!j.is_object()) throw Error(ErrorCode::kMalformedRecord, "labels of '" + id + "' not an object");
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) {
      throw Error(ErrorCode::kMalformedRecord, "label '" + k + "' of '" + id + "' is not a string");
    }
    labels.emplace(k, v.get<std::string>());
  }
  return labels;
}

std::vector<Embedding> parse_jsonl(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  Eigen::Index d = 0;
  std::size_t count = 0;
  Dtype dtype = Dtype::kF64;
  std::vector<Embedding> out;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(have_header ? ErrorCode::kMalformedRecord : ErrorCode::kMalformedHeader,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      try {
        if (j.at("format_version").get<int>() != 1) {
          throw Error(ErrorCode::kMalformedHeader, "unsupported format_version");
        }
        const auto dd = j.at("d").get<long long>();
        const auto cc = j.at("count").get<long long>();
        if (cc < 0 || (cc > 0 && dd < 2) || dd < 0) {
          throw Error(ErrorCode::kMalformedHeader, "need count >= 0 and d >= 2");
        }
        d = dd;
        count = static_cast<std::size_t>(cc);
        dtype = parse_dtype(j.at("dtype").get<std::string>());
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kMalformedHeader, e.what());
      } catch (const Error& e) {
        if (e.code() == ErrorCode::kMalformedHeader) throw;
        throw Error(ErrorCode::kMalformedHeader, e.what());
      }
      have_header = true;
      continue;
    }
    Embedding e;
    try {
      e.id = j.at("id").get<std::string>();
      e.modality = parse_modality(j.at("modality").get<std::string>());
      e.labels = parse_labels(j.contains("labels") ? j["labels"] : json(), e.id);
      const auto& values = j.at("vector");
      if (!values.is_array()) throw Error(ErrorCode::kMalformedRecord, "vector is not an array");
      e.vector.resize(static_cast<Eigen::Index>(values.size()));
      for (std::size_t i = 0; i < values.size(); ++i) {
        if (!values[i].is_number()) throw Error(ErrorCode::kMalformedRecord, "non-numeric value");
        e.vector(static_cast<Eigen::Index>(i)) = quantize(values[i].get<double>(), dtype);
      }
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kMalformedRecord, "line " + std::to_string(line_no) + ": " + ex.what());
    } catch (const Error& ex) {
      if (ex.code() == ErrorCode::kMalformedRecord) throw;
      throw Error(ErrorCode::kMalformedRecord, "line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (e.id.empty()) throw Error(ErrorCode::kMalformedRecord, "empty id");
    out.push_back(std::move(e));
  }
  if (!have_header) throw Error(ErrorCode::kMalformedHeader, "missing header line");
  if (out.size() != count) {
    throw Error(ErrorCode::kMalformedHeader, "header count " + std::to_string(count) + " but " +
                                                 std::to_string(out.size()) + " records");
  }
  finalize(out, d);
  return out;
}

// --- little-endian primitives -------------------------------------------------

template <class U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class U>
  U le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kMalformedRecord, std::string("truncated EMBF file reading ") + what);
    }
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(Dtype dtype) { return dtype == Dtype::kF32 ? "f32" : "f64"; }

Dtype parse_dtype(std::string_view s) {
  if (s == "f32") return Dtype::kF32;
  if (s == "f64") return Dtype::kF64;
  throw Error(ErrorCode::kInvalidArgument, "unknown dtype '" + std::string(s) + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string encode_embf(const std::vector<Embedding>& embeddings, Dtype dtype) {
  const Eigen::Index d = embeddings.empty() ? 0 : embeddings.front().dim();
  common_dimension(embeddings, d);
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  put_le<std::uint64_t>(out, embeddings.size());
  put_le<std::uint32_t>(out, dtype == Dtype::kF32 ? 1u : 2u);
  for (const auto& e : embeddings) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.id.size()));
    out += e.id;
    out.push_back(e.modality == Modality::kImage ? 0 : 1);
    const std::string labels = labels_json(e.labels);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(labels.size()));
    out += labels;
  }
  for (const auto& e : embeddings) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (dtype == Dtype::kF32) {
        put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(e.vector(i))));
      } else {
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(e.vector(i)));
      }
    }
  }
  return out;
}

std::vector<Embedding> decode_embf(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4, "magic") != std::string_view(kMagic, 4)) {
    throw Error(ErrorCode::kMalformedHeader, "bad EMBF magic");
  }
  if (r.le<std::uint32_t>("version") != kFormatVersion) {
    throw Error(ErrorCode::kMalformedHeader, "unsupported EMBF version");
  }
  const auto d = r.le<std::uint32_t>("d");
  const auto count = r.le<std::uint64_t>("count");
  const auto dtype_code = r.le<std::uint32_t>("dtype");
  if (dtype_code != 1 && dtype_code != 2) throw Error(ErrorCode::kMalformedHeader, "bad EMBF dtype");
  if (count > 0 && d < 2) throw Error(ErrorCode::kMalformedHeader, "d must be >= 2");
  const std::size_t width = dtype_code == 1 ? 4 : 8;
  if (count > bytes.size() / (static_cast<std::uint64_t>(d) * width + 9)) {
    throw Error(ErrorCode::kMalformedHeader, "record count exceeds file size");
  }

  std::vector<Embedding> out(count);
  for (auto& e : out) {
    const auto id_len = r.le<std::uint32_t>("id length");
    e.id = std::string(r.take(id_len, "id"));
    const auto modality = r.le<std::uint8_t>("modality");
    if (modality > 1) throw Error(ErrorCode::kMalformedRecord, "bad modality byte");
    e.modality = modality == 0 ? Modality::kImage : Modality::kText;
    const auto labels_len = r.le<std::uint32_t>("labels length");
    const auto labels = r.take(labels_len, "labels");
    try {
      e.labels = parse_labels(json::parse(labels), e.id);
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::kMalformedRecord, ex.what());
    }
    if (e.id.empty()) throw Error(ErrorCode::kMalformedRecord, "empty id");
  }
  for (auto& e : out) {
    e.vector.resize(d);
    for (std::uint32_t i = 0; i < d; ++i) {
      e.vector(i) = width == 4 ? static_cast<double>(std::bit_cast<float>(r.le<std::uint32_t>("row")))
                               : std::bit_cast<double>(r.le<std::uint64_t>("row"));
    }
  }
  if (!r.done()) throw Error(ErrorCode::kMalformedRecord, "trailing bytes after EMBF rows");
  finalize(out, d);
  return out;
}

std::vector<Embedding> load_embeddings(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) return decode_embf(bytes);
  return parse_jsonl(bytes);
}

void save_embeddings(const fs::path& path, const std::vector<Embedding>& embeddings, Dtype dtype,
                     Container container) {
  if (container == Container::kEmbf) {
    write_file_atomic(path, encode_embf(embeddings, dtype));
    return;
  }
  const Eigen::Index d = embeddings.empty() ? 0 : embeddings.front().dim();
  common_dimension(embeddings, d);
  std::string out = "{\"format_version\":1,\"d\":" + std::to_string(d) +
                    ",\"count\":" + std::to_string(embeddings.size()) + ",\"dtype\":\"" +
                    std::string(to_string(dtype)) + "\"}\n";
  for (const auto& e : embeddings) {
    out += "{\"id\":" + json_string(e.id) + ",\"modality\":\"" + std::string(to_string(e.modality)) +
           "\",\"labels\":" + labels_json(e.labels) + ",\"vector\":[";
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i) out += ',';
      out += format_value(e.vector(i), dtype);
    }
    out += "]}\n";
  }
  write_file_atomic(path, out);
}

std::vector<GroupPrototype> load_prototypes(const fs::path& path) {
  std::vector<GroupPrototype> out;
  for (auto& e : load_embeddings(path)) {
    out.push_back({e.label(kGroupLabel).value_or(e.id), std::move(e.vector)});
  }
  return out;
}

void save_prototypes(const fs::path& path, const std::vector<GroupPrototype>& protos) {
  std::vector<Embedding> rows;
  for (const auto& p : protos) {
    rows.push_back({p.group, p.vector, Modality::kText, {{std::string(kGroupLabel), p.group}}});
  }
  save_embeddings(path, rows);
}

json subspace_to_json(const AttributeSubspace& s) {
  json basis = json::array();
  for (Eigen::Index c = 0; c < s.rank(); ++c) {
    basis.push_back(std::vector<double>(s.basis().col(c).data(), s.basis().col(c).data() + s.dim()));
  }
  return {{"format_version", 1},
          {"d", s.dim()},
          {"rank", s.rank()},
          {"reference_group", s.reference_group()},
          {"source_groups", s.source_groups()},
          {"basis", basis}};
}

AttributeSubspace subspace_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw Error(ErrorCode::kMalformedHeader, "unsupported subspace format_version");
    }
    const auto d = j.at("d").get<Eigen::Index>();
    const auto rank = j.at("rank").get<Eigen::Index>();
    const auto& cols = j.at("basis");
    if (!cols.is_array() || static_cast<Eigen::Index>(cols.size()) != rank || d < 2) {
      throw Error(ErrorCode::kMalformedHeader, "basis must hold 'rank' columns and d >= 2");
    }
    Matrix basis(d, rank);
    for (Eigen::Index c = 0; c < rank; ++c) {
      const auto col = cols[static_cast<std::size_t>(c)].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(col.size()) != d) {
        throw Error(ErrorCode::kDimensionMismatch, "basis column length differs from d");
      }
      for (Eigen::Index r = 0; r < d; ++r) basis(r, c) = col[static_cast<std::size_t>(r)];
    }
    return AttributeSubspace::from_basis(std::move(basis),
                                         j.at("source_groups").get<std::vector<std::string>>(),
                                         j.at("reference_group").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedHeader, std::string("subspace file: ") + e.what());
  }
}

AttributeSubspace load_subspace(const fs::path& path) { return subspace_from_json(load_json(path)); }

void save_subspace(const fs::path& path, const AttributeSubspace& s) {
  save_json(path, subspace_to_json(s));
}

std::string debias_result_line(const DebiasResult& r) {
  return "{\"id\":" + json_string(r.id) + ",\"degenerate\":\"" + std::string(to_string(r.degenerate)) +
         "\",\"alpha_star\":" + format_double(r.alpha_star) +
         ",\"norm_parallel\":" + format_double(r.norm_parallel) +
         ",\"norm_orthogonal\":" + format_double(r.norm_orthogonal) +
         ",\"leakage\":" + format_double(r.leakage) +
         ",\"self_utility_loss\":" + format_double(r.self_utility_loss) +
         ",\"cross_bound_term\":" + format_double(r.cross_bound_term) + "}";
}

void save_debias_results(const fs::path& path, const std::vector<DebiasResult>& results) {
  std::string out;
  for (const auto& r : results) out += debias_result_line(r) + "\n";
  write_file_atomic(path, out);
}

VariantSpec parse_variant_spec(const json& j) {
  try {
    VariantSpec spec;
    spec.attribute = j.at("attribute").get<std::string>();
    for (const auto& g : j.at("groups")) {
      spec.groups.push_back({g.at("name").get<std::string>(), g.at("anchor").get<std::string>(),
                             g.value("variants", std::vector<std::string>{})});
    }
    if (spec.groups.size() < 2) {
      throw Error(ErrorCode::kMalformedRecord, "variant set needs at least two groups");
    }
    return spec;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedRecord, std::string("variant set: ") + e.what());
  }
}

VariantSpec load_variant_spec(const fs::path& path) { return parse_variant_spec(load_json(path)); }

std::vector<GroupCounts> parse_group_counts(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t");
      const auto e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return cells;
  };
  if (!std::getline(in, line)) throw Error(ErrorCode::kMalformedHeader, "empty counts file");
  if (split(line) != std::vector<std::string>{"prompt_id", "group", "count"}) {
    throw Error(ErrorCode::kMalformedHeader, "counts header must be prompt_id,group,count");
  }
  std::vector<GroupCounts> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != 3 || cells[0].empty() || cells[1].empty()) {
      throw Error(ErrorCode::kMalformedRecord, "line " + std::to_string(line_no));
    }
    long long count = 0;
    try {
      std::size_t used = 0;
      count = std::stoll(cells[2], &used);
      if (used != cells[2].size() || count < 0) throw std::invalid_argument("count");
    } catch (const std::exception&) {
      throw Error(ErrorCode::kMalformedRecord,
                  "line " + std::to_string(line_no) + ": bad count '" + cells[2] + "'");
    }
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const GroupCounts& g) { return g.prompt_id == cells[0]; });
    if (it == out.end()) {
      out.push_back({cells[0], {}, 0});
      it = std::prev(out.end());
    }
    it->counts[cells[1]] += count;
    it->total += count;
  }
  return out;
}

std::vector<GroupCounts> load_group_counts(const fs::path& path) {
  return parse_group_counts(read_file(path));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot rename onto '" + path.string() + "'");
  }
}

void save_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

json load_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kMalformedHeader, "'" + path.string() + "': " + e.what());
  }
}

}  // namespace vlmfair::io
