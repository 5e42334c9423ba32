#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "reasonforge/corpus.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/llm.hpp"
#include "reasonforge/rng.hpp"
#include "reasonforge/vecmath.hpp"

namespace reasonforge {

inline constexpr double kNormTolerance = 1e-9;
inline constexpr char kEmbeddingMagic[8] = {'R', 'F', 'E', 'M', 'B', '0', '0', '1'};

/// Insertion-ordered id->vector store. Vectors are held at f64; the on-disk
/// format truncates to f32, so loaded matrices must be renormalized before
/// the `normalized` invariant can be claimed again.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(int dim, bool normalized = false)
      : dim_(dim), normalized_(normalized) {
    if (dim <= 0) throw validation_error("embedding dim must be positive");
  }

  void add(const std::string& id, Vec v) {
    if (id.empty()) throw validation_error("embedding row with empty id");
    if (dim_ == 0) dim_ = static_cast<int>(v.size());
    if (v.size() != static_cast<std::size_t>(dim_)) {
      throw validation_error("embedding dimension mismatch for id \"" + id + "\": expected " +
                             std::to_string(dim_) + ", got " + std::to_string(v.size()));
    }
    if (normalized_) check_norm(id, v);
    auto [it, inserted] = index_.emplace(id, ids_.size());
    if (!inserted) throw validation_error("duplicate embedding id \"" + id + "\"");
    ids_.push_back(id);
    rows_.push_back(std::move(v));
  }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  const Vec* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &rows_[it->second];
  }

  const Vec& at(const std::string& id) const {
    const Vec* v = find(id);
    if (!v) throw validation_error("no embedding for id \"" + id + "\"");
    return *v;
  }

  int dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool normalized() const { return normalized_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const Vec& row(std::size_t i) const { return rows_[i]; }

  /// L2-normalizes every row and turns the `normalized` invariant on.
  void renormalize() {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      if (!normalize_inplace(rows_[i])) {
        throw validation_error("cannot normalize zero embedding for id \"" + ids_[i] + "\"");
      }
    }
    normalized_ = true;
  }

 private:
  static void check_norm(const std::string& id, const Vec& v) {
    const double n = norm2(v);
    if (std::abs(n - 1.0) > kNormTolerance) {
      throw validation_error("embedding for id \"" + id + "\" violates unit-norm invariant (norm " +
                             std::to_string(n) + ")");
    }
  }

  int dim_ = 0;
  bool normalized_ = false;
  std::vector<std::string> ids_;
  std::vector<Vec> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual Vec embed(const std::string& text) = 0;
};

/// Deterministic text-sensitive mock: each character 3-gram contributes a
/// hash-derived value at a hash-derived coordinate; the sum is L2-normalized.
/// Pure in (seed, text).
class MockEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit MockEmbeddingBackend(std::uint64_t seed, int dim = 64) : seed_(seed), dim_(dim) {
    if (dim <= 0) throw validation_error("embedding dim must be positive");
  }

  Vec embed(const std::string& text) override {
    Vec v(static_cast<std::size_t>(dim_), 0.0);
    std::string_view sv(text);
    if (sv.size() < 3) {
      add_gram(v, sv);
    } else {
      for (std::size_t i = 0; i + 3 <= sv.size(); ++i) add_gram(v, sv.substr(i, 3));
    }
    if (!normalize_inplace(v)) {
      v[fnv1a64_u64(fnv1a64(text), seed_) % static_cast<std::uint64_t>(dim_)] = 1.0;
    }
    return v;
  }

  int dim() const { return dim_; }

 private:
  void add_gram(Vec& v, std::string_view gram) {
    const std::uint64_t h = fnv1a64_u64(fnv1a64(gram), seed_);
    const std::size_t idx = h % static_cast<std::uint64_t>(dim_);
    const double val =
        2.0 * (static_cast<double>(h >> 11) * 0x1.0p-53) - 1.0;
    v[idx] += val;
  }

  std::uint64_t seed_;
  int dim_;
};

/// OpenAI-compatible embeddings endpoint; same retry policy as the chat
/// client.
class RemoteEmbeddingBackend : public EmbeddingBackend {
 public:
  explicit RemoteEmbeddingBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) {
      throw validation_error("remote backend requires a base URL (RF_API_BASE)");
    }
  }

  Vec embed(const std::string& text) override {
    nlohmann::ordered_json body;
    body["model"] = cfg_.model;
    body["input"] = nlohmann::ordered_json::array({text});
    const std::string payload = body.dump();
    int last_status = 0;
    std::string last_detail = "connection failed";
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      httplib::Client cli(cfg_.base_url);
      cli.set_connection_timeout(cfg_.timeout_seconds, 0);
      cli.set_read_timeout(cfg_.timeout_seconds, 0);
      httplib::Headers headers;
      if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
      auto res = cli.Post("/v1/embeddings", headers, payload, "application/json");
      if (res) {
        if (res->status >= 200 && res->status < 300) return parse_response(res->body);
        last_status = res->status;
        last_detail = "status " + std::to_string(res->status);
        if (res->status == 400 || res->status == 401 || res->status == 404) {
          throw service_error("embedding endpoint rejected the request (" + last_detail + ")",
                              res->status);
        }
      }
      if (attempt < cfg_.max_attempts) {
        std::this_thread::sleep_for(std::chrono::milliseconds(
            static_cast<long long>(cfg_.backoff_base_ms) * (1LL << (attempt - 1))));
      }
    }
    throw service_error("embedding endpoint failed after " + std::to_string(cfg_.max_attempts) +
                            " attempts (last: " + last_detail + ")",
                        last_status);
  }

 private:
  static Vec parse_response(const std::string& body) {
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw service_error(std::string("embedding endpoint returned malformed JSON: ") + e.what(),
                          0);
    }
    if (!parsed.contains("data") || !parsed["data"].is_array() || parsed["data"].empty() ||
        !parsed["data"][0].contains("embedding")) {
      throw service_error("embedding response missing data[0].embedding", 0);
    }
    Vec v;
    for (const auto& x : parsed["data"][0]["embedding"]) v.push_back(x.get<double>());
    return v;
  }

  RemoteConfig cfg_;
};

/// One vector per (id, text) pair, in input order.
inline EmbeddingMatrix embed_all(const std::vector<std::pair<std::string, std::string>>& id_texts,
                                 EmbeddingBackend& backend, bool normalize = true) {
  EmbeddingMatrix m;
  for (const auto& [id, text] : id_texts) {
    Vec v = backend.embed(text);
    if (normalize && !normalize_inplace(v)) {
      throw validation_error("backend produced a zero embedding for id \"" + id + "\"");
    }
    m.add(id, std::move(v));
  }
  if (normalize && !m.empty()) m.renormalize();
  return m;
}

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;
};

struct CandidateSet {
  std::string query_id;
  std::vector<ScoredDoc> ranked;  // descending score, ties by ascending doc_id
};

/// Exact brute-force argmax-k by dot product over rows not in `exclude`.
inline CandidateSet top_k(const Vec& query_vec, const EmbeddingMatrix& matrix, std::size_t k,
                          const std::unordered_set<std::string>& exclude = {}) {
  if (k == 0) throw validation_error("top_k requires k >= 1");
  if (!matrix.empty() && query_vec.size() != static_cast<std::size_t>(matrix.dim())) {
    throw validation_error("query dimension " + std::to_string(query_vec.size()) +
                           " does not match matrix dimension " + std::to_string(matrix.dim()));
  }
  std::vector<std::size_t> keep;
  keep.reserve(matrix.size());
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    if (exclude.empty() || exclude.count(matrix.id(i)) == 0) keep.push_back(i);
  }
  std::vector<double> scores(matrix.size(), 0.0);
  for (std::size_t i : keep) scores[i] = dot(query_vec, matrix.row(i));
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return matrix.id(a) < matrix.id(b);
  };
  const std::size_t take = std::min(k, keep.size());
  std::partial_sort(keep.begin(), keep.begin() + static_cast<std::ptrdiff_t>(take), keep.end(),
                    better);
  CandidateSet out;
  out.ranked.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.ranked.push_back({matrix.id(keep[i]), scores[keep[i]]});
  }
  return out;
}

/// Top-k annotation candidates with the query's source document exempted.
inline CandidateSet mine_candidates(const Query& query, const Vec& query_vec,
                                    const EmbeddingMatrix& corpus_matrix, std::size_t k = 100) {
  std::unordered_set<std::string> exclude;
  if (!query.source_doc_id.empty()) exclude.insert(query.source_doc_id);
  CandidateSet cs = top_k(query_vec, corpus_matrix, k, exclude);
  cs.query_id = query.id;
  return cs;
}

namespace detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline void write_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(out, bits);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& ctx) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) throw validation_error(ctx + ": truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& in, const std::string& ctx) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw validation_error(ctx + ": truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline float read_f32(std::istream& in, const std::string& ctx) {
  const std::uint32_t bits = read_u32(in, ctx);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace detail

/// Binary layout: magic "RFEMB001", u32 dim, u64 row count, then per row a
/// u32 byte length, the UTF-8 id, and dim little-endian f32 values.
inline void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw validation_error("cannot open file for writing: " + path.string());
  out.write(kEmbeddingMagic, 8);
  detail::write_u32(out, static_cast<std::uint32_t>(m.dim()));
  detail::write_u64(out, static_cast<std::uint64_t>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::string& id = m.id(i);
    detail::write_u32(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (double x : m.row(i)) detail::write_f32(out, static_cast<float>(x));
  }
  if (!out) throw validation_error("write failed: " + path.string());
}

/// Loaded matrices are marked unnormalized regardless of how they were saved:
/// the f32 round trip perturbs norms past the 1e-9 invariant, so callers that
/// need unit rows call renormalize().
inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open file: " + path.string());
  const std::string ctx = path.string();
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kEmbeddingMagic, 8) != 0) {
    throw validation_error(ctx + ": not an embedding file (bad magic)");
  }
  const std::uint32_t dim = detail::read_u32(in, ctx);
  const std::uint64_t count = detail::read_u64(in, ctx);
  if (dim == 0) throw validation_error(ctx + ": embedding dim must be positive");
  EmbeddingMatrix m(static_cast<int>(dim));
  for (std::uint64_t r = 0; r < count; ++r) {
    const std::uint32_t id_len = detail::read_u32(in, ctx);
    std::string id(id_len, '\0');
    if (id_len > 0 && !in.read(id.data(), id_len)) throw validation_error(ctx + ": truncated file");
    Vec v(dim);
    for (std::uint32_t d = 0; d < dim; ++d) v[d] = static_cast<double>(detail::read_f32(in, ctx));
    m.add(id, std::move(v));
  }
  return m;
}

inline void save_candidates(const std::vector<CandidateSet>& sets,
                            const std::filesystem::path& path) {
  JsonlWriter w(path);
  for (const CandidateSet& cs : sets) {
    Json rec;
    rec["query_id"] = cs.query_id;
    Json ranked = Json::array();
    for (const ScoredDoc& sd : cs.ranked) {
      ranked.push_back(Json{{"doc_id", sd.doc_id}, {"score", sd.score}});
    }
    rec["ranked"] = ranked;
    w.write(rec);
  }
}

inline std::vector<CandidateSet> load_candidates(const std::filesystem::path& path) {
  std::vector<CandidateSet> sets;
  for_each_jsonl(path, [&](const Json& rec, std::size_t lineno) {
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    CandidateSet cs;
    cs.query_id = require_string(rec, "query_id", ctx);
    auto it = rec.find("ranked");
    if (it == rec.end() || !it->is_array()) {
      throw validation_error(ctx + ": missing or non-array field \"ranked\"");
    }
    for (const auto& entry : *it) {
      if (!entry.is_object() || !entry.contains("doc_id") || !entry.contains("score")) {
        throw validation_error(ctx + ": ranked entries need doc_id and score");
      }
      cs.ranked.push_back({entry["doc_id"].get<std::string>(), entry["score"].get<double>()});
    }
    sets.push_back(std::move(cs));
  });
  return sets;
}

}  // namespace reasonforge
