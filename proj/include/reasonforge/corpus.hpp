#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "reasonforge/jsonl.hpp"
#include "reasonforge/tokenize.hpp"

namespace reasonforge {

struct Document {
  std::string id;
  std::string text;
  std::string task;
  std::map<std::string, std::string> meta;
};

// Optional string fields use empty-string to mean absent; validation rejects
// records where the field is present but empty.
struct Query {
  std::string id;
  std::string text;
  std::string task;
  std::string source_doc_id;
  std::string length_bucket;
  std::string education_level;
};

struct TrainingSample {
  std::string query_id;
  std::vector<std::string> positives;
  std::vector<std::string> hard_negatives;
  std::string reasoning_query;
};

/// Insertion-ordered id->Document collection.
class Corpus {
 public:
  void add(Document doc, std::size_t lineno = 0) {
    if (doc.id.empty()) {
      throw validation_error("document with empty id" + at_line(lineno));
    }
    if (doc.text.empty()) {
      throw validation_error("document \"" + doc.id + "\" has empty text" + at_line(lineno));
    }
    auto [it, inserted] = index_.emplace(doc.id, docs_.size());
    if (!inserted) {
      throw validation_error("duplicate document id \"" + doc.id + "\"" + at_line(lineno));
    }
    docs_.push_back(std::move(doc));
  }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  const Document* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &docs_[it->second];
  }

  const Document& at(const std::string& id) const {
    const Document* d = find(id);
    if (!d) throw validation_error("unknown document id \"" + id + "\"");
    return *d;
  }

  std::size_t size() const { return docs_.size(); }
  bool empty() const { return docs_.empty(); }
  const std::vector<Document>& docs() const { return docs_; }
  auto begin() const { return docs_.begin(); }
  auto end() const { return docs_.end(); }

 private:
  static std::string at_line(std::size_t lineno) {
    return lineno ? " (line " + std::to_string(lineno) + ")" : std::string();
  }

  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

class QuerySet {
 public:
  void add(Query q, std::size_t lineno = 0) {
    if (q.id.empty()) {
      throw validation_error("query with empty id" + at_line(lineno));
    }
    if (q.text.empty()) {
      throw validation_error("query \"" + q.id + "\" has empty text" + at_line(lineno));
    }
    auto [it, inserted] = index_.emplace(q.id, queries_.size());
    if (!inserted) {
      throw validation_error("duplicate query id \"" + q.id + "\"" + at_line(lineno));
    }
    queries_.push_back(std::move(q));
  }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  const Query* find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &queries_[it->second];
  }

  const Query& at(const std::string& id) const {
    const Query* q = find(id);
    if (!q) throw validation_error("unknown query id \"" + id + "\"");
    return *q;
  }

  std::size_t size() const { return queries_.size(); }
  bool empty() const { return queries_.empty(); }
  const std::vector<Query>& queries() const { return queries_; }
  auto begin() const { return queries_.begin(); }
  auto end() const { return queries_.end(); }

 private:
  static std::string at_line(std::size_t lineno) {
    return lineno ? " (line " + std::to_string(lineno) + ")" : std::string();
  }

  std::vector<Query> queries_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline Corpus load_corpus(const std::filesystem::path& path) {
  Corpus corpus;
  for_each_jsonl(path, [&](const Json& rec, std::size_t lineno) {
    Document doc;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    doc.id = require_string(rec, "id", ctx);
    doc.text = require_string(rec, "text", ctx);
    doc.task = require_string(rec, "task", ctx);
    if (auto it = rec.find("meta"); it != rec.end() && !it->is_null()) {
      if (!it->is_object()) throw validation_error(ctx + ": \"meta\" must be an object");
      for (auto& [k, v] : it->items()) {
        if (!v.is_string()) throw validation_error(ctx + ": meta values must be strings");
        doc.meta[k] = v.get<std::string>();
      }
    }
    corpus.add(std::move(doc), lineno);
  });
  return corpus;
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  JsonlWriter w(path);
  for (const Document& d : corpus) {
    Json rec;
    rec["id"] = d.id;
    rec["text"] = d.text;
    rec["task"] = d.task;
    if (!d.meta.empty()) {
      Json meta = Json::object();
      for (const auto& [k, v] : d.meta) meta[k] = v;
      rec["meta"] = meta;
    }
    w.write(rec);
  }
}

inline QuerySet load_queries(const std::filesystem::path& path,
                             const Corpus* corpus = nullptr) {
  QuerySet qs;
  for_each_jsonl(path, [&](const Json& rec, std::size_t lineno) {
    Query q;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    q.id = require_string(rec, "id", ctx);
    q.text = require_string(rec, "text", ctx);
    q.task = require_string(rec, "task", ctx);
    auto optional_field = [&](const char* key) -> std::string {
      auto it = rec.find(key);
      if (it == rec.end() || it->is_null()) return {};
      if (!it->is_string() || it->get<std::string>().empty()) {
        throw validation_error(ctx + ": field \"" + key + "\" must be a non-empty string");
      }
      return it->get<std::string>();
    };
    q.source_doc_id = optional_field("source_doc_id");
    q.length_bucket = optional_field("length_bucket");
    q.education_level = optional_field("education_level");
    if (corpus && !q.source_doc_id.empty() && !corpus->contains(q.source_doc_id)) {
      throw validation_error(ctx + ": query \"" + q.id + "\" references unknown source_doc_id \"" +
                             q.source_doc_id + "\"");
    }
    qs.add(std::move(q), lineno);
  });
  return qs;
}

inline void save_queries(const QuerySet& qs, const std::filesystem::path& path) {
  JsonlWriter w(path);
  for (const Query& q : qs) {
    Json rec;
    rec["id"] = q.id;
    rec["text"] = q.text;
    rec["task"] = q.task;
    if (!q.source_doc_id.empty()) rec["source_doc_id"] = q.source_doc_id;
    if (!q.length_bucket.empty()) rec["length_bucket"] = q.length_bucket;
    if (!q.education_level.empty()) rec["education_level"] = q.education_level;
    w.write(rec);
  }
}

/// Validates one sample against its query and corpus. `source_doc_id` of the
/// seeding query may appear in neither id set.
inline void validate_sample(const TrainingSample& s, const QuerySet& queries,
                            const Corpus& corpus, const std::string& ctx) {
  if (s.positives.empty()) {
    throw validation_error(ctx + ": sample \"" + s.query_id + "\" has no positives");
  }
  const Query* q = queries.find(s.query_id);
  if (!q) throw validation_error(ctx + ": sample references unknown query id \"" + s.query_id + "\"");
  std::unordered_set<std::string> pos;
  for (const std::string& id : s.positives) {
    if (!corpus.contains(id)) {
      throw validation_error(ctx + ": sample \"" + s.query_id + "\" references unknown document id \"" +
                             id + "\"");
    }
    if (!pos.insert(id).second) {
      throw validation_error(ctx + ": sample \"" + s.query_id + "\" lists positive \"" + id +
                             "\" twice");
    }
    if (!q->source_doc_id.empty() && id == q->source_doc_id) {
      throw validation_error(ctx + ": sample \"" + s.query_id + "\" lists its source document \"" +
                             id + "\" as a positive");
    }
  }
  std::unordered_set<std::string> neg;
  for (const std::string& id : s.hard_negatives) {
    if (!corpus.contains(id)) {
      throw validation_error(ctx + ": sample \"" + s.query_id + "\" references unknown document id \"" +
                             id + "\"");
    }
    if (pos.count(id)) {
      throw validation_error(ctx + ": sample \"" + s.query_id + "\" lists \"" + id +
                             "\" as both positive and hard negative");
    }
    if (!neg.insert(id).second) {
      throw validation_error(ctx + ": sample \"" + s.query_id + "\" lists hard negative \"" + id +
                             "\" twice");
    }
    if (!q->source_doc_id.empty() && id == q->source_doc_id) {
      throw validation_error(ctx + ": sample \"" + s.query_id + "\" lists its source document \"" +
                             id + "\" as a hard negative");
    }
  }
}

inline std::vector<TrainingSample> load_samples(const std::filesystem::path& path,
                                                const QuerySet* queries = nullptr,
                                                const Corpus* corpus = nullptr) {
  std::vector<TrainingSample> samples;
  std::unordered_set<std::string> seen;
  for_each_jsonl(path, [&](const Json& rec, std::size_t lineno) {
    TrainingSample s;
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    s.query_id = require_string(rec, "query_id", ctx);
    if (!seen.insert(s.query_id).second) {
      throw validation_error(ctx + ": duplicate sample for query id \"" + s.query_id + "\"");
    }
    auto read_ids = [&](const char* key, std::vector<std::string>& out) {
      auto it = rec.find(key);
      if (it == rec.end()) {
        throw validation_error(ctx + ": missing field \"" + std::string(key) + "\"");
      }
      if (!it->is_array()) {
        throw validation_error(ctx + ": field \"" + std::string(key) + "\" must be an array");
      }
      for (const auto& v : *it) {
        if (!v.is_string()) {
          throw validation_error(ctx + ": field \"" + std::string(key) +
                                 "\" must contain only strings");
        }
        out.push_back(v.get<std::string>());
      }
    };
    read_ids("positives", s.positives);
    read_ids("hard_negatives", s.hard_negatives);
    if (auto it = rec.find("reasoning_query"); it != rec.end() && !it->is_null()) {
      if (!it->is_string()) throw validation_error(ctx + ": \"reasoning_query\" must be a string");
      s.reasoning_query = it->get<std::string>();
    }
    if (queries && corpus) validate_sample(s, *queries, *corpus, ctx);
    samples.push_back(std::move(s));
  });
  return samples;
}

inline void save_samples(const std::vector<TrainingSample>& samples,
                         const std::filesystem::path& path) {
  JsonlWriter w(path);
  for (const TrainingSample& s : samples) {
    Json rec;
    rec["query_id"] = s.query_id;
    rec["positives"] = s.positives;
    rec["hard_negatives"] = s.hard_negatives;
    if (!s.reasoning_query.empty()) rec["reasoning_query"] = s.reasoning_query;
    w.write(rec);
  }
}

struct TaskStats {
  std::string task;
  std::uint64_t query_count_raw = 0;
  std::uint64_t query_count_final = 0;
  std::uint64_t positives_total = 0;
  std::uint64_t negatives_total = 0;
  std::uint64_t query_tokens_total = 0;
  std::uint64_t pos_tokens_total = 0;
  std::uint64_t neg_tokens_total = 0;
  double avg_positives = 0.0;
  double avg_negatives = 0.0;
  double avg_tokens_query = 0.0;
  double avg_tokens_pos = 0.0;
  double avg_tokens_neg = 0.0;
};

struct DatasetStats {
  std::vector<TaskStats> tasks;
  TaskStats total;
};

namespace detail {
inline void finalize_stats(TaskStats& t) {
  if (t.query_count_final > 0) {
    t.avg_positives = static_cast<double>(t.positives_total) / static_cast<double>(t.query_count_final);
    t.avg_negatives = static_cast<double>(t.negatives_total) / static_cast<double>(t.query_count_final);
    t.avg_tokens_query =
        static_cast<double>(t.query_tokens_total) / static_cast<double>(t.query_count_final);
  }
  if (t.positives_total > 0) {
    t.avg_tokens_pos = static_cast<double>(t.pos_tokens_total) / static_cast<double>(t.positives_total);
  }
  if (t.negatives_total > 0) {
    t.avg_tokens_neg = static_cast<double>(t.neg_tokens_total) / static_cast<double>(t.negatives_total);
  }
}
}  // namespace detail

/// Raw counts come from `queries`; final counts and averages from `samples`.
/// Averages over documents weight each positive/negative instance equally, so
/// a document counts once per sample that lists it.
inline DatasetStats compute_stats(const QuerySet& queries,
                                  const std::vector<TrainingSample>& samples,
                                  const Corpus& corpus) {
  DatasetStats stats;
  std::unordered_map<std::string, std::size_t> row_of;
  auto row = [&](const std::string& task) -> TaskStats& {
    auto [it, inserted] = row_of.emplace(task, stats.tasks.size());
    if (inserted) {
      stats.tasks.emplace_back();
      stats.tasks.back().task = task;
    }
    return stats.tasks[it->second];
  };
  for (const Query& q : queries) row(q.task).query_count_raw++;

  std::unordered_map<std::string, std::uint64_t> doc_tokens;
  auto tokens_of_doc = [&](const std::string& id) -> std::uint64_t {
    auto it = doc_tokens.find(id);
    if (it != doc_tokens.end()) return it->second;
    const Document& d = corpus.at(id);
    std::uint64_t n = token_count(d.text);
    doc_tokens.emplace(id, n);
    return n;
  };

  for (const TrainingSample& s : samples) {
    const Query* q = queries.find(s.query_id);
    if (!q) throw validation_error("stats: sample references unknown query id \"" + s.query_id + "\"");
    TaskStats& t = row(q->task);
    t.query_count_final++;
    t.query_tokens_total += token_count(q->text);
    for (const std::string& id : s.positives) {
      t.positives_total++;
      t.pos_tokens_total += tokens_of_doc(id);
    }
    for (const std::string& id : s.hard_negatives) {
      t.negatives_total++;
      t.neg_tokens_total += tokens_of_doc(id);
    }
  }

  stats.total.task = "total";
  for (TaskStats& t : stats.tasks) {
    if (t.query_count_final > t.query_count_raw) {
      throw validation_error("stats: task \"" + t.task + "\" has more final samples (" +
                             std::to_string(t.query_count_final) + ") than raw queries (" +
                             std::to_string(t.query_count_raw) + ")");
    }
    stats.total.query_count_raw += t.query_count_raw;
    stats.total.query_count_final += t.query_count_final;
    stats.total.positives_total += t.positives_total;
    stats.total.negatives_total += t.negatives_total;
    stats.total.query_tokens_total += t.query_tokens_total;
    stats.total.pos_tokens_total += t.pos_tokens_total;
    stats.total.neg_tokens_total += t.neg_tokens_total;
    detail::finalize_stats(t);
  }
  detail::finalize_stats(stats.total);
  return stats;
}

inline Json to_json(const TaskStats& t) {
  Json rec;
  rec["task"] = t.task;
  rec["query_count_raw"] = t.query_count_raw;
  rec["query_count_final"] = t.query_count_final;
  rec["positives_total"] = t.positives_total;
  rec["negatives_total"] = t.negatives_total;
  rec["avg_positives"] = t.avg_positives;
  rec["avg_negatives"] = t.avg_negatives;
  rec["avg_tokens_query"] = t.avg_tokens_query;
  rec["avg_tokens_pos"] = t.avg_tokens_pos;
  rec["avg_tokens_neg"] = t.avg_tokens_neg;
  return rec;
}

inline Json to_json(const DatasetStats& s) {
  Json rec;
  rec["tasks"] = Json::array();
  for (const TaskStats& t : s.tasks) rec["tasks"].push_back(to_json(t));
  rec["total"] = to_json(s.total);
  return rec;
}

}  // namespace reasonforge
