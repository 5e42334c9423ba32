#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "reasonforge/corpus.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/prompts.hpp"
#include "reasonforge/retrieval.hpp"
#include "reasonforge/trainer.hpp"

namespace reasonforge {

/// query_id -> doc_id -> graded relevance. Ordered maps keep every iteration
/// deterministic regardless of input file order.
using Qrels = std::map<std::string, std::map<std::string, int>>;

inline Qrels load_qrels(const std::filesystem::path& path) {
  Qrels qrels;
  for_each_jsonl(path, [&](const Json& rec, std::size_t lineno) {
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    const std::string qid = require_string(rec, "query_id", ctx);
    const std::string did = require_string(rec, "doc_id", ctx);
    if (!rec.contains("relevance") || !rec["relevance"].is_number_integer()) {
      throw validation_error(ctx + ": missing or non-integer field \"relevance\"");
    }
    const int rel = rec["relevance"].get<int>();
    if (rel < 0) throw validation_error(ctx + ": relevance must be >= 0");
    qrels[qid][did] = rel;
  });
  return qrels;
}

inline void save_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  JsonlWriter w(path);
  for (const auto& [qid, docs] : qrels) {
    for (const auto& [did, rel] : docs) {
      Json rec;
      rec["query_id"] = qid;
      rec["doc_id"] = did;
      rec["relevance"] = rel;
      w.write(rec);
    }
  }
}

/// Exactly `Instruct: {task_instruction}\nQuery: {query_text}`.
inline std::string format_query(const std::string& task_instruction,
                                const std::string& query_text) {
  if (task_instruction.empty()) throw validation_error("task instruction must be non-empty");
  if (query_text.empty()) throw validation_error("query text must be non-empty");
  return "Instruct: " + task_instruction + "\nQuery: " + query_text;
}

/// DCG with gain 2^rel - 1 and discount log2(rank + 1); nDCG = DCG/IDCG with
/// IDCG from the ideal ordering, 0 when no positive relevance exists.
inline double ndcg_at_k(const std::vector<std::string>& ranked,
                        const std::map<std::string, int>& qrels_for_query, int k = 10) {
  if (k < 1) throw validation_error("ndcg_at_k requires k >= 1");
  const std::size_t depth = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  double dcg = 0.0;
  for (std::size_t i = 0; i < depth; ++i) {
    auto it = qrels_for_query.find(ranked[i]);
    const int rel = it == qrels_for_query.end() ? 0 : it->second;
    if (rel > 0) dcg += (std::exp2(static_cast<double>(rel)) - 1.0) /
                        std::log2(static_cast<double>(i + 2));
  }
  std::vector<int> rels;
  rels.reserve(qrels_for_query.size());
  for (const auto& [did, rel] : qrels_for_query) {
    (void)did;
    if (rel > 0) rels.push_back(rel);
  }
  std::sort(rels.begin(), rels.end(), std::greater<int>());
  double idcg = 0.0;
  const std::size_t ideal_depth = std::min<std::size_t>(static_cast<std::size_t>(k), rels.size());
  for (std::size_t i = 0; i < ideal_depth; ++i) {
    idcg += (std::exp2(static_cast<double>(rels[i])) - 1.0) /
            std::log2(static_cast<double>(i + 2));
  }
  if (idcg == 0.0) return 0.0;
  return dcg / idcg;
}

struct EvalResult {
  std::map<std::string, double> per_task;            // macro mean within task
  std::map<std::string, std::size_t> queries_per_task;
  std::map<std::string, double> per_query;
  double mean = 0.0;  // macro mean over tasks
};

/// Ranks the head-transformed corpus for every query in qrels and aggregates
/// nDCG@k per task, then macro-averages across tasks. No exclusions apply at
/// evaluation time.
inline EvalResult evaluate(const AdapterHead& head, const EmbeddingMatrix& embeddings,
                           const QuerySet& queries, const Corpus& corpus, const Qrels& qrels,
                           int k = 10) {
  if (k < 1) throw validation_error("evaluate requires k >= 1");
  EmbeddingMatrix transformed(head.dim);
  for (const Document& d : corpus) {
    transformed.add(d.id, head.apply(embeddings.at(d.id)));
  }
  EvalResult result;
  std::map<std::string, std::vector<double>> by_task;
  for (const auto& [qid, rels] : qrels) {
    const Query& q = queries.at(qid);
    bool has_positive = false;
    for (const auto& [did, rel] : rels) {
      if (!corpus.contains(did)) {
        throw validation_error("qrels reference unknown document id \"" + did + "\"");
      }
      if (rel > 0) has_positive = true;
    }
    if (!has_positive) {
      throw validation_error("query \"" + qid + "\" has no positive relevance in qrels");
    }
    const Vec hq = head.apply(embeddings.at(qid));
    const CandidateSet top = top_k(hq, transformed, static_cast<std::size_t>(k));
    std::vector<std::string> ranked;
    ranked.reserve(top.ranked.size());
    for (const ScoredDoc& sd : top.ranked) ranked.push_back(sd.doc_id);
    const double score = ndcg_at_k(ranked, rels, k);
    by_task[q.task].push_back(score);
    result.per_query[qid] = score;
  }
  double total = 0.0;
  for (const auto& [task, scores] : by_task) {
    double s = 0.0;
    for (double x : scores) s += x;
    const double mean = s / static_cast<double>(scores.size());
    result.per_task[task] = mean;
    result.queries_per_task[task] = scores.size();
    total += mean;
  }
  result.mean = by_task.empty() ? 0.0 : total / static_cast<double>(by_task.size());
  return result;
}

}  // namespace reasonforge
