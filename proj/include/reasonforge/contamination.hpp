#pragma once

#include <map>
#include <string>
#include <vector>

#include "reasonforge/bm25.hpp"
#include "reasonforge/corpus.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/prompts.hpp"
#include "reasonforge/tokenize.hpp"

namespace reasonforge {

/// Weighted Jaccard over term-frequency bags: sum(min)/sum(max) across the
/// union of keys. Both bags empty yields 0.
inline double weighted_jaccard(const TokenBag& a, const TokenBag& b) {
  double num = 0.0;
  double den = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    double wa = 0.0;
    double wb = 0.0;
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      wa = (ia++)->second;
    } else if (ia == a.end() || ib->first < ia->first) {
      wb = (ib++)->second;
    } else {
      wa = (ia++)->second;
      wb = (ib++)->second;
    }
    if (wa < 0.0 || wb < 0.0) throw validation_error("weighted_jaccard requires non-negative weights");
    num += std::min(wa, wb);
    den += std::max(wa, wb);
  }
  if (den == 0.0) return 0.0;
  return num / den;
}

/// Domain label used to restrict the train-side pool. Known tasks map through
/// the task table; unknown tasks fall back to the task name itself so ad-hoc
/// fixtures still partition sensibly.
inline std::string domain_of_task(const std::string& task,
                                  const std::map<std::string, std::string>& overrides = {}) {
  if (auto it = overrides.find(task); it != overrides.end()) return it->second;
  if (is_known_task(task)) return task_info(task).domain;
  return task;
}

struct OverlapResult {
  std::string test_query_id;
  std::string test_task;
  std::string best_train_id;  // empty when the filtered train pool is empty
  double similarity = 0.0;
  bool shortlist_missed = false;  // audit only: exhaustive max exceeded shortlist max
};

struct OverlapOptions {
  std::size_t shortlist_size = 20;  // BM25 prefilter depth
  bool audit_exhaustive = false;    // also scan the full filtered pool
  std::map<std::string, std::string> domain_overrides;
};

/// Per test query: BM25-shortlist the same-domain train queries, then take the
/// maximum weighted Jaccard over the shortlist. Ties keep the first candidate
/// in shortlist order. An empty filtered pool yields similarity 0 and an empty
/// best_train_id.
inline std::vector<OverlapResult> max_overlap(const QuerySet& test_queries,
                                              const QuerySet& train_queries,
                                              const OverlapOptions& opt = {}) {
  if (opt.shortlist_size == 0) throw validation_error("shortlist_size must be >= 1");

  struct DomainPool {
    Bm25Index index;
    std::vector<std::string> ids;  // train query ids in insertion order
  };
  std::map<std::string, DomainPool> pools;
  std::map<std::string, TokenBag> train_bags;
  for (const Query& q : train_queries) {
    const std::string dom = domain_of_task(q.task, opt.domain_overrides);
    DomainPool& pool = pools[dom];
    pool.index.add_document(q.id, q.text);
    pool.ids.push_back(q.id);
    train_bags.emplace(q.id, token_bag(q.text));
  }

  std::vector<OverlapResult> results;
  results.reserve(test_queries.size());
  for (const Query& q : test_queries) {
    OverlapResult r;
    r.test_query_id = q.id;
    r.test_task = q.task;
    const std::string dom = domain_of_task(q.task, opt.domain_overrides);
    auto pit = pools.find(dom);
    if (pit == pools.end() || pit->second.ids.empty()) {
      results.push_back(std::move(r));
      continue;
    }
    const TokenBag qbag = token_bag(q.text);
    const auto shortlist = pit->second.index.top_n(qbag, opt.shortlist_size);
    for (const auto& hit : shortlist) {
      const double sim = weighted_jaccard(qbag, train_bags.at(hit.doc_id));
      if (sim > r.similarity || r.best_train_id.empty()) {
        r.similarity = sim;
        r.best_train_id = hit.doc_id;
      }
    }
    if (opt.audit_exhaustive) {
      double best = 0.0;
      for (const std::string& tid : pit->second.ids) {
        best = std::max(best, weighted_jaccard(qbag, train_bags.at(tid)));
      }
      if (best > r.similarity) r.shortlist_missed = true;
    }
    results.push_back(std::move(r));
  }
  return results;
}

struct ContaminationSummary {
  std::map<std::string, double> max_by_task;  // max similarity per test task
  std::map<std::string, std::string> argmax_by_task;
  double max_overall = 0.0;
  std::size_t shortlist_misses = 0;
};

inline ContaminationSummary summarize_overlap(const std::vector<OverlapResult>& rows) {
  ContaminationSummary s;
  for (const OverlapResult& r : rows) {
    auto [it, inserted] = s.max_by_task.emplace(r.test_task, r.similarity);
    if (inserted) {
      s.argmax_by_task[r.test_task] = r.test_query_id;
    } else if (r.similarity > it->second) {
      it->second = r.similarity;
      s.argmax_by_task[r.test_task] = r.test_query_id;
    }
    s.max_overall = std::max(s.max_overall, r.similarity);
    if (r.shortlist_missed) ++s.shortlist_misses;
  }
  return s;
}

}  // namespace reasonforge
