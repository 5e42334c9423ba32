#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "reasonforge/error.hpp"
#include "reasonforge/retrieval.hpp"
#include "reasonforge/tokenize.hpp"

namespace reasonforge {

/// Lucene-style BM25: IDF(t) = ln((N - df + 0.5)/(df + 0.5) + 1), which keeps
/// every score nonnegative. The query side is a token bag; each distinct term
/// contributes once (no query-frequency factor).
class Bm25Index {
 public:
  explicit Bm25Index(double k1 = 1.2, double b = 0.75) : k1_(k1), b_(b) {
    if (k1 < 0 || b < 0 || b > 1) throw validation_error("invalid BM25 parameters");
  }

  void add_document(const std::string& id, const std::string& text) {
    add_document_tokens(id, tokenize(text));
  }

  void add_document_tokens(const std::string& id, const std::vector<std::string>& tokens) {
    if (id.empty()) throw validation_error("BM25 document with empty id");
    auto [it, inserted] = index_.emplace(id, ids_.size());
    if (!inserted) throw validation_error("duplicate BM25 document id \"" + id + "\"");
    ids_.push_back(id);
    doc_len_.push_back(tokens.size());
    total_len_ += tokens.size();
    std::map<std::string, int> tf;
    for (const std::string& t : tokens) tf[t]++;
    for (const auto& [term, count] : tf) {
      (void)count;
      doc_freq_[term]++;
    }
    tfs_.push_back(std::move(tf));
  }

  std::size_t size() const { return ids_.size(); }

  double avg_doc_len() const {
    return ids_.empty() ? 0.0 : static_cast<double>(total_len_) / static_cast<double>(ids_.size());
  }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  double score(const TokenBag& query_bag, const std::string& doc_id) const {
    auto it = index_.find(doc_id);
    if (it == index_.end()) throw validation_error("unknown BM25 document id \"" + doc_id + "\"");
    return score_idx(query_bag, it->second);
  }

  /// All documents ranked by score descending (ties by ascending id),
  /// truncated to n. Zero-score documents participate in the ranking.
  std::vector<ScoredDoc> top_n(const TokenBag& query_bag, std::size_t n) const {
    std::vector<std::size_t> order(ids_.size());
    std::vector<double> scores(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      order[i] = i;
      scores[i] = score_idx(query_bag, i);
    }
    auto better = [&](std::size_t a, std::size_t bb) {
      if (scores[a] != scores[bb]) return scores[a] > scores[bb];
      return ids_[a] < ids_[bb];
    };
    const std::size_t take = std::min(n, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                      order.end(), better);
    std::vector<ScoredDoc> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back({ids_[order[i]], scores[order[i]]});
    return out;
  }

 private:
  double score_idx(const TokenBag& query_bag, std::size_t idx) const {
    const double n_docs = static_cast<double>(ids_.size());
    const double len = static_cast<double>(doc_len_[idx]);
    const double avg = avg_doc_len();
    double s = 0.0;
    for (const auto& [term, weight] : query_bag) {
      (void)weight;
      auto tf_it = tfs_[idx].find(term);
      if (tf_it == tfs_[idx].end()) continue;
      const double tf = static_cast<double>(tf_it->second);
      const double df = static_cast<double>(doc_freq_.at(term));
      const double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
      const double denom = tf + k1_ * (1.0 - b_ + b_ * (avg > 0 ? len / avg : 0.0));
      s += idf * tf * (k1_ + 1.0) / denom;
    }
    return s;
  }

  double k1_;
  double b_;
  std::vector<std::string> ids_;
  std::vector<std::size_t> doc_len_;
  std::vector<std::map<std::string, int>> tfs_;
  std::map<std::string, int> doc_freq_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t total_len_ = 0;
};

}  // namespace reasonforge
