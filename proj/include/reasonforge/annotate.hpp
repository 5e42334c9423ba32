#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "reasonforge/corpus.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/llm.hpp"
#include "reasonforge/prompts.hpp"
#include "reasonforge/retrieval.hpp"

namespace reasonforge {

enum class AnnotateMode { reasoning, direct };

inline std::string to_string(AnnotateMode m) {
  return m == AnnotateMode::reasoning ? "reasoning" : "direct";
}

inline AnnotateMode annotate_mode_from_string(const std::string& s) {
  if (s == "reasoning") return AnnotateMode::reasoning;
  if (s == "direct") return AnnotateMode::direct;
  throw validation_error("unknown annotation mode \"" + s + "\" (expected reasoning or direct)");
}

struct Annotation {
  std::string query_id;
  std::string doc_id;
  int score = 0;  // 1..5
  std::string raw_response;
  AnnotateMode mode = AnnotateMode::reasoning;
};

class score_parse_error : public validation_error {
 public:
  score_parse_error(const std::string& what, std::string raw)
      : validation_error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

inline std::string build_annotation_prompt(const Query& query, const Document& doc,
                                           const std::string& task, AnnotateMode mode) {
  const TaskInfo& info = task_info(task);
  std::map<std::string, std::string> slots = {
      {"Relevance Definition", info.relevance_definition},
      {"Query Type", info.query_type},
      {"Doc Type", info.doc_type},
      {"Query", query.text},
      {"Doc", doc.text},
  };
  const TemplateName name = mode == AnnotateMode::reasoning ? TemplateName::annotate_reasoning
                                                            : TemplateName::annotate_direct;
  return render(get_template(name), slots);
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::optional<int> parse_bare_int(const std::string& s) {
  if (s.empty() || s.size() > 9) return std::nullopt;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  }
  return std::stoi(s);
}

}  // namespace detail

/// Extracts the score from the last complete <score>...</score> block; a
/// response that is a bare integer after trimming is also accepted.
inline int parse_score(const std::string& response) {
  static const std::string kOpen = "<score>";
  static const std::string kClose = "</score>";
  std::string inner;
  bool found = false;
  std::size_t search_end = std::string::npos;
  for (;;) {
    const std::size_t open = response.rfind(kOpen, search_end);
    if (open == std::string::npos) break;
    const std::size_t close = response.find(kClose, open + kOpen.size());
    if (close != std::string::npos) {
      inner = response.substr(open + kOpen.size(), close - open - kOpen.size());
      found = true;
      break;
    }
    if (open == 0) break;
    search_end = open - 1;
  }
  if (!found) {
    inner = response;  // bare-integer fallback
  }
  const std::string trimmed = detail::trim(inner);
  const std::optional<int> value = detail::parse_bare_int(trimmed);
  if (!value) {
    throw score_parse_error(found ? "score tag does not contain an integer"
                                  : "response has no <score> block and is not a bare integer",
                            response);
  }
  if (*value < 1 || *value > 5) {
    throw score_parse_error("score " + std::to_string(*value) + " outside 1..5", response);
  }
  return *value;
}

struct AnnotateReport {
  std::size_t annotated = 0;   // new annotations this run
  std::size_t reused = 0;      // pairs already in the ledger
  std::size_t unparseable = 0; // skipped pairs
};

inline std::vector<Annotation> load_annotation_ledger(const std::filesystem::path& path) {
  std::vector<Annotation> out;
  if (!std::filesystem::exists(path)) return out;
  for_each_jsonl(path, [&](const Json& rec, std::size_t lineno) {
    const std::string ctx = path.string() + ":" + std::to_string(lineno);
    Annotation a;
    a.query_id = require_string(rec, "query_id", ctx);
    a.doc_id = require_string(rec, "doc_id", ctx);
    if (!rec.contains("score") || !rec["score"].is_number_integer()) {
      throw validation_error(ctx + ": missing or non-integer field \"score\"");
    }
    a.score = rec["score"].get<int>();
    if (a.score < 1 || a.score > 5) throw validation_error(ctx + ": score outside 1..5");
    a.mode = annotate_mode_from_string(require_string(rec, "mode", ctx));
    if (rec.contains("raw_response") && rec["raw_response"].is_string()) {
      a.raw_response = rec["raw_response"].get<std::string>();
    }
    out.push_back(std::move(a));
  });
  return out;
}

inline Json annotation_to_json(const Annotation& a) {
  Json rec;
  rec["query_id"] = a.query_id;
  rec["doc_id"] = a.doc_id;
  rec["score"] = a.score;
  rec["mode"] = to_string(a.mode);
  rec["raw_response"] = a.raw_response;
  return rec;
}

/// Annotates every (query, candidate) pair not already in the ledger, in
/// candidate-rank order. New annotations are appended to the ledger as they
/// arrive so an interrupted run resumes without repeating paid calls.
/// Returns all annotations (ledgered + new) in candidate order.
inline std::vector<Annotation> annotate_candidates(
    const std::vector<CandidateSet>& candidates, const QuerySet& queries, const Corpus& corpus,
    AnnotateMode mode, ChatBackend& backend, const std::string& model, double temperature,
    const std::filesystem::path& ledger_path, AnnotateReport* report = nullptr) {
  std::unordered_map<std::string, Annotation> ledger;
  for (Annotation& a : load_annotation_ledger(ledger_path)) {
    ledger.emplace(a.query_id + "\x1f" + a.doc_id, std::move(a));
  }
  std::ofstream ledger_out(ledger_path, std::ios::binary | std::ios::app);
  if (!ledger_out) {
    throw validation_error("cannot open ledger for appending: " + ledger_path.string());
  }
  AnnotateReport local;
  std::vector<Annotation> out;
  for (const CandidateSet& cs : candidates) {
    const Query& query = queries.at(cs.query_id);
    for (const ScoredDoc& sd : cs.ranked) {
      const std::string key = cs.query_id + "\x1f" + sd.doc_id;
      auto it = ledger.find(key);
      if (it != ledger.end()) {
        local.reused++;
        out.push_back(it->second);
        continue;
      }
      const Document& doc = corpus.at(sd.doc_id);
      const std::string prompt = build_annotation_prompt(query, doc, query.task, mode);
      const std::string response =
          complete(ChatRequest::user_turn(model, prompt, temperature), backend);
      Annotation a;
      a.query_id = cs.query_id;
      a.doc_id = sd.doc_id;
      a.raw_response = response;
      a.mode = mode;
      try {
        a.score = parse_score(response);
      } catch (const score_parse_error&) {
        local.unparseable++;
        continue;
      }
      ledger_out << annotation_to_json(a).dump() << '\n';
      ledger_out.flush();
      ledger.emplace(key, a);
      out.push_back(std::move(a));
      local.annotated++;
    }
  }
  if (report) *report = local;
  return out;
}

struct AssembleReport {
  std::size_t kept = 0;
  std::size_t dropped_no_positive = 0;
};

/// Splits each query's annotated candidates at the positive threshold,
/// preserving the given per-query annotation order (candidate rank). Queries
/// whose annotations hold no score >= threshold are dropped.
inline std::vector<TrainingSample> assemble_samples(const std::vector<Annotation>& annotations,
                                                    int threshold_pos = 4,
                                                    AssembleReport* report = nullptr) {
  std::vector<std::string> query_order;
  std::unordered_map<std::string, std::vector<const Annotation*>> grouped;
  std::unordered_set<std::string> seen_pairs;
  for (const Annotation& a : annotations) {
    if (!seen_pairs.insert(a.query_id + "\x1f" + a.doc_id).second) continue;
    auto [it, inserted] = grouped.emplace(a.query_id, std::vector<const Annotation*>{});
    if (inserted) query_order.push_back(a.query_id);
    it->second.push_back(&a);
  }
  AssembleReport local;
  std::vector<TrainingSample> samples;
  for (const std::string& qid : query_order) {
    TrainingSample s;
    s.query_id = qid;
    for (const Annotation* a : grouped[qid]) {
      if (a->score >= threshold_pos) {
        s.positives.push_back(a->doc_id);
      } else {
        s.hard_negatives.push_back(a->doc_id);
      }
    }
    if (s.positives.empty()) {
      local.dropped_no_positive++;
      continue;
    }
    local.kept++;
    samples.push_back(std::move(s));
  }
  if (report) *report = local;
  return samples;
}

}  // namespace reasonforge
