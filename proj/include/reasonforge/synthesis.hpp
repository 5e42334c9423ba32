#pragma once

#include <cctype>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "reasonforge/corpus.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/llm.hpp"
#include "reasonforge/prompts.hpp"
#include "reasonforge/rng.hpp"

namespace reasonforge {

enum class LengthBucket { lt100, b100_200, b200_300, b300_400, b400_500, gte500 };
enum class EducationLevel { high_school, college, phd };

inline constexpr int kLengthBucketCount = 6;
inline constexpr int kEducationLevelCount = 3;

/// Serialized token, used in Query JSONL records.
inline std::string to_string(LengthBucket b) {
  switch (b) {
    case LengthBucket::lt100: return "lt100";
    case LengthBucket::b100_200: return "100_200";
    case LengthBucket::b200_300: return "200_300";
    case LengthBucket::b300_400: return "300_400";
    case LengthBucket::b400_500: return "400_500";
    case LengthBucket::gte500: return "gte500";
  }
  throw validation_error("invalid length bucket");
}

inline std::string to_string(EducationLevel e) {
  switch (e) {
    case EducationLevel::high_school: return "high_school";
    case EducationLevel::college: return "college";
    case EducationLevel::phd: return "phd";
  }
  throw validation_error("invalid education level");
}

/// English phrase substituted into the generation prompt's {Length} slot.
inline std::string length_phrase(LengthBucket b) {
  switch (b) {
    case LengthBucket::lt100: return "less than 100 words";
    case LengthBucket::b100_200: return "100 to 200 words";
    case LengthBucket::b200_300: return "200 to 300 words";
    case LengthBucket::b300_400: return "300 to 400 words";
    case LengthBucket::b400_500: return "400 to 500 words";
    case LengthBucket::gte500: return "at least 500 words";
  }
  throw validation_error("invalid length bucket");
}

/// English phrase substituted into the generation prompt's {Difficulty} slot.
inline std::string education_phrase(EducationLevel e) {
  switch (e) {
    case EducationLevel::high_school: return "high school";
    case EducationLevel::college: return "college";
    case EducationLevel::phd: return "phd";
  }
  throw validation_error("invalid education level");
}

inline LengthBucket length_bucket_from_index(std::uint64_t i) {
  switch (i) {
    case 0: return LengthBucket::lt100;
    case 1: return LengthBucket::b100_200;
    case 2: return LengthBucket::b200_300;
    case 3: return LengthBucket::b300_400;
    case 4: return LengthBucket::b400_500;
    case 5: return LengthBucket::gte500;
  }
  throw validation_error("length bucket index out of range");
}

inline EducationLevel education_level_from_index(std::uint64_t i) {
  switch (i) {
    case 0: return EducationLevel::high_school;
    case 1: return EducationLevel::college;
    case 2: return EducationLevel::phd;
  }
  throw validation_error("education level index out of range");
}

struct GenerationPlan {
  std::string task;
  std::string generation_instruction;
  std::string output_content;
  LengthBucket length_bucket = LengthBucket::lt100;
  EducationLevel education_level = EducationLevel::high_school;
  std::uint64_t seed = 0;
};

/// Uniform independent draws: length bucket 1/6 each, education level 1/3
/// each. Instruction strings come from the per-task table; unknown task is a
/// hard error.
inline GenerationPlan sample_plan(std::uint64_t rng_seed, const std::string& task) {
  const TaskInfo& info = task_info(task);
  Rng rng(rng_seed);
  GenerationPlan plan;
  plan.task = task;
  plan.generation_instruction = info.generation_instruction;
  plan.output_content = info.output_content;
  plan.length_bucket = length_bucket_from_index(rng.bounded(kLengthBucketCount));
  plan.education_level = education_level_from_index(rng.bounded(kEducationLevelCount));
  plan.seed = rng_seed;
  return plan;
}

struct FilterReport {
  std::size_t kept = 0;
  std::size_t dropped = 0;
  std::size_t unparseable = 0;  // fail-open: retained but neither yes nor no
};

inline Json filter_report_to_json(const FilterReport& r) {
  Json j;
  j["kept"] = r.kept;
  j["dropped"] = r.dropped;
  j["unparseable"] = r.unparseable;
  return j;
}

namespace detail {

inline std::string trim_casefold(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out = s.substr(b, e - b);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace detail

/// Keeps exactly the documents whose completion trims and case-folds to
/// "yes". Anything that is neither "yes" nor "no" is retained and counted as
/// unparseable (fail-open). Output order and content are a subsequence of the
/// input.
inline Corpus filter_corpus(const Corpus& corpus, const std::string& domain_label,
                            ChatBackend& backend, const std::string& model,
                            FilterReport* report = nullptr, double temperature = 1.0,
                            int parallelism = 1) {
  if (domain_label.empty()) throw validation_error("domain label must be non-empty");
  std::vector<std::size_t> indices(corpus.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  std::vector<const Document*> docs;
  docs.reserve(corpus.size());
  for (const Document& d : corpus) docs.push_back(&d);

  const std::function<std::string(const std::size_t&)> one = [&](const std::size_t& i) {
    const std::string prompt = render(get_template(TemplateName::corpus_filter),
                                      {{"Domain", domain_label}, {"Doc", docs[i]->text}});
    return complete(ChatRequest::user_turn(model, prompt, temperature), backend);
  };
  const std::vector<std::string> replies = parallel_map<std::size_t, std::string>(
      indices, one, parallelism);

  FilterReport local;
  Corpus out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::string verdict = detail::trim_casefold(replies[i]);
    if (verdict == "yes") {
      out.add(*docs[i]);
      ++local.kept;
    } else if (verdict == "no") {
      ++local.dropped;
    } else {
      out.add(*docs[i]);
      ++local.kept;
      ++local.unparseable;
    }
  }
  if (report) *report = local;
  return out;
}

/// Renders the conditioned generation prompt and wraps the completion into a
/// Query seeded by `doc`. Empty completion means the query is discarded
/// (returns nullopt; the caller counts skips).
inline std::optional<Query> generate_query(const Document& doc, const GenerationPlan& plan,
                                           ChatBackend& backend, const std::string& model,
                                           const std::string& query_id,
                                           double temperature = 1.0) {
  if (doc.text.empty()) throw validation_error("document \"" + doc.id + "\" has empty text");
  if (query_id.empty()) throw validation_error("query id must be non-empty");
  const std::string prompt =
      render(get_template(TemplateName::query_gen),
             {{"Generation Instruction", plan.generation_instruction},
              {"Input Content", doc.text},
              {"Output Content", plan.output_content},
              {"Length", length_phrase(plan.length_bucket)},
              {"Difficulty", education_phrase(plan.education_level)}});
  const std::string completion =
      complete(ChatRequest::user_turn(model, prompt, temperature), backend);
  if (completion.empty()) return std::nullopt;
  Query q;
  q.id = query_id;
  q.text = completion;
  q.task = plan.task;
  q.source_doc_id = doc.id;
  q.length_bucket = to_string(plan.length_bucket);
  q.education_level = to_string(plan.education_level);
  return q;
}

struct SynthReport {
  FilterReport filter;
  std::size_t generated = 0;
  std::size_t skipped_empty = 0;
};

/// Filter then generate, one pass. `queries_per_doc` plans are drawn per kept
/// document with sub-seeds derived from (seed, doc id, slot index). Generation
/// calls may run in parallel; assembly preserves document order.
inline QuerySet synthesize_queries(const Corpus& corpus, const std::string& task,
                                   std::uint64_t seed, ChatBackend& backend,
                                   const std::string& model, SynthReport* report = nullptr,
                                   int queries_per_doc = 1, int parallelism = 1,
                                   double temperature = 1.0) {
  if (queries_per_doc < 1) throw validation_error("queries_per_doc must be >= 1");
  const TaskInfo& info = task_info(task);

  Corpus scoped;
  for (const Document& d : corpus) {
    if (d.task == task) scoped.add(d);
  }

  SynthReport local;
  const Corpus kept =
      filter_corpus(scoped, info.domain, backend, model, &local.filter, temperature, parallelism);

  struct Job {
    const Document* doc;
    GenerationPlan plan;
    std::string query_id;
  };
  std::vector<Job> jobs;
  for (const Document& d : kept) {
    for (int i = 0; i < queries_per_doc; ++i) {
      Job job;
      job.doc = &d;
      job.plan = sample_plan(derive_seed(seed, "plan:" + d.id + ":" + std::to_string(i)), task);
      job.query_id = "q_" + d.id + "_" + std::to_string(i);
      jobs.push_back(std::move(job));
    }
  }
  const std::function<std::optional<Query>(const Job&)> one = [&](const Job& job) {
    return generate_query(*job.doc, job.plan, backend, model, job.query_id, temperature);
  };
  const std::vector<std::optional<Query>> generated =
      parallel_map<Job, std::optional<Query>>(jobs, one, parallelism);

  QuerySet out;
  for (const std::optional<Query>& q : generated) {
    if (q.has_value()) {
      out.add(*q);
      ++local.generated;
    } else {
      ++local.skipped_empty;
    }
  }
  if (report) *report = local;
  return out;
}

/// Leakage guard: drops every document whose id appears in `excluded` before
/// any generation happens.
inline Corpus apply_exclusions(const Corpus& corpus,
                               const std::unordered_set<std::string>& excluded) {
  Corpus out;
  for (const Document& d : corpus) {
    if (excluded.count(d.id) == 0) out.add(d);
  }
  return out;
}

}  // namespace reasonforge
