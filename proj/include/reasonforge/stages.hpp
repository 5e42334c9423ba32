#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "reasonforge/annotate.hpp"
#include "reasonforge/contamination.hpp"
#include "reasonforge/corpus.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/evalx.hpp"
#include "reasonforge/llm.hpp"
#include "reasonforge/manifest.hpp"
#include "reasonforge/retrieval.hpp"
#include "reasonforge/synthesis.hpp"
#include "reasonforge/trainer.hpp"

namespace reasonforge {
namespace stages {

/// All stage randomness funnels through one seed; each consumer derives its
/// own stream by a stable label so stages cannot perturb each other.
inline constexpr const char* kChatSeedLabelSynth = "synth.chat";
inline constexpr const char* kChatSeedLabelAnnotate = "annotate.chat";
inline constexpr const char* kChatSeedLabelReason = "reason.chat";
inline constexpr const char* kEmbedSeedLabel = "embed";

struct BackendOptions {
  std::string chat_backend = "mock";    // mock | remote
  std::string embed_backend = "mock";   // mock | remote
  int dim = 64;                          // mock embedding dimension
  int parallelism = 1;
  RemoteConfig remote = RemoteConfig::from_env();
};

inline std::unique_ptr<ChatBackend> make_chat_backend(const BackendOptions& opt,
                                                      std::uint64_t seed) {
  if (opt.chat_backend == "mock") return std::make_unique<MockChatBackend>(seed);
  if (opt.chat_backend == "remote") return std::make_unique<RemoteChatBackend>(opt.remote);
  throw validation_error("unknown chat backend \"" + opt.chat_backend + "\" (mock|remote)");
}

inline std::unique_ptr<EmbeddingBackend> make_embedding_backend(const BackendOptions& opt,
                                                                std::uint64_t seed) {
  if (opt.embed_backend == "mock") {
    return std::make_unique<MockEmbeddingBackend>(seed, opt.dim);
  }
  if (opt.embed_backend == "remote") return std::make_unique<RemoteEmbeddingBackend>(opt.remote);
  throw validation_error("unknown embedding backend \"" + opt.embed_backend + "\" (mock|remote)");
}

inline std::string chat_model(const BackendOptions& opt) {
  return opt.chat_backend == "mock" ? "mock" : opt.remote.model;
}

/// Exclusion-list file: one document id per line, blanks skipped.
inline std::unordered_set<std::string> load_id_list(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open id list: " + path.string());
  std::unordered_set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.insert(line);
  }
  return ids;
}

// ---------------------------------------------------------------------------
// synth: corpus filter + conditioned query generation
// ---------------------------------------------------------------------------

struct SynthOptions {
  std::filesystem::path corpus_file;
  std::string task;
  std::filesystem::path exclude_file;  // optional leakage guard
  std::uint64_t seed = 0;
  int queries_per_doc = 1;
  BackendOptions backend;
  std::filesystem::path out_file;
};

inline SynthReport run_synth(const SynthOptions& opt) {
  if (opt.task.empty()) throw validation_error("synth requires --task");
  Corpus corpus = load_corpus(opt.corpus_file);
  std::vector<std::pair<std::string, std::filesystem::path>> inputs{{"corpus", opt.corpus_file}};
  if (!opt.exclude_file.empty()) {
    corpus = apply_exclusions(corpus, load_id_list(opt.exclude_file));
    inputs.emplace_back("exclude", opt.exclude_file);
  }
  auto chat = make_chat_backend(opt.backend, derive_seed(opt.seed, kChatSeedLabelSynth));
  SynthReport report;
  const QuerySet queries =
      synthesize_queries(corpus, opt.task, opt.seed, *chat, chat_model(opt.backend), &report,
                         opt.queries_per_doc, opt.backend.parallelism);
  save_queries(queries, opt.out_file);
  std::filesystem::path report_path = opt.out_file;
  report_path += ".filter_report.json";
  write_file(report_path, filter_report_to_json(report.filter).dump(2) + "\n");

  Json cfg;
  cfg["task"] = opt.task;
  cfg["seed"] = opt.seed;
  cfg["queries_per_doc"] = opt.queries_per_doc;
  cfg["chat_backend"] = opt.backend.chat_backend;
  cfg["generated"] = report.generated;
  cfg["skipped_empty"] = report.skipped_empty;
  write_manifest(opt.out_file, make_manifest("synth", cfg, inputs, {opt.out_file, report_path}));
  return report;
}

// ---------------------------------------------------------------------------
// mine: embed and retrieve source-excluded candidates
// ---------------------------------------------------------------------------

struct MineOptions {
  std::filesystem::path queries_file;
  std::filesystem::path corpus_file;
  std::size_t k = 100;
  std::uint64_t seed = 0;
  BackendOptions backend;
  std::filesystem::path out_file;
  std::filesystem::path emb_out;  // optional: persist doc+query embeddings
};

inline void run_mine(const MineOptions& opt) {
  const Corpus corpus = load_corpus(opt.corpus_file);
  const QuerySet queries = load_queries(opt.queries_file, &corpus);
  if (corpus.size() == 0) throw validation_error("mine requires a non-empty corpus");
  auto embedder = make_embedding_backend(opt.backend, derive_seed(opt.seed, kEmbedSeedLabel));

  std::vector<std::pair<std::string, std::string>> doc_rows;
  doc_rows.reserve(corpus.size());
  for (const Document& d : corpus) doc_rows.emplace_back(d.id, d.text);
  const EmbeddingMatrix doc_matrix = embed_all(doc_rows, *embedder);

  JsonlWriter out(opt.out_file);
  std::vector<std::pair<std::string, std::string>> query_rows;
  query_rows.reserve(queries.size());
  for (const Query& q : queries) query_rows.emplace_back(q.id, q.text);
  const EmbeddingMatrix query_matrix = embed_all(query_rows, *embedder);
  for (const Query& q : queries) {
    const CandidateSet cs = mine_candidates(q, query_matrix.at(q.id), doc_matrix, opt.k);
    Json rec;
    rec["query_id"] = cs.query_id;
    rec["ranked"] = Json::array();
    for (const ScoredDoc& sd : cs.ranked) {
      Json e;
      e["doc_id"] = sd.doc_id;
      e["score"] = sd.score;
      rec["ranked"].push_back(e);
    }
    out.write(rec);
  }
  out.close();

  std::vector<std::filesystem::path> outputs{opt.out_file};
  if (!opt.emb_out.empty()) {
    EmbeddingMatrix all(doc_matrix.dim(), true);
    for (std::size_t i = 0; i < doc_matrix.size(); ++i) all.add(doc_matrix.id(i), doc_matrix.row(i));
    for (std::size_t i = 0; i < query_matrix.size(); ++i) {
      all.add(query_matrix.id(i), query_matrix.row(i));
    }
    save_embeddings(all, opt.emb_out);
    outputs.push_back(opt.emb_out);
  }

  Json cfg;
  cfg["k"] = opt.k;
  cfg["seed"] = opt.seed;
  cfg["embed_backend"] = opt.backend.embed_backend;
  cfg["dim"] = opt.backend.dim;
  const Json manifest = make_manifest(
      "mine", cfg, {{"queries", opt.queries_file}, {"corpus", opt.corpus_file}}, outputs);
  write_manifest(opt.out_file, manifest);
  if (!opt.emb_out.empty()) write_manifest(opt.emb_out, manifest);
}

// ---------------------------------------------------------------------------
// annotate: relevance scoring, sample assembly, reasoning-query expansion
// ---------------------------------------------------------------------------

struct AnnotateStageOptions {
  std::filesystem::path candidates_file;
  std::filesystem::path queries_file;
  std::filesystem::path corpus_file;
  AnnotateMode mode = AnnotateMode::reasoning;
  int threshold = 4;
  std::filesystem::path ledger_file;
  std::filesystem::path out_file;  // samples JSONL
  bool reason = true;              // fill reasoning_query on kept samples
  double temperature = 0.7;
  double reason_temperature = 1.0;
  int reason_max_new_tokens = 1024;
  std::uint64_t seed = 0;
  BackendOptions backend;
};

struct AnnotateStageReport {
  AnnotateReport annotate;
  AssembleReport assemble;
  std::size_t reasoned = 0;
};

/// Expands each sample's query through the step-back reasoning prompt; the
/// expansion is stored on the sample and used only for RI scoring downstream.
inline std::size_t expand_reasoning_queries(std::vector<TrainingSample>& samples,
                                            const QuerySet& queries, ChatBackend& backend,
                                            const std::string& model, double temperature,
                                            int max_new_tokens, int parallelism) {
  const std::function<std::string(const std::size_t&)> one = [&](const std::size_t& i) {
    const Query& q = queries.at(samples[i].query_id);
    const std::string prompt =
        render(get_template(TemplateName::query_reasoning), {{"Original Query", q.text}});
    return complete(ChatRequest::user_turn(model, prompt, temperature, max_new_tokens), backend);
  };
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].reasoning_query.empty()) indices.push_back(i);
  }
  const std::vector<std::string> expansions =
      parallel_map<std::size_t, std::string>(indices, one, parallelism);
  std::size_t filled = 0;
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (!expansions[j].empty()) {
      samples[indices[j]].reasoning_query = expansions[j];
      ++filled;
    }
  }
  return filled;
}

inline AnnotateStageReport run_annotate(const AnnotateStageOptions& opt) {
  if (opt.ledger_file.empty()) throw validation_error("annotate requires --ledger");
  const Corpus corpus = load_corpus(opt.corpus_file);
  const QuerySet queries = load_queries(opt.queries_file, &corpus);
  const std::vector<CandidateSet> candidates = load_candidates(opt.candidates_file);

  AnnotateStageReport report;
  auto chat = make_chat_backend(opt.backend, derive_seed(opt.seed, kChatSeedLabelAnnotate));
  const std::vector<Annotation> annotations =
      annotate_candidates(candidates, queries, corpus, opt.mode, *chat, chat_model(opt.backend),
                          opt.temperature, opt.ledger_file, &report.annotate);
  std::vector<TrainingSample> samples =
      assemble_samples(annotations, opt.threshold, &report.assemble);

  if (opt.reason) {
    auto reason_chat = make_chat_backend(opt.backend, derive_seed(opt.seed, kChatSeedLabelReason));
    report.reasoned = expand_reasoning_queries(samples, queries, *reason_chat,
                                               chat_model(opt.backend), opt.reason_temperature,
                                               opt.reason_max_new_tokens,
                                               opt.backend.parallelism);
  }
  save_samples(samples, opt.out_file);

  Json cfg;
  cfg["mode"] = to_string(opt.mode);
  cfg["threshold"] = opt.threshold;
  cfg["seed"] = opt.seed;
  cfg["reason"] = opt.reason;
  cfg["temperature"] = opt.temperature;
  cfg["chat_backend"] = opt.backend.chat_backend;
  cfg["annotated"] = report.annotate.annotated;
  cfg["reused"] = report.annotate.reused;
  cfg["unparseable"] = report.annotate.unparseable;
  cfg["kept"] = report.assemble.kept;
  cfg["dropped_no_positive"] = report.assemble.dropped_no_positive;
  write_manifest(opt.out_file,
                 make_manifest("annotate", cfg,
                               {{"candidates", opt.candidates_file},
                                {"queries", opt.queries_file},
                                {"corpus", opt.corpus_file}},
                               {opt.out_file}));
  return report;
}

// ---------------------------------------------------------------------------
// embedding assembly shared by train and eval
// ---------------------------------------------------------------------------

/// Builds the training matrix: document rows, raw query rows, then one
/// `<query_id>::rq` row per sample that carries a reasoning expansion.
inline EmbeddingMatrix build_train_embeddings(const Corpus& corpus, const QuerySet& queries,
                                              const std::vector<TrainingSample>& samples,
                                              EmbeddingBackend& backend) {
  std::vector<std::pair<std::string, std::string>> rows;
  rows.reserve(corpus.size() + queries.size() + samples.size());
  for (const Document& d : corpus) rows.emplace_back(d.id, d.text);
  for (const Query& q : queries) rows.emplace_back(q.id, q.text);
  for (const TrainingSample& s : samples) {
    if (!s.reasoning_query.empty()) {
      rows.emplace_back(s.query_id + kReasoningSuffix, s.reasoning_query);
    }
  }
  return embed_all(rows, backend);
}

/// Builds the evaluation matrix: document rows plus instruction-formatted
/// query rows (`Instruct: …\nQuery: …`) for tasks in the task table; queries
/// with unknown tasks are embedded raw.
inline EmbeddingMatrix build_eval_embeddings(const Corpus& corpus, const QuerySet& queries,
                                             EmbeddingBackend& backend) {
  std::vector<std::pair<std::string, std::string>> rows;
  rows.reserve(corpus.size() + queries.size());
  for (const Document& d : corpus) rows.emplace_back(d.id, d.text);
  for (const Query& q : queries) {
    const std::string text =
        is_known_task(q.task) ? format_query(task_info(q.task).task_instruction, q.text) : q.text;
    rows.emplace_back(q.id, text);
  }
  return embed_all(rows, backend);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainStageOptions {
  std::filesystem::path data_file;        // samples JSONL
  std::filesystem::path embeddings_file;  // precomputed matrix; empty = embed on the fly
  std::filesystem::path queries_file;     // needed when embedding on the fly
  std::filesystem::path corpus_file;      // needed when embedding on the fly
  TrainConfig config;
  BackendOptions backend;
  std::filesystem::path out_head;
  std::filesystem::path report_file;
  std::filesystem::path save_embeddings_file;  // optional dump of the matrix used
};

inline TrainResult run_train(const TrainStageOptions& opt) {
  validate(opt.config);
  const std::vector<TrainingSample> samples = load_samples(opt.data_file);
  std::vector<std::pair<std::string, std::filesystem::path>> inputs{{"data", opt.data_file}};

  EmbeddingMatrix emb;
  if (!opt.embeddings_file.empty()) {
    emb = load_embeddings(opt.embeddings_file);
    emb.renormalize();
    inputs.emplace_back("embeddings", opt.embeddings_file);
  } else {
    if (opt.corpus_file.empty() || opt.queries_file.empty()) {
      throw validation_error("train needs --embeddings, or --corpus and --queries to embed");
    }
    const Corpus corpus = load_corpus(opt.corpus_file);
    const QuerySet queries = load_queries(opt.queries_file, &corpus);
    auto embedder =
        make_embedding_backend(opt.backend, derive_seed(opt.config.seed, kEmbedSeedLabel));
    emb = build_train_embeddings(corpus, queries, samples, *embedder);
    inputs.emplace_back("corpus", opt.corpus_file);
    inputs.emplace_back("queries", opt.queries_file);
  }

  const TrainResult result = train(samples, emb, opt.config);
  save_head(result.head, opt.out_head);
  std::vector<std::filesystem::path> outputs{opt.out_head};
  if (!opt.report_file.empty()) {
    JsonlWriter w(opt.report_file);
    for (const BatchReport& r : result.reports) w.write(report_to_json(r));
    outputs.push_back(opt.report_file);
  }
  if (!opt.save_embeddings_file.empty()) {
    save_embeddings(emb, opt.save_embeddings_file);
    outputs.push_back(opt.save_embeddings_file);
  }

  Json cfg;
  cfg["tau"] = opt.config.tau;
  cfg["kappa"] = opt.config.kappa;
  cfg["warmup_steps"] = opt.config.warmup_steps;
  cfg["lr"] = opt.config.lr;
  cfg["lr_warmup_frac"] = opt.config.lr_warmup_frac;
  cfg["batch_size"] = opt.config.batch_size;
  cfg["negatives_per_query"] = opt.config.negatives_per_query;
  cfg["seed"] = opt.config.seed;
  cfg["epochs"] = opt.config.epochs;
  cfg["max_steps"] = opt.config.max_steps;
  cfg["objective"] = opt.config.objective;
  cfg["embed_backend"] = opt.backend.embed_backend;
  cfg["dim"] = opt.backend.dim;
  const Json manifest = make_manifest("train", cfg, inputs, outputs);
  for (const auto& p : outputs) write_manifest(p, manifest);
  return result;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalStageOptions {
  std::filesystem::path head_file;  // empty = identity head at the matrix dim
  std::filesystem::path queries_file;
  std::filesystem::path corpus_file;
  std::filesystem::path qrels_file;
  int k = 10;
  std::filesystem::path embeddings_file;  // precomputed; empty = embed on the fly
  std::uint64_t seed = 0;
  BackendOptions backend;
  std::filesystem::path out_file;
};

inline EvalResult run_eval(const EvalStageOptions& opt) {
  const Corpus corpus = load_corpus(opt.corpus_file);
  const QuerySet queries = load_queries(opt.queries_file);
  const Qrels qrels = load_qrels(opt.qrels_file);
  std::vector<std::pair<std::string, std::filesystem::path>> inputs{
      {"queries", opt.queries_file}, {"corpus", opt.corpus_file}, {"qrels", opt.qrels_file}};

  EmbeddingMatrix emb;
  if (!opt.embeddings_file.empty()) {
    emb = load_embeddings(opt.embeddings_file);
    emb.renormalize();
    inputs.emplace_back("embeddings", opt.embeddings_file);
  } else {
    auto embedder = make_embedding_backend(opt.backend, derive_seed(opt.seed, kEmbedSeedLabel));
    emb = build_eval_embeddings(corpus, queries, *embedder);
  }

  AdapterHead head = AdapterHead::identity(emb.dim());
  if (!opt.head_file.empty()) {
    head = load_head(opt.head_file);
    inputs.emplace_back("head", opt.head_file);
  }
  const EvalResult result = evaluate(head, emb, queries, corpus, qrels, opt.k);

  Json rep;
  rep["k"] = opt.k;
  rep["mean_ndcg"] = result.mean;
  rep["per_task"] = Json::object();
  for (const auto& [task, v] : result.per_task) rep["per_task"][task] = v;
  rep["queries_per_task"] = Json::object();
  for (const auto& [task, n] : result.queries_per_task) rep["queries_per_task"][task] = n;
  rep["per_query"] = Json::object();
  for (const auto& [qid, v] : result.per_query) rep["per_query"][qid] = v;
  write_file(opt.out_file, rep.dump(2) + "\n");

  Json cfg;
  cfg["k"] = opt.k;
  cfg["seed"] = opt.seed;
  cfg["embed_backend"] = opt.backend.embed_backend;
  cfg["dim"] = opt.backend.dim;
  write_manifest(opt.out_file, make_manifest("eval", cfg, inputs, {opt.out_file}));
  return result;
}

// ---------------------------------------------------------------------------
// contaminate
// ---------------------------------------------------------------------------

struct ContaminateStageOptions {
  std::filesystem::path train_file;
  std::filesystem::path test_file;
  std::filesystem::path domain_map_file;  // optional JSON {"task": "domain"}
  std::size_t top_n = 20;
  bool audit = false;
  std::filesystem::path out_file;
};

inline ContaminationSummary run_contaminate(const ContaminateStageOptions& opt) {
  const QuerySet train = load_queries(opt.train_file);
  const QuerySet test = load_queries(opt.test_file);
  std::vector<std::pair<std::string, std::filesystem::path>> inputs{
      {"train", opt.train_file}, {"test", opt.test_file}};

  OverlapOptions oopt;
  oopt.shortlist_size = opt.top_n;
  oopt.audit_exhaustive = opt.audit;
  if (!opt.domain_map_file.empty()) {
    const Json map = Json::parse(read_file(opt.domain_map_file));
    if (!map.is_object()) throw validation_error("domain map must be a JSON object");
    for (const auto& [task, dom] : map.items()) {
      if (!dom.is_string()) throw validation_error("domain map values must be strings");
      oopt.domain_overrides[task] = dom.get<std::string>();
    }
    inputs.emplace_back("domain_map", opt.domain_map_file);
  }
  const std::vector<OverlapResult> rows = max_overlap(test, train, oopt);
  const ContaminationSummary summary = summarize_overlap(rows);

  Json rep;
  rep["max_overall"] = summary.max_overall;
  rep["shortlist_misses"] = summary.shortlist_misses;
  rep["per_task"] = Json::object();
  for (const auto& [task, v] : summary.max_by_task) {
    Json e;
    e["max"] = v;
    e["query_id"] = summary.argmax_by_task.at(task);
    rep["per_task"][task] = e;
  }
  rep["rows"] = Json::array();
  for (const OverlapResult& r : rows) {
    Json e;
    e["test_query_id"] = r.test_query_id;
    e["task"] = r.test_task;
    e["best_train_id"] = r.best_train_id;
    e["similarity"] = r.similarity;
    if (opt.audit) e["shortlist_missed"] = r.shortlist_missed;
    rep["rows"].push_back(e);
  }
  write_file(opt.out_file, rep.dump(2) + "\n");

  Json cfg;
  cfg["top_n"] = opt.top_n;
  cfg["audit"] = opt.audit;
  write_manifest(opt.out_file, make_manifest("contaminate", cfg, inputs, {opt.out_file}));
  return summary;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

struct StatsStageOptions {
  std::filesystem::path queries_file;
  std::filesystem::path samples_file;
  std::filesystem::path corpus_file;
  std::filesystem::path out_file;  // empty = caller prints the JSON
};

inline DatasetStats run_stats(const StatsStageOptions& opt, Json* json_out = nullptr) {
  const Corpus corpus = load_corpus(opt.corpus_file);
  const QuerySet queries = load_queries(opt.queries_file, &corpus);
  const std::vector<TrainingSample> samples = load_samples(opt.samples_file);
  const DatasetStats stats = compute_stats(queries, samples, corpus);
  const Json rep = to_json(stats);
  if (json_out) *json_out = rep;
  if (!opt.out_file.empty()) {
    write_file(opt.out_file, rep.dump(2) + "\n");
    write_manifest(opt.out_file, make_manifest("stats", Json::object(),
                                               {{"queries", opt.queries_file},
                                                {"samples", opt.samples_file},
                                                {"corpus", opt.corpus_file}},
                                               {opt.out_file}));
  }
  return stats;
}

}  // namespace stages
}  // namespace reasonforge
