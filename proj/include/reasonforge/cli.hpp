#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reasonforge/stages.hpp"
#include "reasonforge/version.hpp"

namespace reasonforge {
namespace cli {

namespace detail {

/// Options shared by every stage that talks to a backend. Remote credentials
/// come from RF_API_BASE / RF_API_KEY / RF_MODEL; flags override the base URL
/// and model only, never the key.
inline void add_backend_options(CLI::App* sub, stages::BackendOptions* opt, bool chat,
                                bool embed) {
  if (chat) {
    sub->add_option("--backend", opt->chat_backend, "Chat backend: mock or remote")
        ->capture_default_str();
  }
  if (embed) {
    sub->add_option(chat ? "--embed-backend" : "--backend", opt->embed_backend,
                    "Embedding backend: mock or remote")
        ->capture_default_str();
    sub->add_option("--dim", opt->dim, "Mock embedding dimension")->capture_default_str();
  }
  sub->add_option("--parallelism", opt->parallelism, "Concurrent backend calls")
      ->capture_default_str();
  sub->add_option("--api-base", opt->remote.base_url, "Remote API base URL (env RF_API_BASE)");
  sub->add_option("--model", opt->remote.model, "Remote model name (env RF_MODEL)");
}

inline void add_config_file(CLI::App* sub) {
  sub->add_option("--config", "Key=value config file; explicit flags take precedence");
}

/// CLI11 reads `set_config` files only while processing the root app, never a
/// named subcommand, so per-stage config files are applied by hand before the
/// real parse: each key must name a long option of the chosen subcommand, and
/// any option already given explicitly on the command line wins over the file.
inline void apply_config_file(CLI::App& app, std::vector<std::string>& args) {
  const std::function<bool(CLI::App*)> all = [](CLI::App*) { return true; };
  CLI::App* sub = nullptr;
  std::size_t subpos = 0;
  for (std::size_t i = 0; i < args.size() && sub == nullptr; ++i) {
    for (CLI::App* cand : app.get_subcommands(all)) {
      if (args[i] == cand->get_name()) {
        sub = cand;
        subpos = i;
        break;
      }
    }
  }
  if (sub == nullptr) return;

  std::string config_path;
  for (std::size_t i = subpos + 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty()) return;

  const auto explicitly_set = [&](const CLI::Option* opt) {
    for (const std::string& lname : opt->get_lnames()) {
      const std::string flag = "--" + lname;
      for (std::size_t i = subpos + 1; i < args.size(); ++i) {
        if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
      }
    }
    return false;
  };

  for (const CLI::ConfigItem& item : sub->get_config_formatter()->from_file(config_path)) {
    if (!item.parents.empty() || item.name == "config") {
      throw validation_error("config file: unsupported key '" + item.fullname() + "'");
    }
    CLI::Option* match = nullptr;
    for (CLI::Option* opt : sub->get_options()) {
      const std::vector<std::string>& lnames = opt->get_lnames();
      if (std::find(lnames.begin(), lnames.end(), item.name) != lnames.end()) {
        match = opt;
        break;
      }
    }
    if (match == nullptr) {
      throw validation_error("config file: unknown key '" + item.name + "' for subcommand '" +
                             sub->get_name() + "'");
    }
    if (explicitly_set(match)) continue;
    const std::string flag = "--" + match->get_lnames().front();
    if (item.inputs.empty()) {
      args.push_back(flag);
    } else {
      for (const std::string& value : item.inputs) args.push_back(flag + "=" + value);
    }
  }
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
  CLI::App app{"reason-forge: synthetic reasoning-retrieval data pipeline and adapter trainer"};
  app.set_version_flag("--version", std::string("reason-forge ") + kVersion);
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);

  // synth ---------------------------------------------------------------
  auto synth_opt = std::make_shared<stages::SynthOptions>();
  {
    CLI::App* sub = app.add_subcommand("synth", "Filter a corpus and generate queries from it");
    sub->add_option("--corpus", synth_opt->corpus_file, "Corpus JSONL")->required();
    sub->add_option("--task", synth_opt->task, "Task name (one of the 12 task table entries)")
        ->required();
    sub->add_option("--exclude", synth_opt->exclude_file,
                    "File of document ids to exclude before generation");
    sub->add_option("--seed", synth_opt->seed, "Master seed")->capture_default_str();
    sub->add_option("--qpd,--queries-per-doc", synth_opt->queries_per_doc,
                    "Queries generated per kept document")
        ->capture_default_str();
    sub->add_option("--out", synth_opt->out_file, "Output queries JSONL")->required();
    detail::add_backend_options(sub, &synth_opt->backend, true, false);
    detail::add_config_file(sub);
    sub->callback([synth_opt]() {
      const SynthReport r = stages::run_synth(*synth_opt);
      std::cout << "synth: kept=" << r.filter.kept << " dropped=" << r.filter.dropped
                << " unparseable=" << r.filter.unparseable << " generated=" << r.generated
                << " skipped_empty=" << r.skipped_empty << "\n";
    });
  }

  // mine ----------------------------------------------------------------
  auto mine_opt = std::make_shared<stages::MineOptions>();
  {
    CLI::App* sub = app.add_subcommand("mine", "Mine source-excluded candidates per query");
    sub->add_option("--queries", mine_opt->queries_file, "Queries JSONL")->required();
    sub->add_option("--corpus", mine_opt->corpus_file, "Corpus JSONL")->required();
    sub->add_option("--k", mine_opt->k, "Candidates per query")->capture_default_str();
    sub->add_option("--seed", mine_opt->seed, "Master seed")->capture_default_str();
    sub->add_option("--out", mine_opt->out_file, "Output candidates JSONL")->required();
    sub->add_option("--emb-out", mine_opt->emb_out,
                    "Optional path to persist the doc+query embedding matrix");
    detail::add_backend_options(sub, &mine_opt->backend, false, true);
    detail::add_config_file(sub);
    sub->callback([mine_opt]() {
      stages::run_mine(*mine_opt);
      std::cout << "mine: wrote " << mine_opt->out_file.string() << "\n";
    });
  }

  // annotate --------------------------------------------------------------
  auto ann_opt = std::make_shared<stages::AnnotateStageOptions>();
  auto ann_mode = std::make_shared<std::string>("reasoning");
  {
    CLI::App* sub =
        app.add_subcommand("annotate", "Score candidates and assemble training samples");
    sub->add_option("--candidates", ann_opt->candidates_file, "Candidates JSONL")->required();
    sub->add_option("--queries", ann_opt->queries_file, "Queries JSONL")->required();
    sub->add_option("--corpus", ann_opt->corpus_file, "Corpus JSONL")->required();
    sub->add_option("--mode", *ann_mode, "Annotation prompt: reasoning or direct")
        ->capture_default_str();
    sub->add_option("--threshold", ann_opt->threshold, "Positive score threshold (score >= t)")
        ->capture_default_str();
    sub->add_option("--ledger", ann_opt->ledger_file, "Append-only annotation ledger JSONL")
        ->required();
    sub->add_option("--out", ann_opt->out_file, "Output samples JSONL")->required();
    sub->add_option("--seed", ann_opt->seed, "Master seed")->capture_default_str();
    sub->add_option("--temperature", ann_opt->temperature, "Annotation sampling temperature")
        ->capture_default_str();
    sub->add_flag("--reason,!--no-reason", ann_opt->reason,
                  "Also generate reasoning-expanded queries for kept samples")
        ->capture_default_str();
    sub->add_option("--reason-temperature", ann_opt->reason_temperature,
                    "Reasoning expansion temperature")
        ->capture_default_str();
    sub->add_option("--reason-max-new-tokens", ann_opt->reason_max_new_tokens,
                    "Reasoning expansion token budget")
        ->capture_default_str();
    detail::add_backend_options(sub, &ann_opt->backend, true, false);
    detail::add_config_file(sub);
    sub->callback([ann_opt, ann_mode]() {
      ann_opt->mode = annotate_mode_from_string(*ann_mode);
      const stages::AnnotateStageReport r = stages::run_annotate(*ann_opt);
      std::cout << "annotate: annotated=" << r.annotate.annotated
                << " reused=" << r.annotate.reused << " unparseable=" << r.annotate.unparseable
                << " kept=" << r.assemble.kept
                << " dropped_no_positive=" << r.assemble.dropped_no_positive
                << " reasoned=" << r.reasoned << "\n";
    });
  }

  // train -----------------------------------------------------------------
  auto train_opt = std::make_shared<stages::TrainStageOptions>();
  {
    CLI::App* sub = app.add_subcommand("train", "Train the adapter head on frozen embeddings");
    sub->add_option("--data", train_opt->data_file, "Training samples JSONL")->required();
    sub->add_option("--embeddings", train_opt->embeddings_file,
                    "Precomputed embedding matrix (omit to embed --corpus/--queries)");
    sub->add_option("--queries", train_opt->queries_file, "Queries JSONL (on-the-fly embedding)");
    sub->add_option("--corpus", train_opt->corpus_file, "Corpus JSONL (on-the-fly embedding)");
    sub->add_option("--out", train_opt->out_head, "Output head binary")->required();
    sub->add_option("--report", train_opt->report_file, "Per-step report JSONL");
    sub->add_option("--save-embeddings", train_opt->save_embeddings_file,
                    "Persist the matrix used for training");
    TrainConfig& cfg = train_opt->config;
    sub->add_option("--tau", cfg.tau, "Softmax temperature")->capture_default_str();
    sub->add_option("--kappa", cfg.kappa, "Reasoning-intensity truncation")
        ->capture_default_str();
    sub->add_option("--warmup-steps", cfg.warmup_steps, "Uniform-weight warm-up steps")
        ->capture_default_str();
    sub->add_option("--lr", cfg.lr, "Learning rate")->capture_default_str();
    sub->add_option("--lr-warmup-frac", cfg.lr_warmup_frac,
                    "Fraction of planned steps for linear LR warm-up")
        ->capture_default_str();
    sub->add_option("--batch-size", cfg.batch_size, "Samples per step")->capture_default_str();
    sub->add_option("--negatives-per-query", cfg.negatives_per_query,
                    "Cap on negatives per training instance")
        ->capture_default_str();
    sub->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
    sub->add_option("--epochs", cfg.epochs, "Epochs over the dataset")->capture_default_str();
    sub->add_option("--max-steps", cfg.max_steps, "Hard step cap (0 = no cap)")
        ->capture_default_str();
    sub->add_option("--objective", cfg.objective, "ri_infonce or infonce")
        ->capture_default_str();
    detail::add_backend_options(sub, &train_opt->backend, false, true);
    detail::add_config_file(sub);
    sub->callback([train_opt]() {
      const TrainResult r = stages::run_train(*train_opt);
      const double last = r.reports.empty() ? 0.0 : r.reports.back().batch_loss;
      std::cout << "train: steps=" << r.reports.size() << " final_batch_loss=" << last << "\n";
    });
  }

  // eval ------------------------------------------------------------------
  auto eval_opt = std::make_shared<stages::EvalStageOptions>();
  {
    CLI::App* sub = app.add_subcommand("eval", "Rank the corpus per query and report nDCG@k");
    sub->add_option("--head", eval_opt->head_file, "Adapter head binary (omit for identity)");
    sub->add_option("--queries", eval_opt->queries_file, "Queries JSONL")->required();
    sub->add_option("--corpus", eval_opt->corpus_file, "Corpus JSONL")->required();
    sub->add_option("--qrels", eval_opt->qrels_file, "Qrels JSONL")->required();
    sub->add_option("--k", eval_opt->k, "Ranking depth")->capture_default_str();
    sub->add_option("--embeddings", eval_opt->embeddings_file,
                    "Precomputed embedding matrix (omit to embed on the fly)");
    sub->add_option("--seed", eval_opt->seed, "Master seed")->capture_default_str();
    sub->add_option("--out", eval_opt->out_file, "Output report JSON")->required();
    detail::add_backend_options(sub, &eval_opt->backend, false, true);
    detail::add_config_file(sub);
    sub->callback([eval_opt]() {
      const EvalResult r = stages::run_eval(*eval_opt);
      std::cout << "eval: mean_ndcg@" << eval_opt->k << "=" << r.mean << " over "
                << r.per_query.size() << " queries\n";
    });
  }

  // contaminate -------------------------------------------------------------
  auto cont_opt = std::make_shared<stages::ContaminateStageOptions>();
  {
    CLI::App* sub =
        app.add_subcommand("contaminate", "Audit train/test overlap by weighted Jaccard");
    sub->add_option("--train", cont_opt->train_file, "Train queries JSONL")->required();
    sub->add_option("--test", cont_opt->test_file, "Test queries JSONL")->required();
    sub->add_option("--domain-map", cont_opt->domain_map_file,
                    "JSON object mapping task name to domain label");
    sub->add_option("--top-n", cont_opt->top_n, "BM25 shortlist depth")->capture_default_str();
    sub->add_flag("--audit", cont_opt->audit, "Also scan the full pool to check the shortlist");
    sub->add_option("--out", cont_opt->out_file, "Output report JSON")->required();
    detail::add_config_file(sub);
    sub->callback([cont_opt]() {
      const ContaminationSummary s = stages::run_contaminate(*cont_opt);
      std::cout << "contaminate: max_overall=" << s.max_overall
                << " shortlist_misses=" << s.shortlist_misses << "\n";
    });
  }

  // stats -------------------------------------------------------------------
  auto stats_opt = std::make_shared<stages::StatsStageOptions>();
  {
    CLI::App* sub = app.add_subcommand("stats", "Dataset statistics per task");
    sub->add_option("--queries", stats_opt->queries_file, "Queries JSONL")->required();
    sub->add_option("--samples", stats_opt->samples_file, "Samples JSONL")->required();
    sub->add_option("--corpus", stats_opt->corpus_file, "Corpus JSONL")->required();
    sub->add_option("--out", stats_opt->out_file, "Output JSON (omit to print to stdout)");
    detail::add_config_file(sub);
    sub->callback([stats_opt]() {
      Json rep;
      stages::run_stats(*stats_opt, &rep);
      if (stats_opt->out_file.empty()) std::cout << rep.dump(2) << "\n";
    });
  }

  try {
    if (argc > 0) app.name(argv[0]);
    std::vector<std::string> args;
    if (argc > 1) args.reserve(static_cast<std::size_t>(argc) - 1);
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    detail::apply_config_file(app, args);
    std::reverse(args.begin(), args.end());  // App::parse(vector) takes reversed args
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const service_error& e) {
    std::cerr << "service error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace cli
}  // namespace reasonforge
