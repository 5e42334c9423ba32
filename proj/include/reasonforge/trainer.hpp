#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "reasonforge/corpus.hpp"
#include "reasonforge/error.hpp"
#include "reasonforge/retrieval.hpp"
#include "reasonforge/rng.hpp"
#include "reasonforge/vecmath.hpp"

namespace reasonforge {

/// Embedding-row key suffix for a query's reasoning-augmented form.
inline constexpr const char* kReasoningSuffix = "::rq";

inline constexpr char kHeadMagic[8] = {'R', 'F', 'H', 'E', 'A', 'D', '0', '1'};

/// Trainable square map plus bias over frozen base embeddings;
/// apply(v) = L2-normalize(W v + b). Norms below kNormEps skip the division
/// so gradients stay finite.
struct AdapterHead {
  int dim = 0;
  std::vector<double> W;  // row-major dim x dim
  Vec b;

  static AdapterHead identity(int dim) {
    if (dim <= 0) throw validation_error("head dim must be positive");
    AdapterHead h;
    h.dim = dim;
    h.W.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    h.b.assign(dim, 0.0);
    for (int i = 0; i < dim; ++i) h.W[static_cast<std::size_t>(i) * dim + i] = 1.0;
    return h;
  }

  Vec affine(const Vec& v) const {
    if (v.size() != static_cast<std::size_t>(dim)) {
      throw validation_error("head input dimension mismatch");
    }
    Vec u(dim, 0.0);
    for (int r = 0; r < dim; ++r) {
      const double* row = &W[static_cast<std::size_t>(r) * dim];
      double s = b[r];
      for (int c = 0; c < dim; ++c) s += row[c] * v[c];
      u[r] = s;
    }
    return u;
  }

  Vec apply(const Vec& v, bool* degenerate = nullptr) const {
    Vec u = affine(v);
    const bool ok = normalize_inplace(u);
    if (degenerate) *degenerate = !ok;
    return u;
  }
};

struct TrainConfig {
  double tau = 0.02;
  double kappa = 5.0;
  int warmup_steps = 100;  // plain-InfoNCE steps before RI weighting kicks in
  double lr = 1e-4;
  int batch_size = 8;
  int negatives_per_query = 1023;
  std::uint64_t seed = 0;
  int epochs = 1;
  std::string objective = "ri_infonce";  // "ri_infonce" or "infonce"
  int max_steps = 0;                     // 0 = run all epochs
  double lr_warmup_frac = 0.1;           // linear LR ramp over this fraction of planned steps
};

inline void validate(const TrainConfig& cfg) {
  if (!(cfg.tau > 0)) throw validation_error("tau must be positive");
  if (!(cfg.kappa > 0)) throw validation_error("kappa must be positive");
  if (cfg.warmup_steps < 0) throw validation_error("warmup_steps must be >= 0");
  if (!(cfg.lr > 0)) throw validation_error("lr must be positive");
  if (cfg.batch_size < 1) throw validation_error("batch_size must be >= 1");
  if (cfg.negatives_per_query < 1) throw validation_error("negatives_per_query must be >= 1");
  if (cfg.epochs < 1) throw validation_error("epochs must be >= 1");
  if (cfg.objective != "ri_infonce" && cfg.objective != "infonce") {
    throw validation_error("objective must be \"ri_infonce\" or \"infonce\"");
  }
  if (cfg.max_steps < 0) throw validation_error("max_steps must be >= 0");
  if (!(cfg.lr_warmup_frac >= 0.0 && cfg.lr_warmup_frac <= 1.0)) {
    throw validation_error("lr_warmup_frac must lie in [0,1]");
  }
}

struct SampleReport {
  std::string query_id;
  double loss = 0.0;           // InfoNCE over the instance's own candidate set
  double loss_reasoned = 0.0;  // same set scored by the reasoning-augmented query
  double ri = 1.0;
  double weight = 0.0;
};

struct BatchReport {
  int step = 0;
  std::vector<SampleReport> per_sample;
  double batch_loss = 0.0;
  double grad_norm = 0.0;
  std::string mode;  // "warmup_infonce" or "ri_infonce"
  bool degenerate_normalize = false;
};

namespace detail {

/// Loss and softmax probabilities over D = {positive} ∪ negatives via the
/// max-shifted log-sum-exp form. probs (when requested) holds the positive
/// first, then the negatives in order. Tolerates an empty negative list
/// (singleton softmax, loss 0) for the degenerate RI path; public callers
/// enforce at least one negative.
inline double info_nce_core(const Vec& q, const Vec& pos, const std::vector<const Vec*>& negs,
                            double tau, std::vector<double>* probs = nullptr) {
  const std::size_t n = negs.size() + 1;
  std::vector<double> sims(n);
  sims[0] = dot(q, pos) / tau;
  for (std::size_t i = 0; i < negs.size(); ++i) sims[i + 1] = dot(q, *negs[i]) / tau;
  double m = sims[0];
  for (double s : sims) m = std::max(m, s);
  double sum = 0.0;
  for (double s : sims) sum += std::exp(s - m);
  const double lse = m + std::log(sum);
  if (probs) {
    probs->resize(n);
    for (std::size_t i = 0; i < n; ++i) (*probs)[i] = std::exp(sims[i] - lse);
  }
  return lse - sims[0];
}

}  // namespace detail

/// InfoNCE: -log( exp(<q,d+>/tau) / sum over D of exp(<q,d'>/tau) ).
inline double info_nce(const Vec& query_vec, const Vec& positive_vec,
                       const std::vector<Vec>& negative_vecs, double tau) {
  if (!(tau > 0)) throw validation_error("tau must be positive");
  if (negative_vecs.empty()) throw validation_error("info_nce requires at least one negative");
  std::vector<const Vec*> negs;
  negs.reserve(negative_vecs.size());
  for (const Vec& v : negative_vecs) negs.push_back(&v);
  return detail::info_nce_core(query_vec, positive_vec, negs, tau);
}

/// RI(s) = min(loss_plain / loss_reasoned, kappa); a vanishing reasoned loss
/// means reasoning resolved the sample completely, capped at kappa.
inline double reasoning_intensity(double loss_plain, double loss_reasoned, double kappa) {
  if (loss_plain < 0 || loss_reasoned < 0) {
    throw validation_error("reasoning_intensity requires nonnegative losses");
  }
  if (!(kappa > 0)) throw validation_error("kappa must be positive");
  if (loss_reasoned < 1e-12) return kappa;
  return std::min(loss_plain / loss_reasoned, kappa);
}

/// w_i = ri_i / sum(ri).
inline std::vector<double> batch_weights(const std::vector<double>& ri_scores) {
  if (ri_scores.empty()) throw validation_error("batch_weights requires a non-empty batch");
  double sum = 0.0;
  for (double r : ri_scores) {
    if (!(r > 0)) throw validation_error("reasoning-intensity scores must be positive");
    sum += r;
  }
  std::vector<double> w(ri_scores.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = ri_scores[i] / sum;
  return w;
}

/// One single-positive training instance carved out of a multi-positive
/// sample; sibling positives are barred from this instance's negative pool.
struct ExpandedSample {
  std::string query_id;
  std::string positive;
  std::vector<std::string> negatives;          // the sample's own hard negatives
  std::vector<std::string> sibling_positives;  // other positives of the sample
  std::string reasoning_query;
};

inline std::vector<ExpandedSample> multi_positive_expand(const TrainingSample& s) {
  if (s.positives.empty()) throw validation_error("sample \"" + s.query_id + "\" has no positives");
  std::vector<ExpandedSample> out;
  out.reserve(s.positives.size());
  for (std::size_t i = 0; i < s.positives.size(); ++i) {
    ExpandedSample e;
    e.query_id = s.query_id;
    e.positive = s.positives[i];
    e.negatives = s.hard_negatives;
    for (std::size_t j = 0; j < s.positives.size(); ++j) {
      if (j != i) e.sibling_positives.push_back(s.positives[j]);
    }
    e.reasoning_query = s.reasoning_query;
    out.push_back(std::move(e));
  }
  return out;
}

/// A batch resolved against the embedding matrix: unique query/doc forward
/// tables plus per-instance index lists. Negative priority per instance: the
/// sample's own hard negatives (candidate order), then other in-batch
/// instances' positives and hard negatives in batch order, deduplicated,
/// excluding the instance's own and sibling positives, capped at
/// negatives_per_query.
struct ExpandedBatch {
  struct Inst {
    std::size_t query = 0;     // index into query tables
    std::size_t positive = 0;  // index into doc tables
    std::vector<std::size_t> negatives;      // training negatives
    std::vector<std::size_t> own_negatives;  // RI candidate set (own hard negatives, capped)
  };
  std::vector<std::string> query_ids;
  std::vector<const Vec*> query_base;
  std::vector<const Vec*> reasoning_base;  // nullptr when the row is absent
  std::vector<std::string> doc_ids;
  std::vector<const Vec*> doc_base;
  std::vector<Inst> instances;
};

inline ExpandedBatch expand_batch(const std::vector<TrainingSample>& batch,
                                  const EmbeddingMatrix& emb, const TrainConfig& cfg,
                                  bool require_reasoning) {
  if (batch.empty()) throw validation_error("empty training batch");
  ExpandedBatch eb;
  std::unordered_map<std::string, std::size_t> query_idx;
  std::unordered_map<std::string, std::size_t> doc_idx;
  auto doc_index = [&](const std::string& id) {
    auto [it, inserted] = doc_idx.emplace(id, eb.doc_ids.size());
    if (inserted) {
      eb.doc_ids.push_back(id);
      eb.doc_base.push_back(&emb.at(id));
    }
    return it->second;
  };
  const std::size_t cap = static_cast<std::size_t>(cfg.negatives_per_query);

  struct Raw {
    std::size_t query;
    std::size_t positive;
    std::vector<std::size_t> own_negs;
    std::vector<std::size_t> siblings;
  };
  std::vector<Raw> raw;
  for (const TrainingSample& s : batch) {
    auto [qit, qinserted] = query_idx.emplace(s.query_id, eb.query_ids.size());
    if (qinserted) {
      eb.query_ids.push_back(s.query_id);
      eb.query_base.push_back(&emb.at(s.query_id));
      eb.reasoning_base.push_back(emb.find(s.query_id + kReasoningSuffix));
      if (require_reasoning && eb.reasoning_base.back() == nullptr) {
        throw validation_error("sample \"" + s.query_id +
                               "\" has no reasoning query embedding (expected row \"" +
                               s.query_id + kReasoningSuffix + "\")");
      }
    }
    const std::size_t qi = qit->second;
    for (const ExpandedSample& e : multi_positive_expand(s)) {
      Raw r;
      r.query = qi;
      r.positive = doc_index(e.positive);
      for (std::size_t k = 0; k < e.negatives.size() && k < cap; ++k) {
        r.own_negs.push_back(doc_index(e.negatives[k]));
      }
      for (const std::string& sib : e.sibling_positives) r.siblings.push_back(doc_index(sib));
      raw.push_back(std::move(r));
    }
  }

  for (std::size_t i = 0; i < raw.size(); ++i) {
    ExpandedBatch::Inst inst;
    inst.query = raw[i].query;
    inst.positive = raw[i].positive;
    inst.own_negatives = raw[i].own_negs;
    std::unordered_set<std::size_t> blocked;
    blocked.insert(raw[i].positive);
    for (std::size_t sib : raw[i].siblings) blocked.insert(sib);
    auto push = [&](std::size_t d) {
      if (inst.negatives.size() >= cap) return;
      if (blocked.insert(d).second) inst.negatives.push_back(d);
    };
    for (std::size_t d : raw[i].own_negs) push(d);
    for (std::size_t j = 0; j < raw.size() && inst.negatives.size() < cap; ++j) {
      if (j == i) continue;
      push(raw[j].positive);
      for (std::size_t d : raw[j].own_negs) push(d);
    }
    eb.instances.push_back(std::move(inst));
  }
  return eb;
}

struct HeadForward {
  Vec f;
  double unorm = 0.0;
  bool degenerate = false;
};

struct BatchForward {
  std::vector<HeadForward> q;
  std::vector<HeadForward> d;
  bool any_degenerate = false;
};

namespace detail {

inline HeadForward forward_one(const AdapterHead& head, const Vec& v) {
  HeadForward fw;
  fw.f = head.affine(v);
  fw.unorm = norm2(fw.f);
  if (fw.unorm < kNormEps) {
    fw.degenerate = true;
  } else {
    for (double& x : fw.f) x /= fw.unorm;
  }
  return fw;
}

/// Gradient w.r.t. u = W v + b given the gradient g w.r.t. f = u/||u||.
inline Vec backprop_normalize(const HeadForward& fw, const Vec& g) {
  if (fw.degenerate) return g;
  const double fg = dot(fw.f, g);
  Vec gu(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) gu[i] = (g[i] - fg * fw.f[i]) / fw.unorm;
  return gu;
}

inline double instance_loss(const BatchForward& fw, const ExpandedBatch::Inst& inst,
                            const std::vector<std::size_t>& negatives, double tau,
                            std::vector<double>* probs) {
  std::vector<const Vec*> negs;
  negs.reserve(negatives.size());
  for (std::size_t d : negatives) negs.push_back(&fw.d[d].f);
  return info_nce_core(fw.q[inst.query].f, fw.d[inst.positive].f, negs, tau, probs);
}

}  // namespace detail

inline BatchForward forward_batch(const AdapterHead& head, const ExpandedBatch& eb) {
  BatchForward fw;
  fw.q.reserve(eb.query_base.size());
  for (const Vec* v : eb.query_base) {
    fw.q.push_back(detail::forward_one(head, *v));
    fw.any_degenerate = fw.any_degenerate || fw.q.back().degenerate;
  }
  fw.d.reserve(eb.doc_base.size());
  for (const Vec* v : eb.doc_base) {
    fw.d.push_back(detail::forward_one(head, *v));
    fw.any_degenerate = fw.any_degenerate || fw.d.back().degenerate;
  }
  return fw;
}

/// Batch loss sum_i weights[i] * L_i with the weights held constant; pure in
/// the head, so finite-difference probes of (W, b) are well-defined.
inline double batch_loss_fixed_weights(const AdapterHead& head, const ExpandedBatch& eb,
                                       const std::vector<double>& weights, double tau) {
  if (weights.size() != eb.instances.size()) {
    throw validation_error("weight count does not match instance count");
  }
  const BatchForward fw = forward_batch(head, eb);
  double loss = 0.0;
  for (std::size_t i = 0; i < eb.instances.size(); ++i) {
    loss += weights[i] *
            detail::instance_loss(fw, eb.instances[i], eb.instances[i].negatives, tau, nullptr);
  }
  return loss;
}

/// Analytic gradient of batch_loss_fixed_weights at the given head. dW and db
/// are overwritten. Accumulation follows table order, so results are
/// bit-stable across runs. Returns the batch loss.
inline double batch_gradients_fixed_weights(const AdapterHead& head, const ExpandedBatch& eb,
                                            const BatchForward& fw,
                                            const std::vector<double>& weights, double tau,
                                            std::vector<double>& dW, Vec& db) {
  if (weights.size() != eb.instances.size()) {
    throw validation_error("weight count does not match instance count");
  }
  const int dim = head.dim;
  std::vector<Vec> q_grads(fw.q.size(), Vec(dim, 0.0));
  std::vector<Vec> d_grads(fw.d.size(), Vec(dim, 0.0));
  double loss = 0.0;
  std::vector<double> probs;
  for (std::size_t i = 0; i < eb.instances.size(); ++i) {
    const ExpandedBatch::Inst& inst = eb.instances[i];
    const double li = detail::instance_loss(fw, inst, inst.negatives, tau, &probs);
    loss += weights[i] * li;
    const double scale = weights[i] / tau;
    const Vec& fq = fw.q[inst.query].f;
    // dL/dfq = (sum_j p_j fd_j - fd_pos) / tau
    Vec& gq = q_grads[inst.query];
    const Vec& fpos = fw.d[inst.positive].f;
    for (int c = 0; c < dim; ++c) gq[c] += scale * (probs[0] * fpos[c] - fpos[c]);
    for (std::size_t j = 0; j < inst.negatives.size(); ++j) {
      const Vec& fd = fw.d[inst.negatives[j]].f;
      const double pj = probs[j + 1];
      for (int c = 0; c < dim; ++c) gq[c] += scale * pj * fd[c];
    }
    // dL/dfd_j = (p_j - [j == positive]) fq / tau
    Vec& gpos = d_grads[inst.positive];
    const double ppos = probs[0] - 1.0;
    for (int c = 0; c < dim; ++c) gpos[c] += scale * ppos * fq[c];
    for (std::size_t j = 0; j < inst.negatives.size(); ++j) {
      Vec& gd = d_grads[inst.negatives[j]];
      const double pj = probs[j + 1];
      for (int c = 0; c < dim; ++c) gd[c] += scale * pj * fq[c];
    }
  }

  dW.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  db.assign(dim, 0.0);
  auto accumulate = [&](const HeadForward& f, const Vec& g, const Vec& v) {
    const Vec gu = detail::backprop_normalize(f, g);
    for (int r = 0; r < dim; ++r) {
      double* row = &dW[static_cast<std::size_t>(r) * dim];
      const double gr = gu[r];
      for (int c = 0; c < dim; ++c) row[c] += gr * v[c];
      db[r] += gr;
    }
  };
  for (std::size_t i = 0; i < fw.q.size(); ++i) accumulate(fw.q[i], q_grads[i], *eb.query_base[i]);
  for (std::size_t i = 0; i < fw.d.size(); ++i) accumulate(fw.d[i], d_grads[i], *eb.doc_base[i]);
  return loss;
}

/// Per-instance own-candidate-set losses: loss with the raw query, the same
/// document set scored by the reasoning-augmented query, and their RI. An
/// absent reasoning row (only legal in warm-up/plain modes) reports ri = 1.
inline std::vector<SampleReport> sample_stats(const AdapterHead& head, const ExpandedBatch& eb,
                                              const BatchForward& fw, double tau, double kappa,
                                              bool* any_degenerate = nullptr) {
  std::vector<HeadForward> reason_fw(eb.reasoning_base.size());
  std::vector<bool> have_reason(eb.reasoning_base.size(), false);
  for (std::size_t i = 0; i < eb.reasoning_base.size(); ++i) {
    if (eb.reasoning_base[i]) {
      reason_fw[i] = detail::forward_one(head, *eb.reasoning_base[i]);
      have_reason[i] = true;
      if (any_degenerate && reason_fw[i].degenerate) *any_degenerate = true;
    }
  }
  std::vector<SampleReport> out;
  out.reserve(eb.instances.size());
  for (const ExpandedBatch::Inst& inst : eb.instances) {
    SampleReport r;
    r.query_id = eb.query_ids[inst.query];
    r.loss = detail::instance_loss(fw, inst, inst.own_negatives, tau, nullptr);
    if (have_reason[inst.query]) {
      std::vector<const Vec*> negs;
      negs.reserve(inst.own_negatives.size());
      for (std::size_t d : inst.own_negatives) negs.push_back(&fw.d[d].f);
      r.loss_reasoned = detail::info_nce_core(reason_fw[inst.query].f, fw.d[inst.positive].f,
                                              negs, tau, nullptr);
      r.ri = reasoning_intensity(r.loss, r.loss_reasoned, kappa);
    } else {
      r.loss_reasoned = 0.0;
      r.ri = 1.0;
    }
    out.push_back(std::move(r));
  }
  return out;
}

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long t = 0;
  std::vector<double> mW, vW;
  Vec mb, vb;

  void ensure(int dim) {
    const std::size_t n = static_cast<std::size_t>(dim) * dim;
    if (mW.size() != n) {
      mW.assign(n, 0.0);
      vW.assign(n, 0.0);
      mb.assign(dim, 0.0);
      vb.assign(dim, 0.0);
    }
  }

  void apply(AdapterHead& head, const std::vector<double>& dW, const Vec& db, double lr) {
    ensure(head.dim);
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < dW.size(); ++i) {
      mW[i] = beta1 * mW[i] + (1.0 - beta1) * dW[i];
      vW[i] = beta2 * vW[i] + (1.0 - beta2) * dW[i] * dW[i];
      head.W[i] -= lr * (mW[i] / c1) / (std::sqrt(vW[i] / c2) + eps);
    }
    for (std::size_t i = 0; i < db.size(); ++i) {
      mb[i] = beta1 * mb[i] + (1.0 - beta1) * db[i];
      vb[i] = beta2 * vb[i] + (1.0 - beta2) * db[i] * db[i];
      head.b[i] -= lr * (mb[i] / c1) / (std::sqrt(vb[i] / c2) + eps);
    }
  }
};

/// One optimizer step over a batch of samples. Steps at or below warmup_steps
/// (and every step of the plain-InfoNCE objective) use uniform weights; later
/// steps weight each instance by batch-normalized RI, with RI treated as a
/// constant during differentiation. lr_override >= 0 substitutes the
/// scheduled learning rate computed by train().
inline BatchReport ri_infonce_step(const std::vector<TrainingSample>& batch,
                                   const EmbeddingMatrix& emb, AdapterHead& head, AdamState& opt,
                                   const TrainConfig& cfg, int step, double lr_override = -1.0) {
  validate(cfg);
  if (step < 1) throw validation_error("step must be >= 1");
  const bool ri_mode = cfg.objective == "ri_infonce" && step > cfg.warmup_steps;
  const ExpandedBatch eb = expand_batch(batch, emb, cfg, ri_mode);
  const BatchForward fw = forward_batch(head, eb);

  BatchReport report;
  report.step = step;
  report.mode = ri_mode ? "ri_infonce" : "warmup_infonce";
  report.degenerate_normalize = fw.any_degenerate;
  report.per_sample = sample_stats(head, eb, fw, cfg.tau, cfg.kappa,
                                   &report.degenerate_normalize);

  std::vector<double> weights;
  if (ri_mode) {
    std::vector<double> ri(report.per_sample.size());
    for (std::size_t i = 0; i < ri.size(); ++i) ri[i] = report.per_sample[i].ri;
    weights = batch_weights(ri);
  } else {
    weights.assign(eb.instances.size(), 1.0 / static_cast<double>(eb.instances.size()));
  }
  for (std::size_t i = 0; i < weights.size(); ++i) report.per_sample[i].weight = weights[i];

  std::vector<double> dW;
  Vec db;
  report.batch_loss = batch_gradients_fixed_weights(head, eb, fw, weights, cfg.tau, dW, db);
  double gn = 0.0;
  for (double g : dW) gn += g * g;
  for (double g : db) gn += g * g;
  report.grad_norm = std::sqrt(gn);

  opt.apply(head, dW, db, lr_override >= 0.0 ? lr_override : cfg.lr);
  return report;
}

struct TrainResult {
  AdapterHead head;
  std::vector<BatchReport> reports;
};

/// One run: shuffle samples per epoch, batch them, step. Deterministic in
/// (dataset order, embeddings, config): shuffles derive from cfg.seed and the
/// epoch index only. The LR ramps linearly over lr_warmup_frac of the planned
/// steps, then stays at cfg.lr.
inline TrainResult train(const std::vector<TrainingSample>& dataset, const EmbeddingMatrix& emb,
                         const TrainConfig& cfg) {
  validate(cfg);
  if (dataset.empty()) throw validation_error("training dataset is empty");
  TrainResult result;
  result.head = AdapterHead::identity(emb.dim());
  AdamState opt;

  const std::size_t n = dataset.size();
  const std::size_t bsz = static_cast<std::size_t>(cfg.batch_size);
  const long long steps_per_epoch = static_cast<long long>((n + bsz - 1) / bsz);
  long long planned = steps_per_epoch * cfg.epochs;
  if (cfg.max_steps > 0) planned = std::min<long long>(planned, cfg.max_steps);
  const long long lr_warm_steps =
      static_cast<long long>(std::ceil(cfg.lr_warmup_frac * static_cast<double>(planned)));

  const std::uint64_t train_seed = derive_seed(cfg.seed, "train");
  int step = 1;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(train_seed, "epoch:" + std::to_string(epoch)));
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += bsz) {
      std::vector<TrainingSample> batch;
      for (std::size_t i = start; i < std::min(n, start + bsz); ++i) {
        batch.push_back(dataset[order[i]]);
      }
      const double lr =
          (lr_warm_steps > 0 && step <= lr_warm_steps)
              ? cfg.lr * static_cast<double>(step) / static_cast<double>(lr_warm_steps)
              : cfg.lr;
      result.reports.push_back(ri_infonce_step(batch, emb, result.head, opt, cfg, step, lr));
      if (cfg.max_steps > 0 && step >= cfg.max_steps) return result;
      ++step;
    }
  }
  return result;
}

/// Binary layout: magic "RFHEAD01", u32 dim, row-major f64 W, then f64 b,
/// all little-endian.
inline void save_head(const AdapterHead& head, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw validation_error("cannot open file for writing: " + path.string());
  out.write(kHeadMagic, 8);
  detail::write_u32(out, static_cast<std::uint32_t>(head.dim));
  auto write_f64 = [&](double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    detail::write_u64(out, bits);
  };
  for (double x : head.W) write_f64(x);
  for (double x : head.b) write_f64(x);
  if (!out) throw validation_error("write failed: " + path.string());
}

inline AdapterHead load_head(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open file: " + path.string());
  const std::string ctx = path.string();
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kHeadMagic, 8) != 0) {
    throw validation_error(ctx + ": not a head file (bad magic)");
  }
  const std::uint32_t dim = detail::read_u32(in, ctx);
  if (dim == 0) throw validation_error(ctx + ": head dim must be positive");
  AdapterHead head;
  head.dim = static_cast<int>(dim);
  auto read_f64 = [&]() {
    const std::uint64_t bits = detail::read_u64(in, ctx);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
  };
  head.W.resize(static_cast<std::size_t>(dim) * dim);
  for (double& x : head.W) x = read_f64();
  head.b.resize(dim);
  for (double& x : head.b) x = read_f64();
  return head;
}

inline Json report_to_json(const BatchReport& r) {
  Json rec;
  rec["step"] = r.step;
  rec["mode"] = r.mode;
  rec["batch_loss"] = r.batch_loss;
  rec["grad_norm"] = r.grad_norm;
  rec["degenerate_normalize"] = r.degenerate_normalize;
  Json per = Json::array();
  for (const SampleReport& s : r.per_sample) {
    per.push_back(Json{{"query_id", s.query_id},
                       {"loss", s.loss},
                       {"loss_reasoned", s.loss_reasoned},
                       {"ri", s.ri},
                       {"weight", s.weight}});
  }
  rec["per_sample"] = per;
  return rec;
}

}  // namespace reasonforge
