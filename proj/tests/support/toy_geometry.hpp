#pragma once

// Synthetic retrieval geometry for end-to-end trainer checks.
//
// Documents and queries live on the unit sphere in 64 dimensions. Latent
// structure: a 32-dim signal half and a 32-dim noise half, mixed through a
// random rotation so no axis-aligned shortcut exists. Every query carries its
// own signal direction plus one of a few shared noise directions; distractor
// documents imitate a query's signal at partial strength but amplify the
// shared noise, so with the identity head they outscore the true positives.
// A linear head that suppresses the noise half separates positives cleanly,
// which is what training is expected to find.
//
// A fifth of the training queries carry conflicting annotations: two samples
// label the same pair of documents in opposite directions. Both documents
// score identically against their query at init, so each of the two samples
// starts at its ln 2 loss floor with nothing to fit, while their opposing
// gradients never settle and keep injecting update noise into the head.
// Reasoning queries score the pair identically too, so these samples sit at
// reasoning intensity ~ 1 while useful samples spread above 1; intensity
// weighting therefore mutes exactly the samples that only add noise.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "reasonforge/corpus.hpp"
#include "reasonforge/evalx.hpp"
#include "reasonforge/retrieval.hpp"
#include "reasonforge/rng.hpp"
#include "reasonforge/vecmath.hpp"

namespace rftest {

struct ToyFixture {
  reasonforge::Corpus corpus;
  reasonforge::QuerySet queries;
  std::vector<reasonforge::TrainingSample> train_samples;
  reasonforge::Qrels heldout_qrels;
  reasonforge::EmbeddingMatrix emb;
};

inline ToyFixture build_toy(std::uint64_t seed) {
  using namespace reasonforge;
  const int dim = 64, sig = 32;
  const int n_queries = 50, n_train = 35, pos_per_q = 3, n_noise_dirs = 8;
  Rng rng(derive_seed(seed, "toy"));

  // Random rotation via Gram-Schmidt on gaussian rows.
  std::vector<Vec> R(dim, Vec(dim));
  for (auto& row : R) {
    for (double& x : row) x = rng.gaussian();
  }
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < i; ++j) {
      double d = 0;
      for (int c = 0; c < dim; ++c) d += R[i][c] * R[j][c];
      for (int c = 0; c < dim; ++c) R[i][c] -= d * R[j][c];
    }
    normalize_inplace(R[i]);
  }
  auto embed_parts = [&](const Vec& s_part, const Vec& n_part, double ws, double wn) {
    Vec v(dim, 0.0);
    for (int c = 0; c < sig; ++c) v[c] = ws * s_part[c];
    for (int c = 0; c < sig; ++c) v[sig + c] = wn * n_part[c];
    Vec out(dim, 0.0);
    for (int c = 0; c < dim; ++c) {
      for (int r = 0; r < dim; ++r) out[r] += v[c] * R[c][r];
    }
    normalize_inplace(out);
    return out;
  };
  auto rand_unit = [&](int n) {
    Vec v(n);
    for (double& x : v) x = rng.gaussian();
    normalize_inplace(v);
    return v;
  };
  auto jitter = [&](const Vec& base, double spread) {
    Vec v = base;
    for (double& x : v) x += spread * rng.gaussian() / std::sqrt(static_cast<double>(v.size()));
    normalize_inplace(v);
    return v;
  };

  std::vector<Vec> noise_dirs;
  for (int g = 0; g < n_noise_dirs; ++g) noise_dirs.push_back(rand_unit(sig));

  ToyFixture fx;
  fx.emb = EmbeddingMatrix(dim, true);

  std::vector<Vec> query_sig;
  for (int i = 0; i < n_queries; ++i) query_sig.push_back(rand_unit(sig));

  // Distractors: partial signal match to their target query + strong shared noise.
  const int n_distractors = 57;  // fills the corpus to 200 docs total
  for (int j = 0; j < n_distractors; ++j) {
    Document d;
    d.id = "dx" + std::to_string(j);
    d.text = "distractor";
    d.task = "toy";
    fx.corpus.add(d);
    const Vec s_confuse = jitter(query_sig[j % n_queries], 0.9);
    fx.emb.add(d.id, embed_parts(s_confuse, noise_dirs[j % n_noise_dirs], 0.45, 0.9));
  }
  for (int i = 0; i < n_queries; ++i) {
    const Vec& s_i = query_sig[i];
    const Vec& g_i = noise_dirs[i % n_noise_dirs];
    const double beta = 0.5 + 0.45 * rng.uniform01();
    const bool corrupted = (i < n_train) && (i % 5 == 4);
    Query q;
    q.id = "q" + std::to_string(i);
    q.text = "toy query";
    q.task = "toy";
    fx.queries.add(q);
    fx.emb.add(q.id, embed_parts(s_i, g_i, 0.6, beta));
    // Reasoning query: modestly cleaner, cleanup varies per query so the
    // useful samples spread over a range of reasoning intensities.
    const double keep = 0.25 + 0.35 * rng.uniform01();
    fx.emb.add(q.id + "::rq", embed_parts(s_i, g_i, 0.7, beta * keep));
    if (corrupted) {
      // Conflicting annotations, see the header comment. The two documents
      // mix the query signal with fresh noise directions orthogonal to the
      // query's own noise, so their dot products with both the plain and the
      // reasoning query agree exactly at init.
      auto ortho_unit = [&](std::vector<const Vec*> basis) {
        Vec u(sig);
        for (double& x : u) x = rng.gaussian();
        for (const Vec* bp : basis) {
          double d = 0;
          for (int c = 0; c < sig; ++c) d += u[c] * (*bp)[c];
          for (int c = 0; c < sig; ++c) u[c] -= d * (*bp)[c];
        }
        normalize_inplace(u);
        return u;
      };
      const Vec u1 = ortho_unit({&g_i});
      const Vec u2 = ortho_unit({&g_i, &u1});
      const Vec q_row = embed_parts(s_i, g_i, 0.6, 0.3);
      const Vec rq_row = embed_parts(s_i, g_i, 0.7, 0.3 * keep);
      Document da;
      da.id = "cx" + std::to_string(i);
      da.text = "tug";
      da.task = "toy";
      fx.corpus.add(da);
      Document db;
      db.id = "cy" + std::to_string(i);
      db.text = "tug";
      db.task = "toy";
      fx.corpus.add(db);
      fx.emb.add(da.id, embed_parts(s_i, u1, 0.85, 0.5));
      fx.emb.add(db.id, embed_parts(s_i, u2, 0.85, 0.5));
      for (char side : {'a', 'b'}) {
        TrainingSample t2;
        t2.query_id = q.id + side;
        t2.reasoning_query = "rq";
        fx.emb.add(t2.query_id, q_row);
        fx.emb.add(t2.query_id + "::rq", rq_row);
        t2.positives.push_back(side == 'a' ? da.id : db.id);
        t2.hard_negatives.push_back(side == 'a' ? db.id : da.id);
        fx.train_samples.push_back(t2);
      }
      continue;
    }
    TrainingSample ts;
    ts.query_id = q.id;
    ts.reasoning_query = "rq";
    for (int p = 0; p < pos_per_q; ++p) {
      Document d;
      d.id = "p" + std::to_string(i) + "_" + std::to_string(p);
      d.text = "positive";
      d.task = "toy";
      fx.corpus.add(d);
      fx.emb.add(d.id, embed_parts(jitter(s_i, 0.35), rand_unit(sig), 0.8, 0.6));
      ts.positives.push_back(d.id);
    }
    for (int j = 0; j < n_distractors; ++j) {
      if (j % n_noise_dirs == i % n_noise_dirs) ts.hard_negatives.push_back("dx" + std::to_string(j));
    }
    if (i < n_train) {
      fx.train_samples.push_back(ts);
    } else {
      for (const std::string& p : ts.positives) fx.heldout_qrels[q.id][p] = 1;
    }
  }
  return fx;
}

}  // namespace rftest
