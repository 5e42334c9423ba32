#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "reasonforge/evalx.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace reasonforge;

TEST_CASE("ndcg_at_k hand-checked cases") {
  const std::map<std::string, int> rels = {{"a", 3}, {"b", 1}, {"c", 0}};

  SECTION("ideal ordering scores exactly 1") {
    CHECK(ndcg_at_k({"a", "b", "c"}, rels, 10) == 1.0);
    CHECK(ndcg_at_k({"a", "b"}, rels, 10) == 1.0);
  }

  SECTION("swapped ordering matches the manual ratio") {
    // DCG = (2^1-1)/log2(2) + (2^3-1)/log2(3); IDCG = 7/log2(2) + 1/log2(3).
    const double dcg = 1.0 / 1.0 + 7.0 / std::log2(3.0);
    const double idcg = 7.0 / 1.0 + 1.0 / std::log2(3.0);
    CHECK(ndcg_at_k({"b", "a", "c"}, rels, 10) == Catch::Approx(dcg / idcg).epsilon(1e-14));
  }

  SECTION("k truncates both sides") {
    // At k=1 only the top hit counts: rel 1 against ideal rel 3.
    CHECK(ndcg_at_k({"b", "a"}, rels, 1) == Catch::Approx(1.0 / 7.0).epsilon(1e-14));
  }

  SECTION("no relevant docs retrieved scores 0") {
    CHECK(ndcg_at_k({"c", "zzz"}, rels, 10) == 0.0);
    CHECK(ndcg_at_k({}, rels, 10) == 0.0);
  }

  SECTION("all-zero qrels score 0 by convention") {
    CHECK(ndcg_at_k({"a"}, {{"a", 0}}, 10) == 0.0);
  }

  SECTION("unjudged retrieved docs count as relevance 0") {
    CHECK(ndcg_at_k({"mystery", "a", "b"}, rels, 10) < 1.0);
  }

  CHECK_THROWS_AS(ndcg_at_k({"a"}, rels, 0), validation_error);
}

TEST_CASE("ndcg_at_k agrees with the exhaustive permutation oracle") {
  Rng rng(2718);
  const std::vector<std::string> ids = {"d1", "d2", "d3", "d4", "d5"};
  for (int trial = 0; trial < 40; ++trial) {
    std::map<std::string, int> rels;
    bool any = false;
    for (const std::string& id : ids) {
      const int r = static_cast<int>(rng.bounded(4));
      rels[id] = r;
      any = any || r > 0;
    }
    if (!any) rels["d1"] = 1;
    std::vector<std::string> ranked = ids;
    rng.shuffle(ranked);
    const std::size_t k = 1 + rng.bounded(5);
    CHECK(ndcg_at_k(ranked, rels, static_cast<int>(k)) ==
          Catch::Approx(rftest::ndcg_oracle_exhaustive(ranked, rels, k)).margin(1e-12));
  }
}

TEST_CASE("format_query produces the instruct wrapper exactly") {
  CHECK(format_query("Given a question, retrieve passages.", "why is the sky blue") ==
        "Instruct: Given a question, retrieve passages.\nQuery: why is the sky blue");
  CHECK_THROWS_AS(format_query("", "q"), validation_error);
  CHECK_THROWS_AS(format_query("i", ""), validation_error);
}

TEST_CASE("qrels round trip through JSONL") {
  rftest::TempDir tmp;
  const auto path = tmp.path / "qrels.jsonl";

  Qrels qrels;
  qrels["q2"]["d1"] = 3;
  qrels["q1"]["d2"] = 0;
  qrels["q1"]["d1"] = 2;
  save_qrels(qrels, path);

  const Qrels r = load_qrels(path);
  CHECK(r == qrels);

  SECTION("saved order is deterministic (sorted by query then doc)") {
    const std::string text = rftest::slurp(path);
    const auto q1 = text.find("\"q1\"");
    const auto q2 = text.find("\"q2\"");
    REQUIRE(q1 != std::string::npos);
    REQUIRE(q2 != std::string::npos);
    CHECK(q1 < q2);
  }

  SECTION("negative relevance is rejected with context") {
    const auto bad = tmp.path / "bad.jsonl";
    write_file(bad, "{\"query_id\":\"q\",\"doc_id\":\"d\",\"relevance\":-1}\n");
    try {
      load_qrels(bad);
      FAIL("expected validation_error");
    } catch (const validation_error& e) {
      CHECK(std::string(e.what()).find(":1:") != std::string::npos);
    }
  }

  SECTION("non-integer relevance is rejected") {
    const auto bad = tmp.path / "bad2.jsonl";
    write_file(bad, "{\"query_id\":\"q\",\"doc_id\":\"d\",\"relevance\":1.5}\n");
    CHECK_THROWS_AS(load_qrels(bad), validation_error);
  }
}

namespace {

/// Two tasks, two queries each, planted geometry: query qN points at document
/// rN with a weaker decoy at rN_alt.
struct EvalFixture {
  EmbeddingMatrix emb;
  QuerySet queries;
  Corpus corpus;
  Qrels qrels;
};

EvalFixture make_eval_fixture() {
  EvalFixture fx;
  fx.emb = EmbeddingMatrix(4);
  const std::vector<std::string> tasks = {"alpha", "beta"};
  int axis = 0;
  for (int t = 0; t < 2; ++t) {
    for (int i = 0; i < 2; ++i) {
      const std::string qid = "q" + std::to_string(t) + std::to_string(i);
      const std::string best = "r" + qid;
      const std::string decoy = "x" + qid;
      Vec dir(4, 0.0);
      dir[axis % 4] = 1.0;
      Vec off(4, 0.1);
      off[axis % 4] = 0.9;
      fx.emb.add(qid, dir);
      fx.emb.add(best, dir);
      fx.emb.add(decoy, off);
      Query q;
      q.id = qid;
      q.text = "query " + qid;
      q.task = tasks[t];
      fx.queries.add(q);
      fx.corpus.add({best, "best match for " + qid, tasks[t], {}});
      fx.corpus.add({decoy, "weaker match for " + qid, tasks[t], {}});
      fx.qrels[qid][best] = 3;
      fx.qrels[qid][decoy] = 1;
      ++axis;
    }
  }
  fx.emb.renormalize();
  return fx;
}

}  // namespace

TEST_CASE("evaluate macro-averages within and across tasks") {
  const EvalFixture fx = make_eval_fixture();
  const AdapterHead head = AdapterHead::identity(4);

  const EvalResult res = evaluate(head, fx.emb, fx.queries, fx.corpus, fx.qrels, 10);
  // Geometry puts each query's best doc first and its decoy nearby; every
  // per-query ranking is ideal, so all scores are exactly 1.
  REQUIRE(res.per_query.size() == 4);
  for (const auto& [qid, score] : res.per_query) CHECK(score == 1.0);
  REQUIRE(res.per_task.size() == 2);
  CHECK(res.per_task.at("alpha") == 1.0);
  CHECK(res.per_task.at("beta") == 1.0);
  CHECK(res.queries_per_task.at("alpha") == 2);
  CHECK(res.queries_per_task.at("beta") == 2);
  CHECK(res.mean == 1.0);

  SECTION("macro mean weights tasks equally, not queries") {
    // Degrade exactly one alpha query by flipping its qrels so the retrieved
    // order is anti-ideal: its nDCG drops below 1 and only alpha's task mean
    // (and thus half the macro mean) moves.
    Qrels skewed = fx.qrels;
    skewed["q00"]["rq00"] = 1;
    skewed["q00"]["xq00"] = 3;
    const EvalResult r2 = evaluate(head, fx.emb, fx.queries, fx.corpus, skewed, 10);
    const double s = r2.per_query.at("q00");
    CHECK(s < 1.0);
    CHECK(s > 0.0);
    CHECK(r2.per_task.at("alpha") == Catch::Approx((s + 1.0) / 2.0).epsilon(1e-14));
    CHECK(r2.per_task.at("beta") == 1.0);
    CHECK(r2.mean == Catch::Approx((r2.per_task.at("alpha") + 1.0) / 2.0).epsilon(1e-14));
  }

  SECTION("queries in qrels must exist") {
    Qrels extra = fx.qrels;
    extra["ghost"]["rq00"] = 1;
    CHECK_THROWS_AS(evaluate(head, fx.emb, fx.queries, fx.corpus, extra, 10), validation_error);
  }

  SECTION("qrels docs must exist in the corpus") {
    Qrels extra = fx.qrels;
    extra["q00"]["ghostdoc"] = 1;
    CHECK_THROWS_AS(evaluate(head, fx.emb, fx.queries, fx.corpus, extra, 10), validation_error);
  }

  SECTION("a query judged with no positive relevance is an error") {
    Qrels bad;
    bad["q00"]["rq00"] = 0;
    CHECK_THROWS_AS(evaluate(head, fx.emb, fx.queries, fx.corpus, bad, 10), validation_error);
  }

  SECTION("k must be positive") {
    CHECK_THROWS_AS(evaluate(head, fx.emb, fx.queries, fx.corpus, fx.qrels, 0),
                    validation_error);
  }

  SECTION("the head transform changes rankings") {
    // A rank-deficient head that collapses the distinguishing axes scrambles
    // the planted geometry; scores can only drop or hold.
    AdapterHead flat;
    flat.dim = 4;
    flat.W.assign(16, 0.25);
    flat.b.assign(4, 0.0);
    const EvalResult r2 = evaluate(flat, fx.emb, fx.queries, fx.corpus, fx.qrels, 10);
    CHECK(r2.mean <= res.mean);
  }
}
