#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "geeer/evaluation.hpp"
#include "oracles.hpp"
#include "planted.hpp"

using namespace geeer;

namespace {

Ranking ranked(const std::string& q, const std::vector<std::string>& ids) {
  Ranking r{q, {}};
  for (std::size_t i = 0; i < ids.size(); ++i) r.entries.push_back({ids[i], double(ids.size() - i), i + 1});
  return r;
}

}  // namespace

TEST(Ndcg, HandDerivedFixture) {
  Qrels q;
  q.set("Q", "A", 2);
  q.set("Q", "B", 1);
  const double v = ndcg_at_k(ranked("Q", {"B", "A"}), q, 10);
  EXPECT_NEAR(v, 0.8597186998521972, 1e-12);
  EXPECT_NEAR(v, 0.85972, 1e-5);
  EXPECT_DOUBLE_EQ(ndcg_at_k(ranked("Q", {"A", "B"}), q, 10), 1.0);
}

TEST(Ndcg, Conventions) {
  Qrels q;
  q.set("Q", "A", 0);
  EXPECT_EQ(ndcg_at_k(ranked("Q", {"A"}), q, 10), 0.0);
  EXPECT_EQ(ndcg_at_k(ranked("Other", {"A"}), q, 10), 0.0);
  EXPECT_THROW(ndcg_at_k(ranked("Q", {"A"}), q, 0), ValidationError);
}

TEST(Ndcg, ExponentialGain) {
  Qrels q;
  q.set("Q", "A", 2);
  q.set("Q", "B", 1);
  const double dcg = 1.0 + 3.0 / std::log2(3.0), idcg = 3.0 + 1.0 / std::log2(3.0);
  EXPECT_NEAR(ndcg_at_k(ranked("Q", {"B", "A"}), q, 10, Gain::exponential), dcg / idcg, 1e-12);
}

TEST(Ndcg, ExhaustivePermutationsMatchBruteForce) {
  const std::vector<std::string> ids{"a", "b", "c", "d", "e"};
  for (std::size_t n = 1; n <= 5; ++n) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 3;
    for (std::size_t code = 0; code < combos; ++code) {
      Qrels q;
      std::vector<int> grades(n);
      for (std::size_t i = 0, c = code; i < n; ++i, c /= 3) {
        grades[i] = static_cast<int>(c % 3);
        q.set("Q", ids[i], grades[i]);
      }
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      do {
        std::vector<std::string> order;
        std::vector<int> ranked_grades;
        for (auto p : perm) {
          order.push_back(ids[p]);
          ranked_grades.push_back(grades[p]);
        }
        for (std::size_t k : {1u, 3u, 10u})
          ASSERT_NEAR(ndcg_at_k(ranked("Q", order), q, k), oracle::brute_ndcg(ranked_grades, grades, k), 1e-9);
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
}

TEST(EvaluateRun, MeanOverJudgedQueries) {
  Qrels q;
  q.set("Q1", "A", 1);
  q.set("Q2", "B", 1);
  q.set("Q3", "C", 1);
  geeer::Run run{{"Q1", ranked("Q1", {"A"})}, {"Q2", ranked("Q2", {"X"})}, {"Q9", ranked("Q9", {"A"})}};
  auto ev = evaluate_run(run, q, {10, 100});
  ASSERT_EQ(ev.per_query.size(), 3u);
  EXPECT_NEAR(ev.mean[0], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(ev.scores_at(1), (std::vector<double>{1.0, 0.0, 0.0}));
  EXPECT_NE(render_evaluation(ev).find("ndcg_cut_100\tALL\t0.333333\n"), std::string::npos);
}

TEST(TTest, ReferenceFixture) {
  auto r = paired_t_test(std::vector<double>{1, 2, 3, 4}, std::vector<double>{0, 0, 0, 0});
  EXPECT_NEAR(r.t, 3.872983346207417, 1e-9);
  EXPECT_NEAR(r.p, 0.030466291662170977, 1e-9);
  EXPECT_EQ(r.df, 3u);
}

TEST(TTest, Conventions) {
  std::vector<double> a{0.1, 0.5, 0.7, 0.2, 0.9};
  auto same = paired_t_test(a, a);
  EXPECT_EQ(same.t, 0.0);
  EXPECT_EQ(same.p, 1.0);
  std::vector<double> b = a;
  for (auto& x : b) x += 1.0;
  auto shifted = paired_t_test(b, a);
  EXPECT_EQ(shifted.p, 0.0);
  EXPECT_TRUE(std::isinf(shifted.t) && shifted.t > 0);
  EXPECT_THROW(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), ValidationError);
  EXPECT_THROW(paired_t_test(std::vector<double>{1, 2}, std::vector<double>{2}), ValidationError);
}

TEST(TTest, Antisymmetric) {
  std::vector<double> a{0.3, 0.8, 0.1, 0.55, 0.42, 0.9}, b{0.2, 0.6, 0.3, 0.5, 0.1, 0.7};
  auto ab = paired_t_test(a, b), ba = paired_t_test(b, a);
  EXPECT_DOUBLE_EQ(ab.t, -ba.t);
  EXPECT_DOUBLE_EQ(ab.p, ba.p);
}

TEST(MakeFolds, BalancedAndDeterministic) {
  std::vector<QueryId> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("q" + std::to_string(i));
  auto f = make_folds(ids, 5, 3);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(f.members(k).size(), 2u);
  EXPECT_EQ(render_folds(f), render_folds(make_folds(ids, 5, 3)));
  EXPECT_NE(render_folds(f), render_folds(make_folds(ids, 5, 4)));
  EXPECT_THROW(make_folds({"a", "b"}, 3, 1), ValidationError);
}

TEST(LineSearch, FindsPeakOfConcaveObjective) {
  auto [x, v] = line_search_ascent([](double l) { return -(l - 0.37) * (l - 0.37); }, 0.9, 0.05, 1e-3);
  EXPECT_NEAR(x, 0.37, 1e-3);
  EXPECT_LE(v, 0.0);
  auto [edge, _] = line_search_ascent([](double l) { return l; }, 0.5, 0.05, 1e-3);
  EXPECT_EQ(edge, 1.0);
}

TEST(TuneLambda, PlantedIdealRecovered) {
  auto f = planted::make(40, 25, 7);
  auto folds = make_folds(f.qrels.query_ids(), 5, 1);
  TuneConfig cfg;
  auto result = tune_lambda(f.run, f.annotations, f.qrels, f.store, folds, cfg);
  ASSERT_EQ(result.folds.size(), 5u);
  for (const auto& fr : result.folds) {
    EXPECT_GE(fr.lambda, 0.98);
    EXPECT_LE(fr.lambda, 1.0);
    EXPECT_EQ(fr.restart_starts.size(), 3u);
  }
  EXPECT_GE(evaluate_run(result.cross_validated_run, f.qrels, {100}).mean[0], 0.99);
  EXPECT_LT(evaluate_run(f.run, f.qrels, {100}).mean[0], 0.9);
}

TEST(TuneLambda, ZeroEsimMatchesBaseline) {
  auto f = planted::make(20, 15, 3, true);
  auto folds = make_folds(f.qrels.query_ids(), 5, 2);
  auto result = tune_lambda(f.run, f.annotations, f.qrels, f.store, folds, TuneConfig{});
  EXPECT_DOUBLE_EQ(evaluate_run(result.cross_validated_run, f.qrels, {100}).mean[0],
                   evaluate_run(f.run, f.qrels, {100}).mean[0]);
  for (const auto& fr : result.folds) {
    // flat objective: each restart stays at its start and the first one wins
    EXPECT_EQ(fr.restart_lambdas, fr.restart_starts);
    EXPECT_EQ(fr.lambda, fr.restart_starts[0]);
  }
}

TEST(TuneLambda, ReportFormatAndErrors) {
  TuneResult r;
  r.folds = {{0, 0.6, 0, {}, {}, {}}, {1, 0.62, 0, {}, {}, {}}};
  r.mean_lambda = 0.61;
  r.sd_lambda = 0.0141;
  EXPECT_EQ(render_tune_report(r), "lambda\t0\t0.600000\nlambda\t1\t0.620000\nMEAN\t0.61 ± 0.01\n");

  auto f = planted::make(6, 5, 1);
  FoldAssignment partial;
  partial.k = 1;
  partial.fold_of = {{"q0", 0}};
  EXPECT_THROW(tune_lambda(f.run, f.annotations, f.qrels, f.store, partial, TuneConfig{}), ValidationError);
}
