#pragma once

// Graded NDCG, run evaluation, paired t-test, fold assignment and cross-validated
// tuning of the interpolation weight.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "geeer/embedding.hpp"
#include "geeer/embedding_store.hpp"
#include "geeer/error.hpp"
#include "geeer/rerank.hpp"
#include "geeer/trec.hpp"

namespace geeer {

enum class Gain : std::uint8_t {
  linear,       // grade / log2(i + 1), trec_eval ndcg_cut
  exponential,  // (2^grade - 1) / log2(i + 1)
};

namespace detail {
inline double gain_value(int grade, Gain gain) {
  return gain == Gain::linear ? static_cast<double>(grade) : std::exp2(static_cast<double>(grade)) - 1.0;
}
}  // namespace detail

/// NDCG@k of one ranking. Queries without any relevant judgment score 0.
inline double ndcg_at_k(const Ranking& ranking, const Qrels& qrels, std::size_t k, Gain gain = Gain::linear) {
  if (k < 1) throw ValidationError("cutoff must be >= 1");
  auto it = qrels.judgments.find(ranking.query_id);
  if (it == qrels.judgments.end()) return 0.0;
  std::vector<int> ideal;
  for (const auto& [e, g] : it->second)
    if (g > 0) ideal.push_back(g);
  if (ideal.empty()) return 0.0;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());

  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i)
    idcg += detail::gain_value(ideal[i], gain) / std::log2(static_cast<double>(i + 2));
  double dcg = 0.0;
  const std::size_t n = std::min(k, ranking.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    auto jt = it->second.find(ranking.entries[i].entity);
    if (jt != it->second.end() && jt->second > 0)
      dcg += detail::gain_value(jt->second, gain) / std::log2(static_cast<double>(i + 2));
  }
  return dcg / idcg;
}

struct RunEvaluation {
  std::vector<std::size_t> cutoffs;
  /// query -> one score per cutoff; covers every query present in the qrels.
  std::map<QueryId, std::vector<double>> per_query;
  std::vector<double> mean;

  std::vector<double> scores_at(std::size_t cutoff_index) const {
    std::vector<double> out;
    for (const auto& [q, s] : per_query) out.push_back(s.at(cutoff_index));
    return out;
  }
};

/// Mean over the queries present in the qrels; a query missing from the run scores 0.
inline RunEvaluation evaluate_run(const Run& run, const Qrels& qrels, const std::vector<std::size_t>& cutoffs,
                                  Gain gain = Gain::linear) {
  RunEvaluation ev;
  ev.cutoffs = cutoffs;
  ev.mean.assign(cutoffs.size(), 0.0);
  for (const auto& [q, _] : qrels.judgments) {
    auto it = run.find(q);
    Ranking empty{q, {}};
    const Ranking& r = it == run.end() ? empty : it->second;
    auto& row = ev.per_query[q];
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      row.push_back(ndcg_at_k(r, qrels, cutoffs[c], gain));
      ev.mean[c] += row.back();
    }
  }
  if (!ev.per_query.empty())
    for (auto& m : ev.mean) m /= static_cast<double>(ev.per_query.size());
  return ev;
}

inline std::string render_evaluation(const RunEvaluation& ev) {
  std::string out;
  for (std::size_t c = 0; c < ev.cutoffs.size(); ++c) {
    const std::string measure = "ndcg_cut_" + std::to_string(ev.cutoffs[c]);
    for (const auto& [q, s] : ev.per_query) out += measure + '\t' + q + '\t' + text::format_f(s[c], 6) + '\n';
    out += measure + "\tALL\t" + text::format_f(ev.mean[c], 6) + '\n';
  }
  return out;
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
};

/// Two-sided paired t-test on a - b. Zero-variance differences: all zero gives t = 0, p = 1;
/// a nonzero constant gives t = +-inf, p = 0.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ValidationError("paired t-test needs aligned score lists (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  const std::size_t n = a.size();
  if (n < 2) throw ValidationError("paired t-test needs at least 2 pairs");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(n - 1);
  TTestResult r;
  r.df = n - 1;
  // Differences that are constant up to rounding are treated as zero-variance.
  const double scale = std::max(1.0, std::abs(mean));
  if (var <= 1e-24 * scale * scale) {
    if (mean == 0.0) return {0.0, 1.0, n - 1};
    return {mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(), 0.0, n - 1};
  }
  r.t = mean / std::sqrt(var / static_cast<double>(n));
  boost::math::students_t dist(static_cast<double>(r.df));
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

inline TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  return paired_t_test(std::span<const double>(a), std::span<const double>(b));
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

/// Seeded shuffle, then round-robin assignment.
inline FoldAssignment make_folds(std::vector<QueryId> query_ids, std::size_t k, std::uint64_t seed) {
  if (k < 1) throw ValidationError("fold count must be >= 1");
  std::sort(query_ids.begin(), query_ids.end());
  query_ids.erase(std::unique(query_ids.begin(), query_ids.end()), query_ids.end());
  if (query_ids.size() < k)
    throw ValidationError("cannot split " + std::to_string(query_ids.size()) + " queries into " + std::to_string(k) +
                          " nonempty folds");
  std::mt19937_64 rng(derive_seed(seed, 0x666f6c64ULL));
  for (std::size_t i = query_ids.size(); i > 1; --i) {
    const auto j = std::min(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)), i - 1);
    std::swap(query_ids[i - 1], query_ids[j]);
  }
  FoldAssignment folds;
  folds.k = k;
  for (std::size_t i = 0; i < query_ids.size(); ++i) folds.fold_of[query_ids[i]] = i % k;
  return folds;
}

// ---------------------------------------------------------------------------
// Lambda tuning
// ---------------------------------------------------------------------------

struct TuneConfig {
  std::size_t restarts = 3;
  std::size_t cutoff = 100;
  double initial_step = 0.05;
  double min_step = 1e-3;
  std::uint64_t seed = 1;
  Gain gain = Gain::linear;
  RerankConfig rerank;  // lambda is ignored

  void validate() const {
    if (restarts < 1) throw ValidationError("restarts must be >= 1");
    if (cutoff < 1) throw ValidationError("cutoff must be >= 1");
    if (!(initial_step > 0.0) || !(min_step > 0.0)) throw ValidationError("line-search steps must be positive");
  }
};

struct FoldResult {
  std::size_t fold = 0;
  double lambda = 0.0;
  double train_objective = 0.0;           // mean NDCG@cutoff on training queries at lambda
  std::vector<double> restart_starts;     // starting points
  std::vector<double> restart_lambdas;    // converged points
  std::vector<double> restart_objectives;
};

struct TuneResult {
  std::vector<FoldResult> folds;
  Run cross_validated_run;
  double mean_lambda = 0.0;
  double sd_lambda = 0.0;  // sample standard deviation over folds
};

/// One-dimensional coordinate ascent: from `start`, try start +- step (clamped to
/// [0, 1]); move on strict improvement, otherwise halve the step; stop when the step
/// drops below min_step.
template <typename Objective>
std::pair<double, double> line_search_ascent(Objective&& objective, double start, double initial_step,
                                             double min_step) {
  double x = std::clamp(start, 0.0, 1.0);
  double best = objective(x);
  double step = initial_step;
  while (step >= min_step) {
    const double up = std::min(1.0, x + step), down = std::max(0.0, x - step);
    const double f_up = up != x ? objective(up) : best;
    const double f_down = down != x ? objective(down) : best;
    if (f_up > best && f_up >= f_down) {
      x = up;
      best = f_up;
    } else if (f_down > best) {
      x = down;
      best = f_down;
    } else {
      step /= 2.0;
    }
  }
  return {x, best};
}

/// Mean NDCG@cutoff of the reranked queries at a given lambda. Queries of `judged`
/// missing from `features` score 0.
inline double tuning_objective(const std::map<QueryId, RerankFeatures>& features, const std::vector<QueryId>& judged,
                               const Qrels& qrels, double lambda, std::size_t cutoff, Gain gain) {
  if (judged.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& q : judged) {
    auto it = features.find(q);
    if (it != features.end()) sum += ndcg_at_k(apply_lambda(it->second, lambda), qrels, cutoff, gain);
  }
  return sum / static_cast<double>(judged.size());
}

/// Cross-validated tuning of lambda. For each fold, lambda maximizes mean NDCG@cutoff
/// over the other folds' judged queries (best of `restarts` ascents from random
/// starts); it is then applied to the fold's own queries.
inline TuneResult tune_lambda(const Run& base_run, const Annotations& annotations, const Qrels& qrels,
                              const EmbeddingStore& store, const FoldAssignment& folds, const TuneConfig& cfg) {
  cfg.validate();
  folds.validate();
  const auto judged = qrels.query_ids();
  folds.require_covers(judged);

  RerankConfig rcfg = cfg.rerank;
  rcfg.lambda = 0.0;
  rcfg.validate();
  std::map<QueryId, RerankFeatures> features;
  for (const auto& [q, ranking] : base_run) {
    auto it = annotations.find(q);
    features.emplace(q, rerank_features(ranking, it == annotations.end() ? nullptr : &it->second, store, rcfg));
  }

  TuneResult result;
  for (std::size_t f = 0; f < folds.k; ++f) {
    std::vector<QueryId> train;
    for (const auto& q : judged)
      if (folds.fold_of.at(q) != f) train.push_back(q);
    if (train.empty()) throw ValidationError("training set for fold " + std::to_string(f) + " is empty");

    auto objective = [&](double lambda) {
      return tuning_objective(features, train, qrels, lambda, cfg.cutoff, cfg.gain);
    };
    FoldResult fr;
    fr.fold = f;
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x74756e65ULL, f));
    double best = -1.0;
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
      const double start = uniform01(rng);
      const auto [x, val] = line_search_ascent(objective, start, cfg.initial_step, cfg.min_step);
      fr.restart_starts.push_back(start);
      fr.restart_lambdas.push_back(x);
      fr.restart_objectives.push_back(val);
      if (val > best) {
        best = val;
        fr.lambda = x;
      }
    }
    fr.train_objective = best;

    for (const auto& [q, fq] : folds.fold_of) {
      if (fq != f) continue;
      auto it = features.find(q);
      if (it != features.end()) result.cross_validated_run.emplace(q, apply_lambda(it->second, fr.lambda));
    }
    result.folds.push_back(std::move(fr));
  }

  double sum = 0.0;
  for (const auto& fr : result.folds) sum += fr.lambda;
  result.mean_lambda = sum / static_cast<double>(result.folds.size());
  if (result.folds.size() > 1) {
    double ss = 0.0;
    for (const auto& fr : result.folds) ss += (fr.lambda - result.mean_lambda) * (fr.lambda - result.mean_lambda);
    result.sd_lambda = std::sqrt(ss / static_cast<double>(result.folds.size() - 1));
  }
  return result;
}

/// `lambda<TAB>fold<TAB>value` rows, then `MEAN<TAB>mean ± sd`.
inline std::string render_tune_report(const TuneResult& r) {
  std::string out;
  for (const auto& f : r.folds) out += "lambda\t" + std::to_string(f.fold) + '\t' + text::format_f(f.lambda, 6) + '\n';
  out += "MEAN\t" + text::format_f(r.mean_lambda, 2) + " ± " + text::format_f(r.sd_lambda, 2) + '\n';
  return out;
}

}  // namespace geeer
