#pragma once

// Embedding-similarity score of a candidate entity against the query's linked entities,
// and its interpolation with a first-stage retrieval score.

#include <algorithm>
#include <cstddef>
#include <string>

#include "geeer/embedding_store.hpp"
#include "geeer/error.hpp"
#include "geeer/trec.hpp"
#include "geeer/vector_ops.hpp"

namespace geeer {

struct RerankConfig {
  double lambda = 0.5;
  std::size_t top_k = 1000;
  bool normalize_base = true;
  /// Stands in for the cosine of any term whose candidate or linked entity has no embedding.
  double missing_embedding_score = 0.0;

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
    if (top_k < 1) throw ValidationError("top_k must be >= 1");
  }
};

/// F(E, Q) = sum over linked e of s(e) * cos(E, e).
inline double esim(const LinkedQuery& query, std::string_view entity, const EmbeddingStore& store,
                   double missing_embedding_score = 0.0) {
  if (query.linked.empty()) return 0.0;
  const auto candidate = store.entity(entity);
  double score = 0.0;
  for (const auto& le : query.linked) {
    const auto linked = store.entity(le.entity);
    const double sim = candidate && linked ? cosine(*candidate, *linked) : missing_embedding_score;
    score += le.confidence * sim;
  }
  return score;
}

/// (1 - lambda) * base + lambda * f.
inline double interpolate(double base, double f, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
  return (1.0 - lambda) * base + lambda * f;
}

/// Candidate features for one query, computed once and reusable across lambda values.
struct RerankFeatures {
  QueryId query_id;
  std::vector<EntityId> entities;
  std::vector<double> base;  // normalized when requested
  std::vector<double> esim;
};

inline RerankFeatures rerank_features(const Ranking& run, const LinkedQuery* query, const EmbeddingStore& store,
                                      const RerankConfig& cfg) {
  RerankFeatures f;
  f.query_id = run.query_id;
  const std::size_t n = std::min(cfg.top_k, run.entries.size());
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = run.entries[i];
    f.entities.push_back(e.entity);
    f.base.push_back(e.score);
    f.esim.push_back(query ? esim(*query, e.entity, store, cfg.missing_embedding_score) : 0.0);
    lo = i == 0 ? e.score : std::min(lo, e.score);
    hi = i == 0 ? e.score : std::max(hi, e.score);
  }
  if (cfg.normalize_base)
    for (auto& b : f.base) b = hi > lo ? (b - lo) / (hi - lo) : 1.0;
  return f;
}

inline Ranking apply_lambda(const RerankFeatures& f, double lambda) {
  Ranking out;
  out.query_id = f.query_id;
  out.entries.reserve(f.entities.size());
  for (std::size_t i = 0; i < f.entities.size(); ++i)
    out.entries.push_back({f.entities[i], interpolate(f.base[i], f.esim[i], lambda), 0});
  out.normalize_order();
  return out;
}

/// Truncates to top_k, optionally min-max normalizes base scores within the query,
/// interpolates with esim and re-sorts by (score desc, entity asc).
inline Ranking rerank(const Ranking& run, const LinkedQuery* query, const EmbeddingStore& store,
                      const RerankConfig& cfg) {
  cfg.validate();
  return apply_lambda(rerank_features(run, query, store, cfg), cfg.lambda);
}

inline Ranking rerank(const Ranking& run, const LinkedQuery& query, const EmbeddingStore& store,
                      const RerankConfig& cfg) {
  return rerank(run, &query, store, cfg);
}

/// Reranks every query of a run; queries without annotations get an empty E(Q).
inline Run rerank_run(const Run& run, const Annotations& annotations, const EmbeddingStore& store,
                      const RerankConfig& cfg) {
  cfg.validate();
  Run out;
  for (const auto& [q, ranking] : run) {
    auto it = annotations.find(q);
    out.emplace(q, rerank(ranking, it == annotations.end() ? nullptr : &it->second, store, cfg));
  }
  return out;
}

}  // namespace geeer
