#pragma once

// Cluster-hypothesis measures over entity embeddings: per-query coherence,
// Davies-Bouldin and Silhouette indices, projection export and per-query gain reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "geeer/embedding_store.hpp"
#include "geeer/error.hpp"
#include "geeer/evaluation.hpp"
#include "geeer/trec.hpp"
#include "geeer/vector_ops.hpp"

namespace geeer {

struct ClusterMember {
  EntityId entity;
  std::vector<double> vector;
};

/// Relevant entities of one query, with their embeddings.
struct EntityCluster {
  QueryId label;
  std::vector<ClusterMember> members;

  std::size_t size() const { return members.size(); }
  std::size_t dimension() const { return members.empty() ? 0 : members.front().vector.size(); }

  void validate() const {
    if (members.empty()) throw ValidationError("cluster " + label + " is empty");
    std::set<EntityId> seen;
    for (const auto& m : members) {
      if (m.vector.size() != dimension()) throw ValidationError("cluster " + label + " mixes vector dimensions");
      if (!seen.insert(m.entity).second) throw ValidationError("cluster " + label + " repeats entity " + m.entity);
    }
  }
};

struct CoherenceConfig {
  double tau = 0.8;
  std::size_t min_cluster_size = 11;

  void validate() const {
    if (!(tau >= -1.0 && tau <= 1.0)) throw ValidationError("tau must lie in [-1, 1]");
  }
};

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  return cosine(std::span<const double>(u), std::span<const double>(v));
}

/// Fraction of unordered member pairs whose cosine is at least tau.
inline double coherence(const EntityCluster& cluster, double tau) {
  const std::size_t m = cluster.size();
  if (m < 2) throw ValidationError("coherence needs at least 2 members, cluster " + cluster.label + " has " +
                                   std::to_string(m));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (cosine(cluster.members[i].vector, cluster.members[j].vector) >= tau) ++hits;
  return static_cast<double>(hits) / (0.5 * static_cast<double>(m) * static_cast<double>(m - 1));
}

/// One cluster per judged query: entities with grade > 0 that have an embedding.
inline std::vector<EntityCluster> relevant_clusters(const Qrels& qrels, const EmbeddingStore& store) {
  std::vector<EntityCluster> out;
  for (const auto& [q, judged] : qrels.judgments) {
    EntityCluster c{q, {}};
    for (const auto& [e, g] : judged) {
      if (g <= 0) continue;
      if (auto v = store.entity(e)) c.members.push_back({e, std::vector<double>(v->begin(), v->end())});
    }
    if (!c.members.empty()) out.push_back(std::move(c));
  }
  return out;
}

/// Keeps clusters with at least `min_size` members, ordered by size then label.
inline std::vector<EntityCluster> filter_clusters(std::vector<EntityCluster> clusters, std::size_t min_size) {
  std::erase_if(clusters, [&](const EntityCluster& c) { return c.size() < min_size; });
  std::stable_sort(clusters.begin(), clusters.end(), [](const EntityCluster& a, const EntityCluster& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.label < b.label;
  });
  return clusters;
}

struct QueryCoherence {
  QueryId query_id;
  std::size_t members = 0;
  double coherence = 0.0;
};

inline std::vector<QueryCoherence> per_query_coherence(const Qrels& qrels, const EmbeddingStore& store,
                                                       const CoherenceConfig& cfg) {
  cfg.validate();
  std::vector<QueryCoherence> out;
  for (const auto& c : filter_clusters(relevant_clusters(qrels, store), std::max<std::size_t>(cfg.min_cluster_size, 2)))
    out.push_back({c.label, c.size(), coherence(c, cfg.tau)});
  return out;
}

inline std::string render_coherence(const std::vector<QueryCoherence>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.query_id + '\t' + std::to_string(r.members) + '\t' + text::format_f(r.coherence, 6) + '\n';
  return out;
}

enum class Distance : std::uint8_t { euclidean, cosine };

namespace detail {

inline std::vector<double> centroid(const EntityCluster& c) {
  std::vector<double> mu(c.dimension(), 0.0);
  for (const auto& m : c.members)
    for (std::size_t k = 0; k < mu.size(); ++k) mu[k] += m.vector[k];
  for (auto& x : mu) x /= static_cast<double>(c.size());
  return mu;
}

inline double distance(const std::vector<double>& a, const std::vector<double>& b, Distance metric) {
  if (metric == Distance::cosine) return 1.0 - cosine(a, b);
  return euclidean(std::span<const double>(a), std::span<const double>(b));
}

inline void check_clusters(const std::vector<EntityCluster>& clusters) {
  if (clusters.size() < 2) throw ValidationError("cluster validity indices need at least 2 clusters");
  for (const auto& c : clusters) c.validate();
  for (const auto& c : clusters)
    if (c.dimension() != clusters.front().dimension()) throw ValidationError("clusters mix vector dimensions");
}

}  // namespace detail

/// Davies-Bouldin index; lower is better.
inline double davies_bouldin(const std::vector<EntityCluster>& clusters, Distance metric = Distance::euclidean) {
  detail::check_clusters(clusters);
  const std::size_t n = clusters.size();
  std::vector<std::vector<double>> mu;
  std::vector<double> spread;
  for (const auto& c : clusters) {
    mu.push_back(detail::centroid(c));
    double s = 0.0;
    for (const auto& m : c.members) s += detail::distance(m.vector, mu.back(), metric);
    spread.push_back(s / static_cast<double>(c.size()));
  }
  double db = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double sep = detail::distance(mu[i], mu[j], metric);
      if (sep == 0.0)
        throw ValidationError("clusters " + clusters[i].label + " and " + clusters[j].label + " have coincident centroids");
      worst = std::max(worst, (spread[i] + spread[j]) / sep);
    }
    db += worst;
  }
  return db / static_cast<double>(n);
}

/// Mean silhouette over all points; points of singleton clusters score 0.
inline double silhouette(const std::vector<EntityCluster>& clusters, Distance metric = Distance::euclidean) {
  detail::check_clusters(clusters);
  double total = 0.0;
  std::size_t points = 0;
  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    const auto& own = clusters[ci];
    for (std::size_t pi = 0; pi < own.size(); ++pi) {
      ++points;
      if (own.size() == 1) continue;
      const auto& x = own.members[pi].vector;
      double a = 0.0;
      for (std::size_t qi = 0; qi < own.size(); ++qi)
        if (qi != pi) a += detail::distance(x, own.members[qi].vector, metric);
      a /= static_cast<double>(own.size() - 1);
      double b = std::numeric_limits<double>::infinity();
      for (std::size_t cj = 0; cj < clusters.size(); ++cj) {
        if (cj == ci) continue;
        double s = 0.0;
        for (const auto& m : clusters[cj].members) s += detail::distance(x, m.vector, metric);
        b = std::min(b, s / static_cast<double>(clusters[cj].size()));
      }
      const double denom = std::max(a, b);
      total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
  }
  if (points < 2) throw ValidationError("silhouette needs at least 2 points");
  return total / static_cast<double>(points);
}

/// `query_id<TAB>entity_id<TAB>v_1<TAB>...<TAB>v_d` with a header line.
inline std::string render_projection(const std::vector<EntityCluster>& clusters) {
  std::string out = "query_id\tentity_id";
  const std::size_t d = clusters.empty() ? 0 : clusters.front().dimension();
  for (std::size_t k = 1; k <= d; ++k) out += "\tv" + std::to_string(k);
  out += '\n';
  for (const auto& c : clusters)
    for (const auto& m : c.members) {
      out += c.label + '\t' + m.entity;
      for (double x : m.vector) out += '\t' + text::format_g(x, 6);
      out += '\n';
    }
  return out;
}

inline void export_projection(const std::vector<EntityCluster>& clusters, const std::filesystem::path& path) {
  text::write_file_atomic(path, render_projection(clusters));
}

inline std::vector<EntityCluster> import_projection(std::istream& in) {
  std::vector<EntityCluster> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) continue;
    auto view = text::strip_cr(line);
    if (view.empty()) continue;
    auto fields = text::split(view, '\t');
    if (fields.size() < 3) throw ParseError("projection row needs a query, an entity and values", lineno);
    ClusterMember m{EntityId(fields[1]), {}};
    for (std::size_t k = 2; k < fields.size(); ++k) {
      double x = 0.0;
      if (!text::parse_double(fields[k], x)) throw ParseError("non-numeric value", lineno);
      m.vector.push_back(x);
    }
    if (out.empty() || out.back().label != fields[0]) out.push_back({QueryId(fields[0]), {}});
    out.back().members.push_back(std::move(m));
  }
  return out;
}

struct QueryGain {
  QueryId query_id;
  double delta = 0.0;
};

/// NDCG@cutoff(run_b) - NDCG@cutoff(run_a) per judged query, sorted by delta desc (query id on ties).
inline std::vector<QueryGain> query_gain_report(const Run& run_a, const Run& run_b, const Qrels& qrels,
                                                std::size_t cutoff, Gain gain = Gain::linear) {
  const auto ea = evaluate_run(run_a, qrels, {cutoff}, gain);
  const auto eb = evaluate_run(run_b, qrels, {cutoff}, gain);
  std::vector<QueryGain> out;
  for (const auto& [q, s] : ea.per_query) out.push_back({q, eb.per_query.at(q)[0] - s[0]});
  std::stable_sort(out.begin(), out.end(), [](const QueryGain& a, const QueryGain& b) {
    if (a.delta != b.delta) return a.delta > b.delta;
    return a.query_id < b.query_id;
  });
  return out;
}

inline std::string render_gains(const std::vector<QueryGain>& gains, std::size_t cutoff) {
  std::string out = "qid\tdelta@" + std::to_string(cutoff) + '\n';
  for (const auto& g : gains) out += g.query_id + '\t' + text::format_f(g.delta, 6) + '\n';
  return out;
}

}  // namespace geeer
