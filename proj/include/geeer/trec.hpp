#pragma once

// Run, qrels, query-annotation and fold files.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "geeer/corpus.hpp"
#include "geeer/error.hpp"
#include "geeer/text_io.hpp"

namespace geeer {

using QueryId = std::string;

struct RankedEntity {
  EntityId entity;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based
};

/// Scored entity list for one query; entries ordered by (score desc, entity asc) with dense ranks.
struct Ranking {
  QueryId query_id;
  std::vector<RankedEntity> entries;

  /// Sorts by (score desc, entity asc) and assigns ranks 1..n.
  void normalize_order() {
    std::sort(entries.begin(), entries.end(), [](const RankedEntity& a, const RankedEntity& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.entity < b.entity;
    });
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].rank = i + 1;
  }

  std::vector<EntityId> order() const {
    std::vector<EntityId> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) ids.push_back(e.entity);
    return ids;
  }
};

using Run = std::map<QueryId, Ranking>;

/// Reads `qid Q0 entity rank score tag`. The rank column is ignored; ranks are recomputed.
inline Run parse_run(std::istream& in) {
  Run run;
  std::map<QueryId, std::set<EntityId>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = text::split_ws(text::strip_cr(line));
    if (fields.empty()) continue;
    if (fields.size() != 6) throw ParseError("run line expects 6 columns, got " + std::to_string(fields.size()), lineno);
    double score = 0.0;
    if (!text::parse_double(fields[4], score) || !std::isfinite(score))
      throw ParseError("non-numeric score '" + std::string(fields[4]) + "'", lineno);
    QueryId q(fields[0]);
    EntityId e(fields[2]);
    if (!seen[q].insert(e).second) throw ParseError("duplicate run entry (" + q + ", " + e + ")", lineno);
    auto& ranking = run[q];
    ranking.query_id = q;
    ranking.entries.push_back({e, score, 0});
  }
  for (auto& [q, r] : run) r.normalize_order();
  return run;
}

inline Run parse_run(const std::filesystem::path& path) {
  auto in = text::open_input(path);
  return parse_run(in);
}

inline Run parse_run_string(std::string_view content) {
  std::istringstream in{std::string(content)};
  return parse_run(in);
}

inline std::string render_run(const Run& run, std::string_view tag = "geeer") {
  std::string out;
  for (const auto& [q, r] : run)
    for (const auto& e : r.entries)
      out += q + " Q0 " + e.entity + ' ' + std::to_string(e.rank) + ' ' + text::format_g(e.score, 10) + ' ' +
             std::string(tag) + '\n';
  return out;
}

inline void save_run(const Run& run, const std::filesystem::path& path, std::string_view tag = "geeer") {
  text::write_file_atomic(path, render_run(run, tag));
}

// ---------------------------------------------------------------------------
// Qrels
// ---------------------------------------------------------------------------

/// Graded judgments in {0, 1, 2}.
struct Qrels {
  std::map<QueryId, std::map<EntityId, int>> judgments;

  int grade(const QueryId& q, const EntityId& e) const {
    auto it = judgments.find(q);
    if (it == judgments.end()) return 0;
    auto jt = it->second.find(e);
    return jt == it->second.end() ? 0 : jt->second;
  }

  void set(const QueryId& q, const EntityId& e, int grade) {
    if (grade < 0 || grade > 2) throw ValidationError("relevance grade must be 0, 1 or 2");
    judgments[q][e] = grade;
  }

  std::vector<QueryId> query_ids() const {
    std::vector<QueryId> ids;
    for (const auto& [q, _] : judgments) ids.push_back(q);
    return ids;
  }

  std::set<EntityId> assessed_entities() const {
    std::set<EntityId> out;
    for (const auto& [q, m] : judgments)
      for (const auto& [e, _] : m) out.insert(e);
    return out;
  }
};

/// Reads `qid 0 entity grade`.
inline Qrels parse_qrels(std::istream& in) {
  Qrels qrels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = text::split_ws(text::strip_cr(line));
    if (fields.empty()) continue;
    if (fields.size() != 4) throw ParseError("qrels line expects 4 columns", lineno);
    int grade = 0;
    if (!text::parse_int(fields[3], grade) || grade < 0 || grade > 2)
      throw ParseError("grade must be 0, 1 or 2, got '" + std::string(fields[3]) + "'", lineno);
    auto& m = qrels.judgments[QueryId(fields[0])];
    if (!m.emplace(EntityId(fields[2]), grade).second)
      throw ParseError("duplicate judgment (" + std::string(fields[0]) + ", " + std::string(fields[2]) + ")", lineno);
  }
  return qrels;
}

inline Qrels parse_qrels(const std::filesystem::path& path) {
  auto in = text::open_input(path);
  return parse_qrels(in);
}

inline Qrels parse_qrels_string(std::string_view content) {
  std::istringstream in{std::string(content)};
  return parse_qrels(in);
}

inline std::string render_qrels(const Qrels& qrels) {
  std::string out;
  for (const auto& [q, m] : qrels.judgments)
    for (const auto& [e, g] : m) out += q + " 0 " + e + ' ' + std::to_string(g) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Query annotations
// ---------------------------------------------------------------------------

struct LinkedEntity {
  EntityId entity;
  double confidence = 0.0;
};

/// Entities linked in a query with their linker confidence s(e) in [0, 1].
struct LinkedQuery {
  QueryId query_id;
  std::vector<LinkedEntity> linked;
};

using Annotations = std::map<QueryId, LinkedQuery>;

/// Reads `qid<TAB>entity<TAB>confidence`. A repeated (query, entity) keeps the maximum confidence.
inline Annotations parse_annotations(std::istream& in) {
  std::map<QueryId, std::map<EntityId, double>> merged;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = text::strip_cr(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = text::split(view, '\t');
    if (fields.size() != 3) throw ParseError("annotation line expects 3 tab-separated fields", lineno);
    if (fields[1].empty() || text::has_whitespace(fields[1])) throw ParseError("bad entity id", lineno);
    double conf = 0.0;
    if (!text::parse_double(fields[2], conf)) throw ParseError("non-numeric confidence", lineno);
    if (!(conf >= 0.0 && conf <= 1.0))
      throw ValidationError("line " + std::to_string(lineno) + ": confidence " + std::string(fields[2]) +
                            " outside [0, 1]");
    auto [it, inserted] = merged[QueryId(fields[0])].emplace(EntityId(fields[1]), conf);
    if (!inserted) it->second = std::max(it->second, conf);
  }
  Annotations out;
  for (auto& [q, m] : merged) {
    LinkedQuery lq{q, {}};
    for (auto& [e, c] : m) lq.linked.push_back({e, c});
    out.emplace(q, std::move(lq));
  }
  return out;
}

inline Annotations parse_annotations(const std::filesystem::path& path) {
  auto in = text::open_input(path);
  return parse_annotations(in);
}

inline Annotations parse_annotations_string(std::string_view content) {
  std::istringstream in{std::string(content)};
  return parse_annotations(in);
}

inline std::string render_annotations(const Annotations& ann) {
  std::string out;
  for (const auto& [q, lq] : ann)
    for (const auto& le : lq.linked) out += q + '\t' + le.entity + '\t' + text::format_g(le.confidence, 10) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

struct FoldAssignment {
  std::map<QueryId, std::size_t> fold_of;
  std::size_t k = 5;

  std::vector<QueryId> members(std::size_t fold) const {
    std::vector<QueryId> out;
    for (const auto& [q, f] : fold_of)
      if (f == fold) out.push_back(q);
    return out;
  }

  void validate() const {
    if (k < 1) throw ValidationError("fold count must be >= 1");
    std::vector<std::size_t> sizes(k, 0);
    for (const auto& [q, f] : fold_of) {
      if (f >= k) throw ValidationError("query " + q + " assigned to fold " + std::to_string(f) + " >= k");
      ++sizes[f];
    }
    for (std::size_t f = 0; f < k; ++f)
      if (sizes[f] == 0) throw ValidationError("fold " + std::to_string(f) + " is empty");
  }

  /// Every listed query must have a fold.
  void require_covers(const std::vector<QueryId>& queries) const {
    for (const auto& q : queries)
      if (!fold_of.count(q)) throw ValidationError("query " + q + " is judged but has no fold assignment");
  }
};

/// Reads `qid<TAB>fold_index`; k is one more than the largest index.
inline FoldAssignment parse_folds(std::istream& in) {
  FoldAssignment folds;
  folds.k = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = text::split_ws(text::strip_cr(line));
    if (fields.empty()) continue;
    std::size_t f = 0;
    if (fields.size() != 2 || !text::parse_int(fields[1], f)) throw ParseError("fold line expects 'qid<TAB>fold'", lineno);
    if (!folds.fold_of.emplace(QueryId(fields[0]), f).second)
      throw ParseError("query " + std::string(fields[0]) + " assigned twice", lineno);
    folds.k = std::max(folds.k, f + 1);
  }
  if (!folds.fold_of.empty()) folds.validate();
  return folds;
}

inline FoldAssignment parse_folds(const std::filesystem::path& path) {
  auto in = text::open_input(path);
  return parse_folds(in);
}

inline FoldAssignment parse_folds_string(std::string_view content) {
  std::istringstream in{std::string(content)};
  return parse_folds(in);
}

inline std::string render_folds(const FoldAssignment& folds) {
  std::string out;
  for (const auto& [q, f] : folds.fold_of) out += q + '\t' + std::to_string(f) + '\n';
  return out;
}

}  // namespace geeer
